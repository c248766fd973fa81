"""Special functions on the sphere.

Normalized Gegenbauer polynomials ``W_n^lam = C_n^lam / C_n^lam(1)`` and
normalized Jacobi polynomials ``R_n^{(a,b)} = P_n^{(a,b)} / P_n^{(a,b)}(1)``
are evaluated by recurrences written directly for the normalized families,
so no Gamma-ratio ever has to be formed.  ``lam = INFINITE`` gives the
power sequence ``W_n(x) = x**n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

from . import _kernels
from .errors import DomainError, QuadratureError, UnsupportedDimensionError

__all__ = [
    "INFINITE",
    "JacobiPair",
    "QuadratureRule",
    "check_lambda",
    "lambda_from_dimension",
    "dimension_from_lambda",
    "gegenbauer_w_sequence",
    "jacobi_r",
    "jacobi_r_sequence",
    "omega",
    "gegenbauer_measure_constant",
    "sphere_area",
    "c_dim",
    "gauss_gegenbauer",
    "real_sph_harm",
    "real_sph_harm_matrix",
    "as_sphere_points",
    "geodesic_angle",
    "inner_product",
    "w_envelope",
]

INFINITE = math.inf

_UNIT_TOL = 1e-12
_INT64_MAX = 2**63 - 1


def check_lambda(lam, allow_infinite=True):
    lam = float(lam)
    if math.isnan(lam) or lam <= 0.0:
        raise DomainError(f"Gegenbauer index must be positive, got {lam}")
    if math.isinf(lam) and not allow_infinite:
        raise DomainError("a finite Gegenbauer index is required")
    return lam


def lambda_from_dimension(d):
    if int(d) != d or d < 2:
        raise DomainError(f"sphere dimension must be an integer >= 2, got {d}")
    return 0.5 * (int(d) - 1)


def dimension_from_lambda(lam):
    """Return d with lam = (d-1)/2, or None when lam is not of that form."""
    if math.isinf(lam):
        return None
    d = 2.0 * lam + 1.0
    if abs(d - round(d)) < 1e-12 and round(d) >= 2:
        return int(round(d))
    return None


def _check_x(x):
    x = float(x)
    if not math.isfinite(x) or abs(x) > 1.0:
        raise DomainError(f"argument must lie in [-1, 1], got {x}")
    return x


def gegenbauer_w_sequence(lam, x, n_max):
    """Return ``[W_0(x), ..., W_{n_max}(x)]`` in one forward pass.

    The recurrence
    ``(n + 2 lam) W_{n+1} = 2 (n + lam) x W_n - n W_{n-1}``
    keeps every value in [-1, 1] and gives ``W_n(1) = 1`` exactly.
    """
    lam = check_lambda(lam)
    x = _check_x(x)
    if int(n_max) != n_max or n_max < 0:
        raise DomainError(f"n_max must be a nonnegative integer, got {n_max}")
    return _kernels.w_sequence(lam, x, int(n_max))


@dataclass(frozen=True)
class JacobiPair:
    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha < -0.5 or self.beta < -0.5:
            raise DomainError(f"Jacobi parameters must be >= -1/2, got {self}")
        if self.alpha < self.beta:
            raise DomainError(f"expected alpha >= beta, got {self}")

    @classmethod
    def ultraspherical(cls, lam):
        lam = check_lambda(lam, allow_infinite=False)
        return cls(lam - 0.5, lam - 0.5)


def jacobi_r_sequence(jp, x, n_max):
    x = _check_x(x)
    return _kernels.r_sequence(float(jp.alpha), float(jp.beta), x, int(n_max))


def jacobi_r(n, jp, x):
    """Normalized Jacobi polynomial ``R_n^{(alpha,beta)}(x)``, equal to 1 at x = 1."""
    if int(n) != n or n < 0:
        raise DomainError(f"degree must be a nonnegative integer, got {n}")
    return float(jacobi_r_sequence(jp, x, int(n))[int(n)])


def omega(n, lam):
    """Inverse squared norm of ``W_n^lam`` under the probability measure G_lam.

    ``omega_n = ((n + lam)/lam) * Gamma(n + 2 lam) / (Gamma(2 lam) n!)``,
    evaluated through log-gamma.  Accepts arrays of degrees.
    """
    lam = check_lambda(lam, allow_infinite=False)
    n = np.asarray(n, dtype=float)
    val = (n + lam) / lam * np.exp(gammaln(n + 2.0 * lam) - gammaln(2.0 * lam) - gammaln(n + 1.0))
    return float(val) if val.ndim == 0 else val


def gegenbauer_measure_constant(lam):
    """Normalizing constant of G_lam(dx) = const * (1 - x^2)^(lam - 1/2) dx."""
    lam = check_lambda(lam, allow_infinite=False)
    return math.exp(math.lgamma(lam + 1.0) - 0.5 * math.log(math.pi) - math.lgamma(lam + 0.5))


def w_envelope(lam, n, x):
    """Upper bound on ``sup_{m >= n} |W_m^lam(x)|`` (never less than the bound 1 is useful).

    From the Erdelyi-Magnus-Nevai inequality for orthonormal Jacobi
    polynomials with alpha = beta = lam - 1/2 >= -1/2:
    ``(1 - x^2)^lam p_n(x)^2 <= 2e (2 + sqrt(2) |lam - 1/2|) / pi``.
    Since ``p_n = sqrt(const * omega_n) W_n`` and omega_n increases with n,
    the bound at n dominates every later degree.  ``inf`` at x = +-1.
    For lam = INFINITE the exact value ``|x|**n`` is returned.
    """
    n = np.asarray(n, dtype=float)
    x = np.asarray(x, dtype=float)
    if math.isinf(lam):
        with np.errstate(divide="ignore"):
            return np.abs(x) ** n
    k0 = 2.0 * math.e * (2.0 + math.sqrt(2.0) * abs(lam - 0.5)) / math.pi
    g = gegenbauer_measure_constant(lam)
    s2 = np.maximum(1.0 - x * x, 0.0)
    with np.errstate(divide="ignore"):
        return np.sqrt(k0 / (g * omega(n, lam))) / s2 ** (0.5 * lam)


def sphere_area(d):
    """Surface area of the unit d-sphere, 2 pi^((d+1)/2) / Gamma((d+1)/2)."""
    return 2.0 * math.pi ** (0.5 * (d + 1)) / math.gamma(0.5 * (d + 1))


def c_dim(ell, d):
    """Number of linearly independent degree-ell spherical harmonics on S^d.

    Exact integer arithmetic; raises OverflowError past the int64 range.
    """
    if int(ell) != ell or ell < 0:
        raise DomainError(f"degree must be a nonnegative integer, got {ell}")
    if int(d) != d or d < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {d}")
    ell, d = int(ell), int(d)
    num = (2 * ell + d - 1) * math.comb(ell + d - 2, ell)
    q, r = divmod(num, d - 1)
    assert r == 0
    if q > _INT64_MAX:
        raise OverflowError(f"c({ell}, {d}) exceeds the 64-bit integer range")
    return q


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values):
        return float(np.dot(self.weights, values))


def gauss_gegenbauer(lam, n_nodes):
    """Gauss rule for the probability measure G_lam via its Jacobi matrix.

    Off-diagonal entries of the orthonormal recurrence are
    ``b_{n+1}^2 = (n + 1)(n + 2 lam) / (4 (n + lam)(n + lam + 1))``.
    """
    lam = check_lambda(lam, allow_infinite=False)
    if int(n_nodes) != n_nodes or n_nodes < 1:
        raise DomainError(f"n_nodes must be a positive integer, got {n_nodes}")
    n_nodes = int(n_nodes)
    k = np.arange(n_nodes - 1, dtype=float)
    off = np.sqrt((k + 1.0) * (k + 2.0 * lam) / (4.0 * (k + lam) * (k + lam + 1.0)))
    try:
        nodes, vecs = eigh_tridiagonal(np.zeros(n_nodes), off)
    except np.linalg.LinAlgError as exc:
        raise QuadratureError(f"tridiagonal eigensolver failed for lam={lam}, n={n_nodes}: {exc}") from exc
    weights = vecs[0] ** 2
    weights = weights / weights.sum()
    # symmetric measure: symmetrize to remove eigensolver noise
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    return QuadratureRule(nodes=nodes, weights=weights)


def as_sphere_points(points, d=None):
    """Validate an (n, d+1) array of unit vectors; a single vector is promoted."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    if p.ndim != 2 or p.shape[1] < 3:
        raise DomainError(f"points must have shape (n, d+1) with d >= 2, got {p.shape}")
    if d is not None and p.shape[1] != d + 1:
        raise DomainError(f"points live in R^{p.shape[1]}, expected R^{d + 1}")
    norms = np.linalg.norm(p, axis=1)
    if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
        bad = float(np.max(np.abs(norms - 1.0)))
        raise DomainError(f"points must be unit vectors (max |norm - 1| = {bad:.3g})")
    return p


def inner_product(x, y):
    """Clamped inner products of unit vectors; excursions beyond 1e-12 are errors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != y.shape[-1]:
        raise DomainError(f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")
    t = np.sum(x * y, axis=-1)
    if np.any(np.abs(t) > 1.0 + _UNIT_TOL):
        raise DomainError("inner product outside [-1, 1]; points are not unit vectors")
    return np.clip(t, -1.0, 1.0)


def geodesic_angle(x, y):
    t = inner_product(x, y)
    out = np.arccos(t)
    return float(out) if np.ndim(out) == 0 else out


def _sph_coords(points):
    p = as_sphere_points(points)
    if p.shape[1] != 3:
        raise UnsupportedDimensionError("real spherical harmonics are implemented for S^2 only")
    z = np.clip(p[:, 2], -1.0, 1.0)
    sin_t = np.hypot(p[:, 0], p[:, 1])
    phi = np.arctan2(p[:, 1], p[:, 0])
    return z, sin_t, phi


def real_sph_harm_matrix(L, points):
    """Real orthonormal spherical harmonics for all ``ell <= L``.

    Returns an array of shape ``(n_points, (L+1)**2)``; column
    ``ell**2 + ell + m`` holds ``Y_{ell m}`` for ``m = -ell..ell``.
    The basis is ``Y_{l0} = N P_l``, ``Y_{lm} = sqrt(2) N P_l^m cos(m phi)``
    and ``Y_{l,-m} = sqrt(2) N P_l^m sin(m phi)``, with Condon-Shortley
    phase in ``P_l^m`` and orthonormality against the surface measure of
    total mass 4 pi.
    """
    if int(L) != L or L < 0:
        raise DomainError(f"L must be a nonnegative integer, got {L}")
    L = int(L)
    z, sin_t, phi = _sph_coords(points)
    npts = z.size
    out = np.empty((npts, (L + 1) ** 2))
    # fully normalized associated Legendre values, P~_l^m incl. 1/sqrt(4 pi)
    pmm = np.full(npts, 1.0 / math.sqrt(4.0 * math.pi))
    for m in range(L + 1):
        if m > 0:
            pmm = -math.sqrt((2.0 * m + 1.0) / (2.0 * m)) * sin_t * pmm
        cos_m = np.cos(m * phi)
        sin_m = np.sin(m * phi)
        p_prev = np.zeros(npts)
        p_cur = pmm
        for ell in range(m, L + 1):
            if ell == m + 1:
                p_prev, p_cur = p_cur, math.sqrt(2.0 * m + 3.0) * z * p_cur
            elif ell > m + 1:
                a = math.sqrt((4.0 * ell * ell - 1.0) / (ell * ell - m * m))
                b = math.sqrt(((ell - 1.0) ** 2 - m * m) / (4.0 * (ell - 1.0) ** 2 - 1.0))
                p_prev, p_cur = p_cur, a * (z * p_cur - b * p_prev)
            base = ell * ell + ell
            if m == 0:
                out[:, base] = p_cur
            else:
                out[:, base + m] = math.sqrt(2.0) * p_cur * cos_m
                out[:, base - m] = math.sqrt(2.0) * p_cur * sin_m
    return out


def real_sph_harm(ell, m, p):
    if int(ell) != ell or ell < 0:
        raise DomainError(f"degree must be a nonnegative integer, got {ell}")
    if int(m) != m or abs(m) > ell:
        raise DomainError(f"order must satisfy |m| <= ell, got m={m}, ell={ell}")
    row = real_sph_harm_matrix(int(ell), p)
    ell, m = int(ell), int(m)
    vals = row[:, ell * ell + ell + m]
    return float(vals[0]) if np.ndim(p) == 1 else vals
