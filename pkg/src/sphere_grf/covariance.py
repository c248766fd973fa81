"""Schoenberg and Berg-Porcu covariances with certified truncation.

Every series is cut at the smallest degree N whose remainder bound meets
the requested tolerance.  The bound for ``sum_{n > N} w_n a_n W_n(x)`` is

    w_max * A_{N+1} * min(1, B_{N+1}(x))

where ``B`` is the envelope from :func:`sphere_grf.specfun.w_envelope`
(``|x|^{N+1}`` on the Hilbert sphere).  Because ``A`` and ``B`` are both
non-increasing in N, the bound is monotone and bisection-free selection on
a candidate grid is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .errors import DomainError, NotPSDError, TruncationError
from .specfun import JacobiPair, as_sphere_points, inner_product, w_envelope
from .spectrum import AngularPowerSpectrum

__all__ = [
    "N_CAP",
    "TemporalKind",
    "TemporalCF",
    "SpaceTimeCovarianceModel",
    "SeriesValue",
    "IncMethod",
    "Direction",
    "CovMatrix",
    "schoenberg_cov",
    "schoenberg_series",
    "incremental_variance",
    "incremental_variance_series",
    "incremental_variance_fixed",
    "i_c_convert",
    "bp_cov",
    "bp_series",
    "cov_matrix",
    "truncation_degrees",
]

N_CAP = 2**24


class TemporalKind(str, Enum):
    GAUSS = "GAUSS"
    EXPDECAY = "EXPDECAY"
    RATIONAL = "RATIONAL"


@dataclass(frozen=True)
class TemporalCF:
    """Even characteristic function on the line.

    GAUSS ``exp(-b t^2 / 2)`` (normal law), EXPDECAY ``exp(-b |t|)``
    (Cauchy law), RATIONAL ``1 / (1 + b t^2)`` (Laplace law).
    """

    kind: TemporalKind
    b: float

    def __post_init__(self):
        object.__setattr__(self, "kind", TemporalKind(self.kind))
        if not (self.b > 0.0 and math.isfinite(self.b)):
            raise DomainError(f"temporal rate b must be positive and finite, got {self.b}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind is TemporalKind.GAUSS:
            out = np.exp(-0.5 * self.b * t * t)
        elif self.kind is TemporalKind.EXPDECAY:
            out = np.exp(-self.b * np.abs(t))
        else:
            out = 1.0 / (1.0 + self.b * t * t)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class SpaceTimeCovarianceModel:
    """Spectrum plus per-degree temporal factors and amplitudes c_n.

    Degrees beyond the ``temporal`` or ``c_l`` lists reuse the last entry.
    """

    spectrum: AngularPowerSpectrum
    temporal: tuple = (TemporalCF(TemporalKind.GAUSS, 1.0),)
    c_l: tuple = (1.0,)

    def __post_init__(self):
        temporal = tuple(self.temporal)
        if not temporal:
            raise DomainError("at least one temporal characteristic function is required")
        for cf in temporal:
            if not isinstance(cf, TemporalCF):
                raise DomainError(f"temporal entries must be TemporalCF, got {cf!r}")
        c_l = tuple(float(c) for c in self.c_l)
        if not c_l or any(not (c > 0.0 and math.isfinite(c)) for c in c_l):
            raise DomainError("c_l must be a nonempty list of positive finite reals")
        object.__setattr__(self, "temporal", temporal)
        object.__setattr__(self, "c_l", c_l)

    def temporal_for(self, n):
        return self.temporal[min(int(n), len(self.temporal) - 1)]

    def c_for(self, n):
        return self.c_l[min(int(n), len(self.c_l) - 1)]

    def weights(self, n_stop):
        """``c_n^2`` for n < n_stop."""
        c = np.asarray(self.c_l)
        idx = np.minimum(np.arange(n_stop), c.size - 1)
        return c[idx] ** 2

    def tail_weight(self, n):
        """``max_{k >= n} c_k^2``, the factor in the remainder bound."""
        c = np.asarray(self.c_l)
        return float(np.max(c[min(int(n), c.size - 1):]) ** 2)

    @property
    def variance(self):
        """``C((x,t),(x,t)) = c * sum_n a_n c_n^2``."""
        k = len(self.c_l)
        spec = self.spectrum
        a = spec.coefficients(k)
        return spec.scale * (float(np.dot(a, self.weights(k))) + self.c_l[-1] ** 2 * spec.tail_sum(k))


@dataclass(frozen=True)
class SeriesValue:
    value: float
    bound: float
    n_terms: int


class IncMethod(str, Enum):
    DIRECT = "DIRECT"
    STAR = "STAR"


class Direction(str, Enum):
    C_TO_I = "C_TO_I"
    I_TO_C = "I_TO_C"


# truncation ------------------------------------------------------------


def _envelope(lam, n, x):
    return np.minimum(1.0, w_envelope(lam, n, x))


def truncation_degrees(spec, xs, tol, weight=1.0, n_cap=N_CAP, lam=None):
    """Smallest certified N per point and the bound it achieves.

    ``weight`` multiplies ``A_{N+1} min(1, B_{N+1}(x))`` and may be a
    callable of N (used for per-degree amplitudes).  ``lam`` overrides the
    spectrum's index for the envelope.
    Raises TruncationError when some point needs more than ``n_cap`` terms.
    """
    if not tol > 0.0:
        raise DomainError(f"tol must be positive, got {tol}")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if not spec.has_tail:
        n = np.full(xs.size, max(spec.L, 0), dtype=np.int64)
        return n, np.zeros(xs.size)
    ns, a_next = spec.tail_bound_grid(n_cap)
    w = np.array([weight(int(n) + 1) for n in ns]) if callable(weight) else weight
    base = spec.scale * w * a_next
    out_n = np.empty(xs.size, dtype=np.int64)
    out_b = np.empty(xs.size)
    for j, x in enumerate(xs):
        if x == 1.0:
            # callers close the series exactly at x = 1
            out_n[j] = max(spec.L, 0)
            out_b[j] = 0.0
            continue
        bound = base * _envelope(spec.lam if lam is None else lam, ns + 1, x)
        # bound is non-increasing in N; first index meeting tol
        ok = np.nonzero(bound <= tol)[0]
        if ok.size == 0:
            raise TruncationError(
                f"tolerance {tol:g} not reachable within {n_cap} terms at x={float(x)!r} "
                f"(achieved bound {bound[-1]:.3g})",
                achieved_bound=float(bound[-1]),
                required_terms=None,
            )
        out_n[j] = ns[ok[0]]
        out_b[j] = bound[ok[0]]
    return out_n, out_b


def _sorted_call(kernel, pts, nmax, *lead):
    """Run ``kernel(*lead, pts, nmax)`` with points ordered by decreasing N."""
    order = np.argsort(-nmax, kind="stable")
    res = kernel(*lead, pts[order], nmax[order])
    out = np.empty_like(res)
    out[order] = res
    return out


def _check_xs(xs):
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(~np.isfinite(xs)) or np.any(np.abs(xs) > 1.0):
        raise DomainError("cosine arguments must lie in [-1, 1]")
    return xs


# Schoenberg series -------------------------------------------------------


def _schoenberg_eval(spec, xs, tol, n_cap=N_CAP):
    spec.require_normalized()
    xs = _check_xs(xs)
    nmax, bound = truncation_degrees(spec, xs, tol, n_cap=n_cap)
    top = int(nmax.max())
    coef = spec.coefficients(max(top + 1, 2))
    vals = spec.scale * _sorted_call(_kernels.w_series, xs, nmax, coef, spec.lam)
    # C(1) = c exactly for every normalized spectrum
    vals = np.where(xs == 1.0, spec.scale, vals)
    bound = np.where(xs == 1.0, 0.0, bound)
    return vals, bound, nmax


def schoenberg_series(spec, t, tol=1e-10):
    """``C(t) = c sum a_n W_n(t)`` with its certified remainder bound and N."""
    v, b, n = _schoenberg_eval(spec, [t], tol)
    return SeriesValue(float(v[0]), float(b[0]), int(n[0]))


def schoenberg_cov(spec, t, tol=1e-10):
    """Covariance at cosine ``t``; scalar in, scalar out, arrays vectorize."""
    if np.ndim(t) == 0:
        return schoenberg_series(spec, t, tol).value
    return _schoenberg_eval(spec, np.ravel(t), tol)[0].reshape(np.shape(t))


# incremental variance ---------------------------------------------------


def _check_angles(vs):
    vs = np.atleast_1d(np.asarray(vs, dtype=float))
    if np.any(~np.isfinite(vs)) or np.any(vs < 0.0) or np.any(vs > math.pi):
        raise DomainError("angles must lie in [0, pi]")
    return vs


def _incvar_eval(spec, vs, tol, method, n_cap=N_CAP, lam=None):
    spec.require_normalized()
    method = IncMethod(method)
    vs = _check_angles(vs)
    xs = np.cos(vs)
    lam = spec.lam if lam is None else lam
    # the bound uses c = 1: I_series carries no physical scale
    unit = _unit_scale(spec)
    nmax, bound = truncation_degrees(unit, xs, tol, n_cap=n_cap, lam=lam)
    top = int(nmax.max())
    a_tail = unit.tail_sums(top + 1)  # A_0 .. A_{top+1}
    if method is IncMethod.DIRECT:
        coef = unit.coefficients(max(top + 1, 2))
        vals = _sorted_call(_kernels.incvar_direct, vs, nmax, coef, lam) + a_tail[nmax + 1]
    else:
        if math.isinf(lam):
            raise DomainError("the STAR identity needs a finite Gegenbauer index")
        jp = JacobiPair.ultraspherical(lam)
        alpha1 = jp.alpha + 1.0
        a_shift = a_tail[1:]  # a_shift[n] = A_{n+1}
        s1, s2 = _kernels.incvar_star(a_shift, alpha1, jp.beta, vs, nmax)
        h = 2.0 * np.sin(0.5 * vs) ** 2 / (jp.alpha + 1.0)
        w_n = 1.0 - h * s2
        vals = h * s1 + a_tail[nmax + 1] * w_n
    vals = np.where(vs == 0.0, 0.0, vals)
    bound = np.where(vs == 0.0, 0.0, bound)
    return np.clip(vals, 0.0, 2.0), bound, nmax


def _unit_scale(spec):
    if spec.scale == 1.0:
        return spec
    cache = spec._cache
    if "unit" not in cache:
        from dataclasses import replace

        cache["unit"] = replace(spec, scale=1.0)
    return cache["unit"]


def incremental_variance_series(spec, v, tol=1e-10, method=IncMethod.DIRECT):
    vals, bound, n = _incvar_eval(spec, [v], tol, method)
    return SeriesValue(float(vals[0]), float(bound[0]), int(n[0]))


def incremental_variance(spec, v, tol=1e-10, method=IncMethod.DIRECT):
    """``I(v) = sum a_n (1 - W_n(cos v))`` (unit scale), in [0, 2].

    DIRECT sums the series with ``1 - W_n`` produced by a recurrence that
    keeps relative accuracy at small angles, then adds the tail mass
    ``A_{N+1}``.  STAR uses the Jacobi partial-summation identity
    ``I = (2 sin^2(v/2)/(alpha+1)) sum_n (n+alpha+1) A_{n+1} R_n^{(alpha+1,beta)}(cos v)``.
    Arrays of angles vectorize.
    """
    if np.ndim(v) == 0:
        return incremental_variance_series(spec, v, tol, method).value
    return _incvar_eval(spec, np.ravel(v), tol, method)[0].reshape(np.shape(v))


def incremental_variance_fixed(spec, vs, n_terms, lam=None):
    """``I`` at many angles with one common cut N, plus the certified bounds.

    Cheaper than tolerance-driven evaluation when a whole grid is needed;
    returns ``(values, bounds)``.
    """
    spec.require_normalized()
    vs = _check_angles(vs)
    lam = spec.lam if lam is None else lam
    unit = _unit_scale(spec)
    n_terms = int(n_terms)
    nmax = np.full(vs.size, n_terms, dtype=np.int64)
    coef = unit.coefficients(max(n_terms + 1, 2))
    a_next = unit.tail_sum(n_terms + 1)
    vals = _kernels.incvar_direct(coef, lam, vs, nmax) + a_next
    bounds = a_next * _envelope(lam, n_terms + 1, np.cos(vs))
    vals = np.where(vs == 0.0, 0.0, vals)
    bounds = np.where(vs == 0.0, 0.0, bounds)
    return np.clip(vals, 0.0, 2.0), bounds


def i_c_convert(c1, value, direction):
    """Isotropic ``i = 2 (C(1) - C(x))`` and its inverse."""
    direction = Direction(direction)
    if direction is Direction.C_TO_I:
        return 2.0 * (c1 - value)
    return c1 - 0.5 * value


# Berg-Porcu ------------------------------------------------------------


def _bp_eval(model, xs, dts, tol, n_cap=N_CAP):
    spec = model.spectrum
    spec.require_normalized()
    xs = _check_xs(xs)
    dts = np.atleast_1d(np.asarray(dts, dtype=float))
    if dts.shape != xs.shape:
        raise DomainError("cosines and time lags must have matching shapes")
    if np.any(~np.isfinite(dts)):
        raise DomainError("time lags must be finite")
    nmax, bound = truncation_degrees(spec, xs, tol, weight=model.tail_weight, n_cap=n_cap)
    top = int(nmax.max())
    n_stop = max(top + 1, 2)
    coef = spec.coefficients(n_stop) * model.weights(n_stop)
    cls = np.minimum(np.arange(n_stop), len(model.temporal) - 1).astype(np.int64)
    phi = np.column_stack([cf(dts) for cf in model.temporal])
    order = np.argsort(-nmax, kind="stable")
    vals = np.empty(xs.size)
    vals[order] = spec.scale * _kernels.w_series_classed(
        coef, cls, phi[order], spec.lam, xs[order], nmax[order]
    )
    at_one = xs == 1.0
    if np.any(at_one):
        # W_n(1) = 1: beyond both lists the tail is exactly c^2 phi(dt) A_K
        k = max(len(model.temporal), len(model.c_l), spec.tail_start)
        ck = np.arange(k)
        wk = spec.coefficients(k) * model.weights(k)
        phik = np.column_stack([model.temporal_for(n)(dts[at_one]) for n in ck])
        last = model.c_l[-1] ** 2 * model.temporal[-1](dts[at_one]) * spec.tail_sum(k)
        vals[at_one] = spec.scale * (phik @ wk + last)
    return vals, bound, nmax


def bp_series(model, cosangle, dt, tol=1e-10):
    v, b, n = _bp_eval(model, [cosangle], [dt], tol)
    return SeriesValue(float(v[0]), float(b[0]), int(n[0]))


def bp_cov(model, cosangle, dt, tol=1e-10):
    """``c sum a_n c_n^2 phi_n(dt) W_n(cosangle)``; vectorizes over matching arrays."""
    if np.ndim(cosangle) == 0 and np.ndim(dt) == 0:
        return bp_series(model, cosangle, dt, tol).value
    x, t = np.broadcast_arrays(np.asarray(cosangle, float), np.asarray(dt, float))
    return _bp_eval(model, x.ravel(), t.ravel(), tol)[0].reshape(x.shape)


# covariance matrices ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class CovMatrix:
    matrix: np.ndarray
    jitter_added: float = 0.0
    factor: np.ndarray | None = None
    points: np.ndarray | None = None
    times: np.ndarray | None = None
    truncation_bound: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.matrix)[0])

    @property
    def size(self):
        return self.matrix.shape[0]


def _try_cholesky(m):
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return None


def _factorize(mat, jitter, max_jitter):
    """Return (factor, jitter) following the doubling schedule, or raise NotPSDError."""
    if jitter == "none":
        return _try_cholesky(mat), 0.0
    c1 = float(np.max(np.diag(mat)))
    f = _try_cholesky(mat)
    if f is not None:
        return f, 0.0
    cap = max_jitter if max_jitter is not None else 1e-6 * c1
    eye = np.eye(mat.shape[0])
    eps = 1e-12 * c1
    while eps <= cap * (1.0 + 1e-12):
        f = _try_cholesky(mat + eps * eye)
        if f is not None:
            return f, eps
        eps *= 2.0
    raise NotPSDError(f"matrix not factorizable with jitter up to {cap:.3g}")


def cov_matrix(model, points, times=None, tol=1e-10, jitter="auto", max_jitter=None):
    """Covariance matrix over a point list.

    ``model`` is an :class:`AngularPowerSpectrum` (spatial) or a
    :class:`SpaceTimeCovarianceModel`; with ``times`` (one per point) the
    entries are ``bp_cov(<x_i, x_j>, t_i - t_j)``.  Distinct inner products
    are evaluated once.  ``jitter`` is ``"none"`` or ``"auto"``.
    """
    jitter = str(jitter).lower()
    if jitter not in ("none", "auto"):
        raise DomainError(f"jitter policy must be 'none' or 'auto', got {jitter!r}")
    pts = as_sphere_points(points)
    p = pts.shape[0]
    spec = model.spectrum if isinstance(model, SpaceTimeCovarianceModel) else model
    if spec.d is not None and pts.shape[1] != spec.d + 1:
        raise DomainError(f"points live in R^{pts.shape[1]} but the spectrum is on S^{spec.d}")
    if times is not None and not isinstance(model, SpaceTimeCovarianceModel):
        raise DomainError("time coordinates need a SpaceTimeCovarianceModel")
    iu, ju = np.triu_indices(p)
    g = inner_product(pts[iu], pts[ju])
    g[iu == ju] = 1.0
    if times is None:
        _, first, inv = np.unique(np.round(g, 14), return_index=True, return_inverse=True)
        inv = inv.ravel()
        xs = g[first]
        if isinstance(model, SpaceTimeCovarianceModel):
            vals, bound, _ = _bp_eval(model, xs, np.zeros_like(xs), tol)
        else:
            vals, bound, _ = _schoenberg_eval(spec, xs, tol)
    else:
        t = np.asarray(times, dtype=float).ravel()
        if t.size != p:
            raise DomainError("one time coordinate per point is required")
        dt = np.abs(t[iu] - t[ju])
        key = np.stack([np.round(g, 14), np.round(dt, 14)], axis=1)
        _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
        inv = inv.ravel()
        xs, dts = g[first], dt[first]
        vals, bound, _ = _bp_eval(model, xs, dts, tol)
    entries = vals[inv]
    mat = np.empty((p, p))
    mat[iu, ju] = entries
    mat[ju, iu] = entries
    factor, jit = _factorize(mat, jitter, max_jitter)
    return CovMatrix(
        matrix=mat,
        jitter_added=jit,
        factor=factor,
        points=pts,
        times=None if times is None else np.asarray(times, dtype=float),
        truncation_bound=float(np.max(bound)) if bound.size else 0.0,
    )
