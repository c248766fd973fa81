"""Gaussian field samplers.

Randomness is keyed by ``(seed, stream, block, degree)``: replicates are
generated in blocks of :data:`BLOCK` and every block/degree pair owns an
independent PCG64 stream derived through ``numpy.random.SeedSequence``.
Outputs therefore do not depend on thread scheduling, and the first R
replicates of a run are identical to a run with R replicates.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .covariance import CovMatrix, SpaceTimeCovarianceModel, _factorize
from .errors import DomainError, NotPSDError
from .specfun import as_sphere_points, gegenbauer_w_sequence, inner_product, real_sph_harm_matrix

__all__ = [
    "BLOCK",
    "Method",
    "RngSpec",
    "FieldSample",
    "LiteralReport",
    "thread_count",
    "kl_variances",
    "sample_kl_sphere",
    "sample_spacetime",
    "sample_cholesky",
    "verify_literal_expansion",
]

BLOCK = 1024
_MAX_SEED = 2**64 - 1


class Method(str, Enum):
    KL = "KL"
    CHOLESKY = "CHOLESKY"
    SPACETIME_KL = "SPACETIME_KL"
    LITERAL_TXT = "LITERAL_TXT"


@dataclass(frozen=True)
class RngSpec:
    seed: int
    stream: int = 0

    def __post_init__(self):
        if int(self.seed) != self.seed or not 0 <= self.seed <= _MAX_SEED:
            raise DomainError(f"seed must be an integer in [0, 2^64), got {self.seed}")
        if int(self.stream) != self.stream or self.stream < 0:
            raise DomainError(f"stream must be a nonnegative integer, got {self.stream}")

    def generator(self, block, degree=0):
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream), int(block), int(degree)))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class FieldSample:
    points: np.ndarray
    values: np.ndarray
    seed: int
    stream: int
    truncation_L: int
    method: Method
    times: np.ndarray | None = None
    jitter_added: float = 0.0
    truncation_bound: float = 0.0

    def __post_init__(self):
        v = self.values
        if v.shape[1] != self.points.shape[0]:
            raise DomainError("values do not match the point list")
        if self.times is not None and (v.ndim != 3 or v.shape[2] != len(self.times)):
            raise DomainError("values do not match the time grid")
        if not np.all(np.isfinite(v)):
            raise DomainError("sample contains non-finite values")

    @property
    def replicates(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class LiteralReport:
    empirical_cov: float
    formula_value: float
    stationary_value: float
    standard_error: float
    z_score: float
    stationary_z: float
    product_differs: bool
    replicates: int


def thread_count():
    """Worker cap from ``SPHERE_GRF_THREADS`` (default: CPU count, at most 8)."""
    env = os.environ.get("SPHERE_GRF_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise DomainError(f"SPHERE_GRF_THREADS must be a positive integer, got {env!r}") from exc
        if n < 1:
            raise DomainError(f"SPHERE_GRF_THREADS must be a positive integer, got {env!r}")
        return n
    return max(1, min(os.cpu_count() or 1, 8))


def _blocks(replicates):
    if int(replicates) != replicates or replicates < 1:
        raise DomainError(f"replicates must be a positive integer, got {replicates}")
    replicates = int(replicates)
    return [(b, b * BLOCK, min(BLOCK, replicates - b * BLOCK)) for b in range(-(-replicates // BLOCK))]


def _run_blocks(fn, blocks):
    workers = min(thread_count(), len(blocks))
    if workers <= 1:
        for blk in blocks:
            fn(*blk)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for fut in [pool.submit(fn, *blk) for blk in blocks]:
            fut.result()


def _check_L(L):
    if int(L) != L or L < 0:
        raise DomainError(f"truncation degree L must be a nonnegative integer, got {L}")
    return int(L)


def kl_variances(spec, L):
    """Coefficient variances ``v_ell = c a_ell 4 pi / (2 ell + 1)`` on S^2."""
    if spec.d != 2:
        raise DomainError("the harmonic samplers need a spectrum on S^2 (lambda = 1/2)")
    ell = np.arange(L + 1)
    return spec.scale * spec.coefficients(L + 1) * 4.0 * math.pi / (2.0 * ell + 1.0)


def _kl_coefficients(sd, rng, block, count):
    """Standard deviations per degree -> coefficient block (count, (L+1)^2)."""
    L = sd.size - 1
    out = np.empty((count, (L + 1) ** 2))
    for ell in range(L + 1):
        z = rng.generator(block, ell).standard_normal((count, 2 * ell + 1))
        out[:, ell * ell:(ell + 1) ** 2] = sd[ell] * z
    return out


def _truncation_bound(spec, L, weight=1.0):
    return spec.scale * weight * spec.tail_sum(L + 1)


def sample_kl_sphere(spec, L, points, replicates, rng):
    """Truncated harmonic expansion ``sum_{ell <= L} a_{ell m} Y_{ell m}``.

    The output covariance is the Schoenberg series cut at L; the reported
    ``truncation_bound`` is ``c A_{L+1}``.
    """
    L = _check_L(L)
    pts = as_sphere_points(points, d=2)
    sd = np.sqrt(kl_variances(spec, L))
    ymat = real_sph_harm_matrix(L, pts)
    values = np.empty((int(replicates), pts.shape[0]))

    def work(block, start, count):
        coef = _kl_coefficients(sd, rng, block, count)
        values[start:start + count] = coef @ ymat.T

    _run_blocks(work, _blocks(replicates))
    return FieldSample(
        points=pts,
        values=values,
        seed=rng.seed,
        stream=rng.stream,
        truncation_L=L,
        method=Method.KL,
        truncation_bound=_truncation_bound(spec, L),
    )


def _toeplitz_factor(cf, times, cache):
    if cf not in cache:
        dt = times[:, None] - times[None, :]
        mat = cf(dt)
        cache[cf] = _factorize(mat, "auto", 1e-6)
    return cache[cf]


def sample_spacetime(model, L, points, times, replicates, rng):
    """Stationary space-time sampler whose covariance is the truncated Berg-Porcu form.

    Each coefficient ``a_{ell m}(t)`` is an independent stationary Gaussian
    series with autocorrelation ``phi_ell`` and variance ``v_ell c_ell^2``,
    drawn through a Cholesky factor of ``[phi_ell(t_i - t_j)]``.
    Values have shape ``(replicates, points, times)``.
    """
    if not isinstance(model, SpaceTimeCovarianceModel):
        raise DomainError("sample_spacetime needs a SpaceTimeCovarianceModel")
    L = _check_L(L)
    pts = as_sphere_points(points, d=2)
    t = np.asarray(times, dtype=float).ravel()
    if t.size == 0 or np.any(~np.isfinite(t)) or np.any(np.diff(t) <= 0.0):
        raise DomainError("times must be finite and strictly increasing")
    spec = model.spectrum
    var = kl_variances(spec, L) * model.weights(L + 1)
    sd = np.sqrt(var)
    cache = {}
    factors = []
    for ell in range(L + 1):
        try:
            factors.append(_toeplitz_factor(model.temporal_for(ell), t, cache))
        except NotPSDError as exc:
            raise NotPSDError(f"temporal covariance of degree {ell} is not factorizable: {exc}") from exc
    jitter = max(j for _, j in factors)
    ymat = real_sph_harm_matrix(L, pts)
    values = np.empty((int(replicates), pts.shape[0], t.size))

    def work(block, start, count):
        coef = np.empty((count, (L + 1) ** 2, t.size))
        for ell in range(L + 1):
            fac = factors[ell][0]
            z = rng.generator(block, ell).standard_normal((count, 2 * ell + 1, t.size))
            coef[:, ell * ell:(ell + 1) ** 2, :] = sd[ell] * (z @ fac.T)
        values[start:start + count] = np.einsum("rkt,pk->rpt", coef, ymat, optimize=True)

    _run_blocks(work, _blocks(replicates))
    return FieldSample(
        points=pts,
        values=values,
        seed=rng.seed,
        stream=rng.stream,
        truncation_L=L,
        method=Method.SPACETIME_KL,
        times=t,
        jitter_added=float(jitter),
        truncation_bound=_truncation_bound(spec, L, model.tail_weight(L + 1)),
    )


def _psd_factor(mat):
    """Cholesky factor, or a symmetric square root for singular PSD matrices."""
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        pass
    w, v = np.linalg.eigh(mat)
    if w[0] < -1e-8 * max(1.0, float(np.max(np.abs(np.diag(mat))))):
        raise NotPSDError(f"covariance has a negative eigenvalue {w[0]:.3g}")
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_cholesky(cov, replicates, rng):
    """Samples ``F z`` with ``F F^T = cov`` (plus its recorded jitter); any dimension."""
    if isinstance(cov, CovMatrix):
        mat = cov.matrix
        factor = cov.factor
        jitter = cov.jitter_added
        points, times, bound = cov.points, cov.times, cov.truncation_bound
    else:
        mat = np.asarray(cov, dtype=float)
        factor, jitter, points, times, bound = None, 0.0, None, None, 0.0
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DomainError("covariance must be a square matrix")
    if factor is None:
        factor = _psd_factor(mat + jitter * np.eye(mat.shape[0]))
    p = mat.shape[0]
    values = np.empty((int(replicates), p))

    def work(block, start, count):
        z = rng.generator(block, 0).standard_normal((count, p))
        values[start:start + count] = z @ factor.T

    _run_blocks(work, _blocks(replicates))
    if points is None:
        points = np.zeros((p, 0))
    return FieldSample(
        points=points,
        values=values,
        seed=rng.seed,
        stream=rng.stream,
        truncation_L=-1,
        method=Method.CHOLESKY,
        jitter_added=float(jitter),
        truncation_bound=float(bound),
    )


def verify_literal_expansion(model, x, y, s, t, L, replicates, rng):
    """Monte Carlo check of ``T(x,t) = sum a_{ell m} c_ell phi_ell(t) Y_{ell m}(x)``.

    Its covariance at ((x, s), (y, t)) is the product form
    ``c sum_ell a_ell c_ell^2 phi_ell(s) phi_ell(t) W_ell(<x, y>)``;
    ``stationary_value`` is the same sum with ``phi_ell(t - s)``.
    """
    if not isinstance(model, SpaceTimeCovarianceModel):
        raise DomainError("verify_literal_expansion needs a SpaceTimeCovarianceModel")
    L = _check_L(L)
    pts = as_sphere_points(np.vstack([x, y]), d=2)
    spec = model.spectrum
    sd = np.sqrt(kl_variances(spec, L))
    ymat = real_sph_harm_matrix(L, pts)
    ell_of = np.repeat(np.arange(L + 1), 2 * np.arange(L + 1) + 1)
    c = np.sqrt(model.weights(L + 1))
    phi_s = np.array([model.temporal_for(e)(s) for e in range(L + 1)])
    phi_t = np.array([model.temporal_for(e)(t) for e in range(L + 1)])
    gx = (c * phi_s)[ell_of] * ymat[0]
    gy = (c * phi_t)[ell_of] * ymat[1]
    prod = np.empty(int(replicates))

    def work(block, start, count):
        coef = _kl_coefficients(sd, rng, block, count)
        prod[start:start + count] = (coef @ gx) * (coef @ gy)

    _run_blocks(work, _blocks(replicates))
    emp = float(prod.mean())
    se = float(prod.std(ddof=1) / math.sqrt(prod.size)) if prod.size > 1 else math.inf
    w = gegenbauer_w_sequence(0.5, float(inner_product(pts[0], pts[1])), L)
    a = spec.scale * spec.coefficients(L + 1) * c**2
    phi_dt = np.array([model.temporal_for(e)(t - s) for e in range(L + 1)])
    formula = float(np.sum(a * phi_s * phi_t * w))
    stationary = float(np.sum(a * phi_dt * w))

    def z(ref):
        if se > 0:
            return (emp - ref) / se
        return 0.0 if emp == ref else math.inf

    return LiteralReport(
        empirical_cov=emp,
        formula_value=formula,
        stationary_value=stationary,
        standard_error=se,
        z_score=z(formula),
        stationary_z=z(stationary),
        product_differs=abs(formula - stationary) > 1e-9 * max(1.0, abs(formula)),
        replicates=int(replicates),
    )
