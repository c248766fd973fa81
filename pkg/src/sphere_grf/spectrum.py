"""Angular power spectra: an explicit head of coefficients plus an analytic tail.

A spectrum stores ``a_0..a_L`` explicitly and describes ``a_n`` for
``n > L`` by a tail law for the suffix sums ``A_n = sum_{k >= n} a_k``:

    POWER(gamma, k)   A_n = mass * f(n)/f(L+1),  f(n) = n^-gamma (log n)^-k
    LOG_ONLY(k)       A_n = mass * f(n)/f(L+1),  f(n) = (log n)^-k
    GEOMETRIC(r)      A_n = mass * r^(n-L-1)
    NONE              no mass beyond L

so ``mass`` is exactly ``A_{L+1}``.  Coefficients are never stored beyond
the head; ``coefficients(n)`` generates them on demand.

A fractional order ``sigma`` multiplies every tail coefficient by
``(1 + n(n + 2 lam))^sigma`` (see :func:`fractional_transform`).  Tail sums
of such tails have no closed form and are computed by Euler-Maclaurin
summation, accurate to roughly machine precision relative to the tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.integrate import quad

from .errors import DivergenceError, DomainError
from .specfun import (
    c_dim,
    check_lambda,
    dimension_from_lambda,
    lambda_from_dimension,
    sphere_area,
)

__all__ = [
    "TailKind",
    "TailDescriptor",
    "TailAsymptotics",
    "AngularPowerSpectrum",
    "VarianceSpectrum",
    "Summability",
    "normalize",
    "tail_sum",
    "variances_to_aps",
    "aps_to_variances",
    "fractional_multiplier",
    "fractional_transform",
    "summability_check",
]

_NORM_TOL = 1e-10
_EM_SWITCH = 256  # explicit summation window before Euler-Maclaurin
_GEOM_EPS = 1e-20


class TailKind(str, Enum):
    NONE = "NONE"
    POWER = "POWER"
    LOG_ONLY = "LOG_ONLY"
    GEOMETRIC = "GEOMETRIC"


@dataclass(frozen=True)
class TailDescriptor:
    kind: TailKind = TailKind.NONE
    gamma: float | None = None
    k: float = 0.0
    r: float | None = None
    mass: float = 0.0

    def __post_init__(self):
        kind = TailKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not (self.mass >= 0.0 and math.isfinite(self.mass)):
            raise DomainError(f"tail mass must be finite and nonnegative, got {self.mass}")
        if kind is TailKind.NONE:
            if self.mass != 0.0:
                raise DomainError("a NONE tail carries no mass")
        elif kind is TailKind.POWER:
            if self.gamma is None or not 0.0 < self.gamma < 2.0:
                raise DomainError(f"POWER tail needs gamma in (0, 2), got {self.gamma}")
        elif kind is TailKind.LOG_ONLY:
            if not self.k > 0.0:
                raise DomainError(f"LOG_ONLY tail needs k > 0, got {self.k}")
        elif kind is TailKind.GEOMETRIC:
            if self.r is None or not 0.0 < self.r < 1.0:
                raise DomainError(f"GEOMETRIC tail needs r in (0, 1), got {self.r}")

    def log_f(self, n):
        """log f(n) for the tail profile (vectorized, float n)."""
        n = np.asarray(n, dtype=float)
        if self.kind is TailKind.POWER:
            out = -self.gamma * np.log(n)
            if self.k:
                out = out - self.k * np.log(np.log(n))
            return out
        if self.kind is TailKind.LOG_ONLY:
            return -self.k * np.log(np.log(n))
        if self.kind is TailKind.GEOMETRIC:
            return n * math.log(self.r)
        raise DomainError("NONE tail has no profile")

    def min_start(self):
        if self.kind is TailKind.LOG_ONLY or (self.kind is TailKind.POWER and self.k):
            return 2
        if self.kind is TailKind.POWER:
            return 1
        return 0


@dataclass(frozen=True)
class TailAsymptotics:
    """Effective law ``A_n ~ amplitude * n^-gamma (log n)^-k`` (or geometric).

    Unlike :class:`TailDescriptor` the index is not restricted to (0, 2):
    fractional transforms can push it anywhere in (0, inf).
    """

    kind: TailKind
    gamma: float = 0.0
    k: float = 0.0
    amplitude: float = 0.0
    r: float | None = None


class Summability(str, Enum):
    CONVERGES = "CONVERGES"
    DIVERGES = "DIVERGES"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True, eq=False)
class AngularPowerSpectrum:
    """Mixing law ``(a_n)`` of a Schoenberg expansion ``C(x) = c sum a_n W_n(x)``.

    ``head`` holds a_0..a_L (L = len(head) - 1, head may be empty);
    ``tail`` continues the law beyond L; ``scale`` is the physical factor c;
    ``sigma`` is the fractional order already applied to the tail.
    """

    head: np.ndarray
    tail: TailDescriptor = field(default_factory=TailDescriptor)
    lam: float = 0.5
    scale: float = 1.0
    sigma: float = 0.0
    d: int | None = None

    def __post_init__(self):
        head = np.array(self.head, dtype=float).ravel()
        if np.any(~np.isfinite(head)) or np.any(head < 0.0):
            raise DomainError("spectrum coefficients must be finite and nonnegative")
        head.setflags(write=False)
        object.__setattr__(self, "head", head)
        lam = check_lambda(self.lam)
        object.__setattr__(self, "lam", lam)
        if self.d is None:
            object.__setattr__(self, "d", dimension_from_lambda(lam))
        elif lambda_from_dimension(self.d) != lam:
            raise DomainError(f"lam={lam} does not match dimension d={self.d}")
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise DomainError(f"scale must be positive and finite, got {self.scale}")
        if self.tail.kind is not TailKind.NONE and self.tail_start < self.tail.min_start():
            raise DomainError(
                f"{self.tail.kind.value} tail needs at least {self.tail.min_start()} head entries"
            )
        if self.sigma and math.isinf(lam):
            raise DomainError("fractional orders need a finite Gegenbauer index")
        if self.tail.kind is TailKind.POWER and self.tail.mass > 0 and self.tail.k < 0:
            # profile must be decreasing from the tail start onward
            if self.tail.gamma * math.log(self.tail_start) + self.tail.k <= 0.0:
                raise DomainError("POWER tail profile is not decreasing at its start; lengthen the head")
        asym = self.asymptotics
        if self.tail.mass > 0 and asym.kind is TailKind.POWER and asym.gamma <= 0.0:
            raise DivergenceError(f"tail index {asym.gamma} <= 0: total mass diverges")
        object.__setattr__(self, "_cache", {})

    # constructors -------------------------------------------------------

    @classmethod
    def finite(cls, head, lam=0.5, scale=1.0, d=None):
        return cls(head=head, lam=lam, scale=scale, d=d)

    @classmethod
    def power_law(cls, gamma, k=0.0, lam=0.5, start=None, scale=1.0):
        """Normalized spectrum with ``A_n = f(n)/f(start)`` for n >= start, a_n = 0 below."""
        if start is None:
            start = 2 if k else 1
        tail = TailDescriptor(TailKind.POWER, gamma=gamma, k=k, mass=1.0)
        return cls(head=np.zeros(start), tail=tail, lam=lam, scale=scale)

    @classmethod
    def log_only(cls, k, lam=0.5, start=2, scale=1.0):
        tail = TailDescriptor(TailKind.LOG_ONLY, k=k, mass=1.0)
        return cls(head=np.zeros(start), tail=tail, lam=lam, scale=scale)

    @classmethod
    def geometric(cls, r, lam=0.5, scale=1.0):
        """``a_n = (1 - r) r^n`` for n >= 0."""
        tail = TailDescriptor(TailKind.GEOMETRIC, r=r, mass=1.0)
        return cls(head=np.zeros(0), tail=tail, lam=lam, scale=scale)

    # structure -------------------------------------------------------

    @property
    def L(self):
        return self.head.size - 1

    @property
    def tail_start(self):
        return self.head.size

    @property
    def has_tail(self):
        return self.tail.kind is not TailKind.NONE and self.tail.mass > 0.0

    @property
    def asymptotics(self):
        t = self.tail
        if t.kind is TailKind.NONE or t.mass == 0.0:
            return TailAsymptotics(TailKind.NONE)
        if t.kind is TailKind.GEOMETRIC:
            return TailAsymptotics(TailKind.GEOMETRIC, r=t.r, amplitude=t.mass / t.r**self.tail_start)
        amp = t.mass / math.exp(float(t.log_f(self.tail_start)))
        gamma = t.gamma if t.kind is TailKind.POWER else 0.0
        k = t.k
        s2 = 2.0 * self.sigma
        if s2 == 0.0:
            return TailAsymptotics(t.kind, gamma=gamma, k=k, amplitude=amp)
        # a_n ~ amp (gamma n^-gamma-1 (log n)^-k + k n^-gamma-1 (log n)^-k-1) * n^{2 sigma}
        if t.kind is TailKind.POWER:
            g2 = gamma - s2
            amp2 = amp * gamma / g2 if g2 > 0.0 else math.inf
            return TailAsymptotics(TailKind.POWER, gamma=g2, k=k, amplitude=amp2)
        if s2 >= 0.0:
            return TailAsymptotics(TailKind.POWER, gamma=-s2, k=k + 1.0, amplitude=math.inf)
        return TailAsymptotics(TailKind.POWER, gamma=-s2, k=k + 1.0, amplitude=amp * k / (-s2))

    # coefficients ------------------------------------------------------

    def _log_tail_coeffs_t(self, t):
        """log a_n at t = log n for POWER/LOG_ONLY tails, overflow-free for any n."""
        tl = self.tail
        t = np.asarray(t, dtype=float)
        g = tl.gamma if tl.kind is TailKind.POWER else 0.0
        k = tl.k
        l1 = np.log1p(np.exp(-t))  # log(1 + 1/n)
        lf = -g * t
        dl = -g * l1
        if k:
            lf = lf - k * np.log(t)
            dl = dl - k * np.log1p(l1 / t)
        with np.errstate(divide="ignore"):
            out = math.log(tl.mass) - float(tl.log_f(self.tail_start)) + lf + np.log(-np.expm1(dl))
        if self.sigma:
            e = np.exp(-t)
            out = out + self.sigma * (2.0 * t + np.log1p(e * (2.0 * self.lam + e)))
        return out

    def _tail_coeffs(self, n):
        """Tail coefficients at (float) degrees n >= tail_start; also used off-integer."""
        t = self.tail
        n = np.asarray(n, dtype=float)
        if not self.has_tail:
            return np.zeros_like(n)
        if t.kind is TailKind.GEOMETRIC:
            base = t.mass * (1.0 - t.r) * np.exp((n - self.tail_start) * math.log(t.r))
            if self.sigma:
                base = base * (1.0 + n * (n + 2.0 * self.lam)) ** self.sigma
            return base
        return np.exp(self._log_tail_coeffs_t(np.log(n)))

    def coefficients(self, n_stop):
        """Array ``a_0 .. a_{n_stop-1}``."""
        n_stop = int(n_stop)
        out = np.zeros(n_stop)
        h = min(n_stop, self.head.size)
        out[:h] = self.head[:h]
        if n_stop > self.head.size and self.has_tail:
            out[self.head.size:] = self._tail_coeffs(np.arange(self.head.size, n_stop, dtype=float))
        return out

    def coefficient(self, n):
        n = int(n)
        if n < 0:
            raise DomainError("degree must be nonnegative")
        if n < self.head.size:
            return float(self.head[n])
        return float(self._tail_coeffs(np.array([float(n)]))[0])

    # suffix sums ------------------------------------------------------

    def _closed_tail_sum(self, n):
        t = self.tail
        n = np.asarray(n, dtype=float)
        lf0 = float(t.log_f(self.tail_start))
        return t.mass * np.exp(t.log_f(n) - lf0)

    def _numeric_tail_sum(self, n):
        """Suffix sum of a fractionally transformed tail, n >= tail_start."""
        n = int(n)
        cache = self._cache.setdefault("numeric_tail", {})
        if n in cache:
            return cache[n]
        t = self.tail
        if t.kind is TailKind.GEOMETRIC:
            total = 0.0
            m = n
            while True:
                block = self._tail_coeffs(np.arange(m, m + 4096, dtype=float))
                total += float(np.sum(block[::-1]))
                m += 4096
                if block[-1] <= _GEOM_EPS * total or block[-1] == 0.0:
                    break
            cache[n] = total
            return total
        m = max(n, self.tail_start + _EM_SWITCH)
        explicit = float(np.sum(self._tail_coeffs(np.arange(n, m, dtype=float))[::-1])) if m > n else 0.0
        cache[n] = explicit + self._euler_maclaurin(m)
        return cache[n]

    def _euler_maclaurin(self, m):
        """sum_{k >= m} a(k) ~ int_m^inf a + a(m)/2 - a'(m)/12 + a'''(m)/720."""
        lm = math.log(m)

        def integrand(u):
            return math.exp(float(self._log_tail_coeffs_t(lm + u)) + lm + u)

        integral, _ = quad(integrand, 0.0, math.inf, limit=400, epsabs=0.0, epsrel=1e-13)
        h = 0.5
        pts = self._tail_coeffs(np.array([m - 2 * h, m - h, m, m + h, m + 2 * h], dtype=float))
        d1 = (pts[3] - pts[1]) / (2 * h)
        d3 = (pts[4] - 2 * pts[3] + 2 * pts[1] - pts[0]) / (2 * h**3)
        return integral + 0.5 * pts[2] - d1 / 12.0 + d3 / 720.0

    def tail_sum(self, n):
        """``A_n = sum_{k >= n} a_k``."""
        n = int(n)
        if n < 0:
            raise DomainError("tail_sum needs n >= 0")
        if n >= self.tail_start:
            if not self.has_tail:
                return 0.0
            if self.sigma:
                return self._numeric_tail_sum(n)
            return float(self._closed_tail_sum(n))
        return float(np.sum(self.head[n:][::-1])) + self.tail_sum(self.tail_start)

    def tail_sums(self, n_stop):
        """Array ``A_0 .. A_{n_stop}`` (length n_stop + 1)."""
        n_stop = int(n_stop)
        out = np.empty(n_stop + 1)
        if self.has_tail and not self.sigma and n_stop >= self.tail_start:
            out[self.tail_start:] = self._closed_tail_sum(np.arange(self.tail_start, n_stop + 1, dtype=float))
            stop = self.tail_start
        else:
            out[n_stop] = self.tail_sum(n_stop)
            stop = n_stop
        if stop > 0:
            a = self.coefficients(stop)
            out[:stop] = out[stop] + np.cumsum(a[::-1])[::-1]
        return out

    @property
    def total_mass(self):
        cache = self._cache
        if "total" not in cache:
            cache["total"] = self.tail_sum(0)
        return cache["total"]

    @property
    def is_normalized(self):
        return abs(self.total_mass - 1.0) <= _NORM_TOL

    def require_normalized(self):
        if not self.is_normalized:
            raise DomainError(f"spectrum is not normalized (total mass {self.total_mass!r})")

    def tail_bound_grid(self, n_cap):
        """Candidate truncation degrees N and the matching A_{N+1}.

        Every degree up to L + 64, then geometric steps of 2%, up to n_cap.
        Cached per spectrum; used to choose certified truncations.
        """
        key = ("grid", int(n_cap))
        if key not in self._cache:
            base = max(self.L, 0)
            dense = np.arange(0, min(base + 64, n_cap) + 1)
            geo = []
            x = float(dense[-1])
            while x < n_cap:
                x = min(math.ceil(x * 1.02) + 1, n_cap)
                geo.append(x)
            ns = np.unique(np.concatenate([dense, np.asarray(geo, dtype=np.int64)])).astype(np.int64)
            if self.has_tail and not self.sigma:
                a_next = np.empty(ns.size)
                in_tail = ns + 1 >= self.tail_start
                a_next[in_tail] = self._closed_tail_sum((ns[in_tail] + 1).astype(float))
                a_next[~in_tail] = [self.tail_sum(int(n) + 1) for n in ns[~in_tail]]
            else:
                a_next = np.array([self.tail_sum(int(n) + 1) for n in ns])
            self._cache[key] = (ns, np.maximum(a_next, 0.0))
        return self._cache[key]


@dataclass(frozen=True, eq=False)
class VarianceSpectrum:
    """Per-degree variances v_ell of the random Fourier coefficients a_{ell m}."""

    v: np.ndarray
    d: int = 2

    def __post_init__(self):
        v = np.array(self.v, dtype=float).ravel()
        if np.any(~np.isfinite(v)) or np.any(v < 0.0):
            raise DomainError("variances must be finite and nonnegative")
        lambda_from_dimension(self.d)
        v.setflags(write=False)
        object.__setattr__(self, "v", v)


def normalize(raw):
    """Scale a spectrum to unit total mass; ``scale`` is left unchanged."""
    total = raw.total_mass
    if not (total > 0.0 and math.isfinite(total)):
        raise DivergenceError(f"cannot normalize a spectrum with total mass {total}")
    tail = raw.tail
    if raw.has_tail:
        tail = replace(tail, mass=tail.mass / total)
    return replace(raw, head=raw.head / total, tail=tail)


def tail_sum(spec, n):
    return spec.tail_sum(n)


def _degree_counts(d, n):
    return np.array([c_dim(ell, d) for ell in range(n)], dtype=float)


def variances_to_aps(vs):
    """``a_ell = v_ell c(ell, d) / |S^d|`` with ``scale = 1``; no normalization."""
    d = vs.d
    a = vs.v * _degree_counts(d, vs.v.size) / sphere_area(d)
    return AngularPowerSpectrum(head=a, lam=lambda_from_dimension(d), d=d)


def aps_to_variances(spec, n_stop=None):
    """Inverse of :func:`variances_to_aps`, including the physical scale c.

    Head-only unless ``n_stop`` asks for tail degrees too.
    """
    if spec.d is None:
        raise DomainError(f"lam={spec.lam} is not (d-1)/2 for an integer dimension d")
    n = spec.head.size if n_stop is None else int(n_stop)
    a = spec.coefficients(n)
    v = spec.scale * a * sphere_area(spec.d) / _degree_counts(spec.d, n)
    return VarianceSpectrum(v=v, d=spec.d)


def fractional_multiplier(ell, lam, sigma):
    """Field-level multiplier ``(1 + ell(ell + 2 lam))^(sigma/2)`` of (1 - Laplacian)^(sigma/2)."""
    ell = np.asarray(ell, dtype=float)
    return (1.0 + ell * (ell + 2.0 * lam)) ** (0.5 * sigma)


def fractional_transform(spec, sigma, renormalize=False):
    """Apply ``(1 - Laplacian)^(sigma/2)`` to the field.

    Spectrum coefficients pick up the squared multiplier,
    ``a_ell -> a_ell (1 + ell(ell + 2 lam))^sigma``; the tail keeps its base
    law and accumulates ``sigma``, so the transform composes exactly.
    Raises DivergenceError when the transformed total mass is infinite.
    """
    if math.isinf(spec.lam):
        raise DomainError("fractional transforms need a finite Gegenbauer index")
    sigma = float(sigma)
    ell = np.arange(spec.head.size, dtype=float)
    head = spec.head * fractional_multiplier(ell, spec.lam, sigma) ** 2
    out = replace(spec, head=head, sigma=spec.sigma + sigma)
    if out.has_tail:
        asym = out.asymptotics
        if asym.kind is TailKind.POWER and not asym.gamma > 0.0:
            raise DivergenceError(f"transformed tail index {asym.gamma:g} <= 0: mass diverges")
    return normalize(out) if renormalize else out


_TIE = 1e-12


def summability_check(spec, gamma):
    """Decide ``sum a_n n^gamma < inf`` from the analytic tail law."""
    if not gamma > 0.0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    asym = spec.asymptotics
    if asym.kind in (TailKind.NONE, TailKind.GEOMETRIC):
        return Summability.CONVERGES
    if asym.kind is TailKind.LOG_ONLY:
        return Summability.DIVERGES
    if gamma == asym.gamma:
        return Summability.CONVERGES if asym.k > 1.0 else Summability.DIVERGES
    if abs(gamma - asym.gamma) <= _TIE * max(1.0, asym.gamma):
        return Summability.UNDECIDED
    return Summability.CONVERGES if gamma < asym.gamma else Summability.DIVERGES
