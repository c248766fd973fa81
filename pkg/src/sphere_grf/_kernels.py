"""Compiled inner loops for polynomial recurrences and series sums.

All kernels are single-threaded and deterministic. ``lam`` may be ``inf``,
in which case W_n(x) = x**n.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def w_sequence(lam, x, n_max):
    out = np.empty(n_max + 1)
    out[0] = 1.0
    if n_max == 0:
        return out
    if x == 1.0:
        out[:] = 1.0
        return out
    out[1] = x
    if math.isinf(lam):
        for n in range(1, n_max):
            out[n + 1] = x * out[n]
        return out
    for n in range(1, n_max):
        out[n + 1] = (2.0 * (n + lam) * x * out[n] - n * out[n - 1]) / (n + 2.0 * lam)
    return out


@njit(cache=True)
def r_sequence(alpha, beta, x, n_max):
    """R_n^{(alpha, beta)}(x) = P_n(x) / P_n(1) for n = 0..n_max."""
    out = np.empty(n_max + 1)
    out[0] = 1.0
    if n_max == 0:
        return out
    if x == 1.0:
        out[:] = 1.0
        return out
    s = alpha + beta
    out[1] = 1.0 + (s + 2.0) * (x - 1.0) / (2.0 * (alpha + 1.0))
    d2 = alpha * alpha - beta * beta
    for n in range(1, n_max):
        m = 2.0 * n + s
        num = (m + 1.0) * ((m + 2.0) * m * x + d2) * out[n] - 2.0 * n * (n + beta) * (m + 2.0) * out[n - 1]
        out[n + 1] = num / (2.0 * (n + s + 1.0) * m * (n + alpha + 1.0))
    return out


@njit(cache=True)
def w_series(coef, lam, xs, nmax):
    """sum_{n <= nmax[j]} coef[n] W_n(xs[j]) for every j.

    ``nmax`` must be sorted in decreasing order so the active range shrinks.
    """
    m = xs.size
    out = np.zeros(m)
    wprev = np.ones(m)
    wcur = xs.copy()
    top = 0
    for j in range(m):
        out[j] = coef[0]
        if nmax[j] >= 1:
            out[j] += coef[1] * xs[j]
        if nmax[j] > top:
            top = nmax[j]
    inf_lam = math.isinf(lam)
    active = m
    for n in range(1, top):
        while active > 0 and nmax[active - 1] < n + 1:
            active -= 1
        if inf_lam:
            for j in range(active):
                wcur[j] = xs[j] * wcur[j]
                out[j] += coef[n + 1] * wcur[j]
        else:
            c1 = 2.0 * (n + lam)
            inv = 1.0 / (n + 2.0 * lam)
            for j in range(active):
                wn = (c1 * xs[j] * wcur[j] - n * wprev[j]) * inv
                wprev[j] = wcur[j]
                wcur[j] = wn
                out[j] += coef[n + 1] * wn
    return out


@njit(cache=True)
def w_series_classed(coef, cls, phi, lam, xs, nmax):
    """sum_{n <= nmax[j]} coef[n] * phi[j, cls[n]] * W_n(xs[j]).

    ``nmax`` must be sorted in decreasing order.

    ``phi`` holds temporal characteristic-function values per evaluation
    point and class; ``cls`` maps each degree to its class.
    """
    m = xs.size
    out = np.zeros(m)
    wprev = np.ones(m)
    wcur = xs.copy()
    top = 0
    for j in range(m):
        out[j] = coef[0] * phi[j, cls[0]]
        if nmax[j] >= 1:
            out[j] += coef[1] * phi[j, cls[1]] * xs[j]
        if nmax[j] > top:
            top = nmax[j]
    inf_lam = math.isinf(lam)
    active = m
    for n in range(1, top):
        while active > 0 and nmax[active - 1] < n + 1:
            active -= 1
        k = cls[n + 1]
        if inf_lam:
            for j in range(active):
                wcur[j] = xs[j] * wcur[j]
                out[j] += coef[n + 1] * phi[j, k] * wcur[j]
        else:
            c1 = 2.0 * (n + lam)
            inv = 1.0 / (n + 2.0 * lam)
            for j in range(active):
                wn = (c1 * xs[j] * wcur[j] - n * wprev[j]) * inv
                wprev[j] = wcur[j]
                wcur[j] = wn
                out[j] += coef[n + 1] * phi[j, k] * wn
    return out


@njit(cache=True)
def incvar_direct(a, lam, vs, nmax):
    """sum_{n <= nmax[j]} a[n] (1 - W_n(cos vs[j])); ``nmax`` sorted decreasing.

    Finite lam uses a recurrence for D_n = 1 - W_n driven by
    1 - cos v = 2 sin^2(v/2), which keeps full relative accuracy for
    small angles.
    """
    m = vs.size
    out = np.zeros(m)
    xs = np.cos(vs)
    om = np.empty(m)
    for j in range(m):
        s = math.sin(0.5 * vs[j])
        om[j] = 2.0 * s * s
    top = 0
    for j in range(m):
        if nmax[j] > top:
            top = nmax[j]
    if math.isinf(lam):
        for j in range(m):
            lx = math.log1p(-om[j]) if om[j] < 1.0 else -np.inf
            acc = 0.0
            if om[j] == 2.0:
                for n in range(1, nmax[j] + 1):
                    acc += a[n] * (2.0 if n % 2 == 1 else 0.0)
            elif om[j] == 1.0:
                for n in range(1, nmax[j] + 1):
                    acc += a[n]
            elif om[j] > 1.0:
                for n in range(1, nmax[j] + 1):
                    acc += a[n] * (1.0 - xs[j] ** n)
            else:
                for n in range(1, nmax[j] + 1):
                    acc += a[n] * -math.expm1(n * lx)
            out[j] = acc
        return out
    dprev = np.zeros(m)
    dcur = om.copy()
    for j in range(m):
        if nmax[j] >= 1:
            out[j] = a[1] * om[j]
    active = m
    for n in range(1, top):
        while active > 0 and nmax[active - 1] < n + 1:
            active -= 1
        c1 = 2.0 * (n + lam)
        inv = 1.0 / (n + 2.0 * lam)
        for j in range(active):
            dn = (c1 * om[j] + c1 * xs[j] * dcur[j] - n * dprev[j]) * inv
            dprev[j] = dcur[j]
            dcur[j] = dn
            out[j] += a[n + 1] * dn
    return out


@njit(cache=True)
def incvar_star(a_shift, alpha1, beta, vs, nmax):
    """Jacobi partial-summation sums at each angle.

    Returns two arrays: sum_{n < nmax} a_shift[n] (n + alpha1) R_n(cos v)
    and sum_{n < nmax} (n + alpha1) R_n(cos v), where R_n uses the pair
    (alpha1, beta) and a_shift[n] = A_{n+1}.
    """
    m = vs.size
    s1 = np.zeros(m)
    s2 = np.zeros(m)
    for j in range(m):
        x = math.cos(vs[j])
        s = alpha1 + beta
        d2 = alpha1 * alpha1 - beta * beta
        rprev = 1.0
        acc1 = 0.0
        acc2 = 0.0
        if nmax[j] >= 1:
            acc1 = a_shift[0] * alpha1
            acc2 = alpha1
        if nmax[j] >= 2:
            if x == 1.0:
                rcur = 1.0
            else:
                rcur = 1.0 + (s + 2.0) * (x - 1.0) / (2.0 * (alpha1 + 1.0))
            acc1 += a_shift[1] * (1.0 + alpha1) * rcur
            acc2 += (1.0 + alpha1) * rcur
            for n in range(1, nmax[j] - 1):
                mm = 2.0 * n + s
                if x == 1.0:
                    rn = 1.0
                else:
                    num = (mm + 1.0) * ((mm + 2.0) * mm * x + d2) * rcur - 2.0 * n * (n + beta) * (mm + 2.0) * rprev
                    rn = num / (2.0 * (n + s + 1.0) * mm * (n + alpha1 + 1.0))
                rprev = rcur
                rcur = rn
                w = n + 1.0 + alpha1
                acc1 += a_shift[n + 1] * w * rn
                acc2 += w * rn
        s1[j] = acc1
        s2[j] = acc2
    return s1, s2
