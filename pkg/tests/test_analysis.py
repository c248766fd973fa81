import math

import mpmath as mp
import numpy as np
import pytest

from sphere_grf import analysis as an
from sphere_grf import cli
from sphere_grf.covariance import cov_matrix
from sphere_grf.errors import DomainError
from sphere_grf.sampler import FieldSample, Method, RngSpec, sample_cholesky
from sphere_grf.specfun import JacobiPair
from sphere_grf.spectrum import AngularPowerSpectrum, normalize

INF = math.inf
mp.mp.dps = 20


def bessel_constant(lam, gamma):
    """gamma * int_0^inf z^(-gamma-1) (1 - Lambda(z)) dz with the Mehler-Heine limit Lambda."""
    a = lam - 0.5
    lam_ = lambda z: mp.gamma(a + 1) * (z / 2) ** (-a) * mp.besselj(a, z)  # noqa: E731

    def one_minus(z):
        if z < 1:
            # 1 - 0F1(; a+1; -z^2/4) without its constant term, free of cancellation
            q = -z * z / 4
            return -mp.fsum(q**k / (mp.factorial(k) * mp.rf(a + 1, k)) for k in range(1, 40))
        return 1 - lam_(z)

    head = mp.quad(lambda z: z ** (-gamma - 1) * one_minus(z), [0, 1, 5, 10])
    smooth = mp.mpf(10) ** (-gamma) / gamma
    osc = mp.quadosc(lambda z: z ** (-gamma - 1) * lam_(z), [10, mp.inf], period=2 * mp.pi)
    return float(gamma * (head + smooth - osc))


@pytest.mark.parametrize("lam,gamma", [(0.5, 1.0), (1.5, 1.0), (1.0, 0.5), (2.0, 1.5), (0.5, 0.3)])
def test_malyarenko_constant_against_bessel_integral(lam, gamma):
    assert an.malyarenko_constant(lam, gamma) == pytest.approx(bessel_constant(lam, gamma), rel=1e-9)


def test_malyarenko_constant_frozen_values():
    assert an.malyarenko_constant(0.5, 1.0) == pytest.approx(1.0, rel=1e-14)
    assert an.malyarenko_constant(1.5, 1.0) == pytest.approx(2.0 / 3.0, rel=1e-14)
    assert an.malyarenko_constant(3.0, 0.0) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        an.malyarenko_constant(0.5, 2.0)
    with pytest.raises(DomainError):
        an.malyarenko_constant(INF, 1.0)


@pytest.mark.parametrize("lam,gamma", [(0.5, 1.0), (1.5, 1.0), (1.0, 0.5)])
def test_malyarenko_ratio_approaches_one(lam, gamma):
    rs = an.malyarenko_ratio(AngularPowerSpectrum.power_law(gamma, lam=lam), (1e-1, 1e-2, 1e-3))
    assert rs.approaches_one()
    assert abs(rs.ratios[-1] - 1.0) < 0.05
    assert all(b <= 0.01 * p for b, p in zip(rs.bounds, rs.predicted))


def test_malyarenko_ratio_star_method():
    spec = AngularPowerSpectrum.power_law(1.0, lam=1.0)
    d = an.malyarenko_ratio(spec, (1e-2,), rel_tol=1e-4)
    s = an.malyarenko_ratio(spec, (1e-2,), rel_tol=1e-4, method="STAR")
    assert d.ratios[0] == pytest.approx(s.ratios[0], rel=3e-4)


def test_malyarenko_ratio_validation():
    with pytest.raises(DomainError):
        an.malyarenko_ratio(AngularPowerSpectrum.power_law(1.0), (0.5,))
    with pytest.raises(DomainError):
        an.malyarenko_ratio(AngularPowerSpectrum.geometric(0.5), (0.01,))


def test_hilbert_constant_and_ratio():
    assert an.hilbert_constant(0.5) == pytest.approx(math.sqrt(math.pi / 2))
    spec = AngularPowerSpectrum.power_law(0.5, lam=INF)
    rs = an.hilbert_ratio(spec, (3e-1, 1e-1, 1e-2))
    assert rs.approaches_one()
    assert abs(rs.ratios[-1] - 1.0) < 0.05
    # closed form for a geometric law: 1 - (1-r)/(1 - r cos v)
    geo = AngularPowerSpectrum.geometric(0.5, lam=INF)
    v = 0.01
    ref = 0.5 * (1 - math.cos(v)) / (1 - 0.5 * math.cos(v))
    assert an.hilbert_incremental(geo, v) == pytest.approx(ref, rel=1e-9)


def test_ratio_series_validation():
    with pytest.raises(DomainError):
        an.RatioSeries(v=(0.01, 0.1), ratios=(1.0, 1.0))
    rs = an.RatioSeries(v=(0.1, 0.01), ratios=(0.9, 1.05))
    assert rs.approaches_one()
    assert rs.to_rows() == [(0.1, 0.9), (0.01, 1.05)]


@pytest.mark.parametrize("a,b", [(0.0, 0.0), (0.5, -0.5), (2.0, 1.0)])
def test_jacobi_difference_identity(a, b):
    jp = JacobiPair(a, b)
    for n in range(0, 60, 7):
        for th in (0.05, 1.0, 3.0):
            assert an.jacobi_difference_check(n, jp, th) < 1e-12


def test_dudley_special_cases():
    const = an.dudley_classify(AngularPowerSpectrum.finite([1.0]))
    assert const.decision is an.Continuity.CONTINUOUS and const.agree
    hil = an.dudley_classify(AngularPowerSpectrum.power_law(0.5, lam=INF))
    assert hil.analytic is an.Continuity.DISCONTINUOUS
    # the octave diagnostic sees a Hoelder-type I(v) and disagrees; that is reported, not hidden
    assert hil.agree == (hil.numeric is hil.analytic)
    log1 = an.dudley_classify(AngularPowerSpectrum.log_only(1.0))
    assert log1.value is None
    assert log1.exponent < 1.05


def test_integrability_check():
    spec = AngularPowerSpectrum.power_law(1.5)
    fin = an.integrability_check(spec, 1.0)
    assert fin.status is an.Finiteness.FINITE and fin.agree
    div = an.integrability_check(spec, 1.6)
    assert div.status is an.Finiteness.DIVERGENT and div.agree
    assert div.tail_ratio >= 1.0 > fin.tail_ratio
    const = an.integrability_check(AngularPowerSpectrum.finite([1.0]), 1.0)
    assert const.value == 0.0


def test_langschwab_gamma_sup():
    assert an.langschwab_gamma_sup(AngularPowerSpectrum.power_law(1.3)) == 1.3
    assert an.langschwab_gamma_sup(AngularPowerSpectrum.log_only(2.0)) == 0.0
    assert an.langschwab_gamma_sup(AngularPowerSpectrum.geometric(0.4)) == INF


def test_moment_bound_check_second_moment():
    spec = AngularPowerSpectrum.power_law(1.0)
    north = np.array([0.0, 0.0, 1.0])
    pairs = [(north, np.array([math.sin(v), 0.0, math.cos(v)])) for v in (0.05, 0.5)]
    rep = an.moment_bound_check(spec, 1, pairs, 20000, RngSpec(4))
    assert rep.gamma == 1.0
    assert all(abs(z) < 4.0 for z in rep.z_scores)
    assert rep.max_ratio == max(rep.ratios)
    with pytest.raises(DomainError):
        an.moment_bound_check(spec, 0, pairs, 10, RngSpec(0))


def test_variogram_holder_on_circle():
    spec = AngularPowerSpectrum.power_law(1.0)
    pts = cli.parse_points("greatcircle:128")
    fs = sample_cholesky(cov_matrix(spec, pts, tol=1e-7), 3000, RngSpec(2))
    vg = an.variogram_holder(fs)
    assert 0.8 < vg.gamma_hat < 1.2
    assert vg.holder_bound == pytest.approx(vg.gamma_hat / 2)
    assert len(vg.lags) == 10


def test_variogram_holder_degenerate_and_invalid():
    pts = cli.parse_points("greatcircle:32")
    flat = FieldSample(points=pts, values=np.ones((5, 32)), seed=0, stream=0, truncation_L=0, method=Method.KL)
    vg = an.variogram_holder(flat)
    assert vg.degenerate and math.isnan(vg.gamma_hat)
    noisy = FieldSample(points=pts, values=np.random.default_rng(0).standard_normal((5, 32)),
                        seed=0, stream=0, truncation_L=0, method=Method.KL)
    with pytest.raises(DomainError):
        an.variogram_holder(noisy, bins=[1, 2, 3])
    scattered = np.random.default_rng(1).standard_normal((10, 3))
    scattered /= np.linalg.norm(scattered, axis=1, keepdims=True)
    bad = FieldSample(points=scattered, values=np.zeros((2, 10)), seed=0, stream=0, truncation_L=0, method=Method.KL)
    with pytest.raises(DomainError):
        an.variogram_holder(bad)


def test_regularity_report():
    rep = an.regularity_report(AngularPowerSpectrum.power_law(1.0))
    assert rep.dudley is an.Continuity.CONTINUOUS
    assert 0.9 < rep.gamma_hat < 1.05
    assert rep.langschwab_gamma_sup == 1.0 and rep.holder_bound == 0.5
    assert not rep.gamma_hat_flagged
    smooth = an.regularity_report(normalize(AngularPowerSpectrum.finite([0.5, 0.3, 0.2])))
    assert smooth.gamma_hat == pytest.approx(2.0, abs=0.01)
    rough = an.regularity_report(AngularPowerSpectrum.log_only(1.0))
    assert rough.dudley_numeric == "DIVERGENT"
