import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from sphere_grf import covariance as cv
from sphere_grf.covariance import SpaceTimeCovarianceModel, TemporalCF, TemporalKind
from sphere_grf.errors import DomainError, NotPSDError, TruncationError
from sphere_grf.sampler import RngSpec, sample_cholesky
from sphere_grf.specfun import gegenbauer_w_sequence
from sphere_grf.spectrum import AngularPowerSpectrum

INF = math.inf


def legendre_generating(r, x):
    return 1.0 / math.sqrt(1.0 - 2.0 * r * x + r * r)


def inv_n_oracle(x):
    """sum_{n>=1} P_n(x) / (n (n+1)) from the Legendre generating function."""
    g = lambda t: legendre_generating(t, x) - 1.0  # noqa: E731
    i1 = integrate.quad(lambda t: g(t) / t, 0.0, 1.0, limit=200, epsabs=1e-15, epsrel=1e-13)[0]
    i2 = integrate.quad(g, 0.0, 1.0, limit=200, epsabs=1e-15, epsrel=1e-13)[0]
    return i1 - i2


@pytest.mark.parametrize("x", [-0.9, -0.2, 0.0, 0.3, 0.8, 0.99])
def test_schoenberg_inv_n_against_generating_function(x):
    spec = AngularPowerSpectrum.power_law(1.0)
    s = cv.schoenberg_series(spec, x, tol=1e-10)
    ref = inv_n_oracle(x)
    assert abs(s.value - ref) <= s.bound + 1e-12
    assert s.bound <= 1e-10


@pytest.mark.parametrize("r", [0.3, 0.7, 0.95])
@pytest.mark.parametrize("x", [-1.0, -0.4, 0.5, 0.999])
def test_schoenberg_geometric_closed_form(r, x):
    spec = AngularPowerSpectrum.geometric(r, scale=2.5)
    ref = 2.5 * (1 - r) * legendre_generating(r, x)
    assert cv.schoenberg_cov(spec, x, tol=1e-13) == pytest.approx(ref, rel=1e-12)


def test_schoenberg_hilbert_sphere_closed_form():
    spec = AngularPowerSpectrum.geometric(0.6, lam=INF)
    xs = np.array([-0.7, 0.0, 0.5, 0.95])
    np.testing.assert_allclose(cv.schoenberg_cov(spec, xs, tol=1e-15), 0.4 / (1 - 0.6 * xs), rtol=1e-12)


def test_schoenberg_at_one_is_scale_exactly():
    for spec in (AngularPowerSpectrum.log_only(1.0, scale=3.0), AngularPowerSpectrum.power_law(0.2, lam=2.0)):
        s = cv.schoenberg_series(spec, 1.0, tol=1e-14)
        assert s.value == spec.scale
        assert s.bound == 0.0


@given(st.floats(-0.95, 0.95), st.sampled_from([0.5, 1.0, 1.5, 3.0]), st.floats(0.8, 1.9))
def test_certified_bound_holds(x, lam, gamma):
    spec = AngularPowerSpectrum.power_law(gamma, lam=lam)
    coarse = cv.schoenberg_series(spec, x, tol=1e-4)
    fine = cv.schoenberg_series(spec, x, tol=1e-9)
    assert abs(coarse.value - fine.value) <= coarse.bound + fine.bound + 1e-14
    assert coarse.n_terms <= fine.n_terms


def test_finite_spectrum_matches_direct_sum():
    head = np.array([0.1, 0.2, 0.3, 0.4])
    for lam in (0.5, 2.0):
        spec = AngularPowerSpectrum.finite(head, lam=lam)
        for x in (-0.5, 0.2, 0.9):
            ref = float(np.dot(head, gegenbauer_w_sequence(lam, x, 3)))
            s = cv.schoenberg_series(spec, x)
            assert s.value == pytest.approx(ref, rel=1e-14)
            assert s.bound == 0.0


def test_vectorized_schoenberg():
    spec = AngularPowerSpectrum.power_law(1.0)
    xs = np.array([[0.1, 0.2], [0.3, 1.0]])
    out = cv.schoenberg_cov(spec, xs)
    assert out.shape == (2, 2)
    assert out[0, 1] == pytest.approx(cv.schoenberg_cov(spec, 0.2))
    with pytest.raises(DomainError):
        cv.schoenberg_cov(spec, 1.5)


def test_unnormalized_spectrum_rejected():
    with pytest.raises(DomainError):
        cv.schoenberg_cov(AngularPowerSpectrum.finite([1.0, 1.0]), 0.3)


def test_truncation_error_reports_budget():
    spec = AngularPowerSpectrum.log_only(1.0)
    with pytest.raises(TruncationError) as exc:
        cv.schoenberg_series(spec, 0.0, tol=1e-12)
    assert exc.value.achieved_bound > 1e-12


def geometric_incvar(r, v):
    q = 4.0 * r * math.sin(0.5 * v) ** 2 / (1.0 - r) ** 2
    return -math.expm1(-0.5 * math.log1p(q))


@pytest.mark.parametrize("v", [1e-6, 1e-3, 0.2, 2.0, math.pi])
@pytest.mark.parametrize("method", ["DIRECT", "STAR"])
def test_incremental_variance_geometric_relative_accuracy(v, method):
    spec = AngularPowerSpectrum.geometric(0.5, scale=7.0)
    ref = geometric_incvar(0.5, v)
    s = cv.incremental_variance_series(spec, v, tol=1e-6 * ref, method=method)
    assert s.value == pytest.approx(ref, rel=2e-6)


def test_incremental_variance_inv_n():
    spec = AngularPowerSpectrum.power_law(1.0)
    for v in (0.05, 0.7, 2.5):
        ref = 1.0 - inv_n_oracle(math.cos(v))
        d = cv.incremental_variance_series(spec, v, 1e-9)
        s = cv.incremental_variance_series(spec, v, 1e-9, "STAR")
        assert abs(d.value - ref) <= d.bound + 1e-12
        assert abs(s.value - ref) <= s.bound + 1e-12


@given(st.floats(1e-4, math.pi), st.sampled_from([0.5, 1.0, 2.0]))
def test_star_and_direct_agree(v, lam):
    spec = AngularPowerSpectrum.power_law(1.3, lam=lam)
    d = cv.incremental_variance_series(spec, v, 1e-8, "DIRECT")
    s = cv.incremental_variance_series(spec, v, 1e-8, "STAR")
    assert abs(d.value - s.value) <= d.bound + s.bound + 1e-13
    assert 0.0 <= d.value <= 2.0


def test_incremental_variance_edges():
    spec = AngularPowerSpectrum.power_law(1.0)
    assert cv.incremental_variance(spec, 0.0) == 0.0
    vals = cv.incremental_variance(spec, np.array([0.0, 0.1, 0.2]))
    assert vals.shape == (3,)
    with pytest.raises(DomainError):
        cv.incremental_variance(spec, -0.1)
    with pytest.raises(DomainError):
        cv.incremental_variance(AngularPowerSpectrum.power_law(1.0, lam=INF), 0.1, method="STAR")


def test_incremental_variance_fixed_matches_tolerance_path():
    spec = AngularPowerSpectrum.power_law(0.8, lam=1.0)
    vs = np.array([0.01, 0.1, 1.0])
    vals, bounds = cv.incremental_variance_fixed(spec, vs, 200_000)
    ref = cv.incremental_variance(spec, vs, tol=1e-10)
    np.testing.assert_array_less(np.abs(vals - ref), bounds + 1e-9)


@given(st.floats(0.1, 10.0), st.floats(-10.0, 10.0))
def test_i_c_round_trip(c1, c):
    i = cv.i_c_convert(c1, c, "C_TO_I")
    assert cv.i_c_convert(c1, i, "I_TO_C") == pytest.approx(c, abs=1e-12)
    assert cv.i_c_convert(c1, c1, cv.Direction.C_TO_I) == 0.0


def test_temporal_cfs():
    assert TemporalCF(TemporalKind.GAUSS, 2.0)(1.5) == pytest.approx(math.exp(-2.25))
    assert TemporalCF(TemporalKind.EXPDECAY, 0.5)(-2.0) == pytest.approx(math.exp(-1.0))
    assert TemporalCF(TemporalKind.RATIONAL, 4.0)(0.5) == pytest.approx(0.5)
    for kind in TemporalKind:
        assert TemporalCF(kind, 1.0)(0.0) == 1.0
    with pytest.raises(DomainError):
        TemporalCF(TemporalKind.GAUSS, 0.0)


def test_bp_single_temporal_factorizes():
    spec = AngularPowerSpectrum.power_law(1.0)
    cf = TemporalCF(TemporalKind.EXPDECAY, 0.8)
    model = SpaceTimeCovarianceModel(spec, (cf,), (1.5,))
    for x, dt in ((0.3, 0.0), (-0.6, 1.2), (1.0, 2.0)):
        ref = 2.25 * cf(dt) * cv.schoenberg_cov(spec, x)
        assert cv.bp_cov(model, x, dt) == pytest.approx(ref, rel=1e-9, abs=1e-10)


def test_bp_per_degree_against_direct_sum():
    head = np.array([0.2, 0.3, 0.1, 0.4])
    spec = AngularPowerSpectrum.finite(head, lam=1.0)
    cfs = (TemporalCF(TemporalKind.GAUSS, 1.0), TemporalCF(TemporalKind.RATIONAL, 3.0))
    model = SpaceTimeCovarianceModel(spec, cfs, (1.0, 2.0, 0.5))
    x, dt = 0.35, 0.7
    w = gegenbauer_w_sequence(1.0, x, 3)
    phi = [cfs[0](dt), cfs[1](dt), cfs[1](dt), cfs[1](dt)]
    c2 = [1.0, 4.0, 0.25, 0.25]
    ref = sum(head[n] * c2[n] * phi[n] * w[n] for n in range(4))
    assert cv.bp_cov(model, x, dt) == pytest.approx(ref, rel=1e-14)


def test_bp_at_one_closes_tail_exactly():
    spec = AngularPowerSpectrum.power_law(1.0)
    cfs = (TemporalCF(TemporalKind.GAUSS, 1.0), TemporalCF(TemporalKind.EXPDECAY, 2.0))
    model = SpaceTimeCovarianceModel(spec, cfs, (1.0, 0.5, 2.0))
    dt = 0.4
    # a_1 = 1/2 with degree-1 factors, then degrees >= 2 carry c=2 and cf #2
    ref = 0.5 * 0.25 * cfs[1](dt) + 4.0 * cfs[1](dt) * spec.tail_sum(2)
    assert cv.bp_cov(model, 1.0, dt) == pytest.approx(ref, rel=1e-14)
    assert model.variance == pytest.approx(0.5 * 0.25 + 4.0 * 0.5, rel=1e-14)


def test_cov_matrix_properties():
    rng = np.random.default_rng(3)
    pts = rng.standard_normal((40, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    spec = AngularPowerSpectrum.power_law(1.0, scale=2.0)
    cm = cv.cov_matrix(spec, pts, tol=1e-8)
    np.testing.assert_array_equal(cm.matrix, cm.matrix.T)
    np.testing.assert_array_equal(np.diag(cm.matrix), 2.0)
    assert cm.min_eigenvalue > 0.0
    assert cm.jitter_added == 0.0
    assert cm.truncation_bound <= 1e-8
    np.testing.assert_allclose(cm.factor @ cm.factor.T, cm.matrix, atol=1e-12)
    assert cm.matrix[3, 7] == pytest.approx(cv.schoenberg_cov(spec, float(pts[3] @ pts[7]), 1e-8), abs=1e-12)


def test_cov_matrix_space_time():
    rng = np.random.default_rng(4)
    pts = rng.standard_normal((12, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    times = rng.uniform(0, 3, 12)
    model = SpaceTimeCovarianceModel(AngularPowerSpectrum.power_law(1.0), (TemporalCF(TemporalKind.GAUSS, 1.0),))
    cm = cv.cov_matrix(model, pts, times=times, tol=1e-8)
    i, j = 2, 9
    ref = cv.bp_cov(model, float(pts[i] @ pts[j]), times[i] - times[j], tol=1e-8)
    assert cm.matrix[i, j] == pytest.approx(ref, abs=1e-12)
    assert cm.min_eigenvalue > -1e-8


def test_cov_matrix_antipodal_singular():
    spec = AngularPowerSpectrum.finite([0.0, 1.0])
    pts = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    cm = cv.cov_matrix(spec, pts, jitter="none")
    np.testing.assert_allclose(cm.matrix, [[1.0, -1.0], [-1.0, 1.0]])
    assert cm.factor is None
    auto = cv.cov_matrix(spec, pts, jitter="auto")
    assert 0.0 < auto.jitter_added <= 1e-6


def test_cov_matrix_errors():
    spec = AngularPowerSpectrum.power_law(1.0)
    with pytest.raises(DomainError):
        cv.cov_matrix(spec, np.eye(4))
    with pytest.raises(DomainError):
        cv.cov_matrix(spec, np.eye(3), times=[0, 1, 2])
    with pytest.raises(DomainError):
        cv.cov_matrix(spec, np.eye(3), jitter="lots")
    with pytest.raises(NotPSDError):
        sample_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]), 5, RngSpec(0))
