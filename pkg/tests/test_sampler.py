import math

import numpy as np
import pytest

from sphere_grf import covariance as cv
from sphere_grf import sampler as sm
from sphere_grf.covariance import SpaceTimeCovarianceModel, TemporalCF, TemporalKind
from sphere_grf.errors import DomainError
from sphere_grf.spectrum import AngularPowerSpectrum


def sphere_points(n, seed=0):
    g = np.random.default_rng(seed).standard_normal((n, 3))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@pytest.fixture
def spec():
    head = np.linspace(1.0, 0.2, 9)
    return AngularPowerSpectrum.finite(head / head.sum(), lam=0.5, scale=2.0)


def test_kl_variances(spec):
    v = sm.kl_variances(spec, 8)
    np.testing.assert_allclose(v, 2.0 * spec.head * 4 * math.pi / (2 * np.arange(9) + 1))
    with pytest.raises(DomainError):
        sm.kl_variances(AngularPowerSpectrum.finite([1.0], lam=1.0), 3)


def test_prefix_property_across_blocks(spec):
    pts = sphere_points(5)
    short = sm.sample_kl_sphere(spec, 8, pts, sm.BLOCK + 300, sm.RngSpec(11))
    long = sm.sample_kl_sphere(spec, 8, pts, 3 * sm.BLOCK, sm.RngSpec(11))
    np.testing.assert_array_equal(short.values, long.values[: sm.BLOCK + 300])


def test_thread_count_does_not_change_output(spec, monkeypatch):
    pts = sphere_points(4)
    monkeypatch.setenv("SPHERE_GRF_THREADS", "1")
    one = sm.sample_kl_sphere(spec, 8, pts, 3000, sm.RngSpec(5)).values
    monkeypatch.setenv("SPHERE_GRF_THREADS", "4")
    assert sm.thread_count() == 4
    many = sm.sample_kl_sphere(spec, 8, pts, 3000, sm.RngSpec(5)).values
    np.testing.assert_array_equal(one, many)
    monkeypatch.setenv("SPHERE_GRF_THREADS", "0")
    with pytest.raises(DomainError):
        sm.thread_count()


def test_streams_and_seeds_differ(spec):
    pts = sphere_points(3)
    a = sm.sample_kl_sphere(spec, 8, pts, 10, sm.RngSpec(1, stream=0)).values
    b = sm.sample_kl_sphere(spec, 8, pts, 10, sm.RngSpec(1, stream=1)).values
    c = sm.sample_kl_sphere(spec, 8, pts, 10, sm.RngSpec(2, stream=0)).values
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_rng_spec_validation():
    with pytest.raises(DomainError):
        sm.RngSpec(-1)
    with pytest.raises(DomainError):
        sm.RngSpec(2**64)
    with pytest.raises(DomainError):
        sm.RngSpec(1, stream=-2)


def test_kl_covariance_matches_schoenberg(spec):
    pts = sphere_points(6, seed=3)
    fs = sm.sample_kl_sphere(spec, 8, pts, 40000, sm.RngSpec(99))
    assert fs.method is sm.Method.KL
    assert fs.truncation_bound == 0.0
    emp = fs.values.T @ fs.values / fs.replicates
    ref = cv.cov_matrix(spec, pts).matrix
    # standard error of a product of two unit-scale Gaussians
    se = np.sqrt((np.outer(np.diag(ref), np.diag(ref)) + ref**2) / fs.replicates)
    assert np.max(np.abs(emp - ref) / se) < 4.5


def test_kl_truncation_bound_reports_tail():
    spec = AngularPowerSpectrum.power_law(1.0)
    fs = sm.sample_kl_sphere(spec, 10, sphere_points(2), 4, sm.RngSpec(0))
    assert fs.truncation_bound == pytest.approx(1.0 / 11)


def test_cholesky_sampler_any_dimension():
    rng = np.random.default_rng(5)
    pts = rng.standard_normal((5, 5))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    spec = AngularPowerSpectrum.power_law(1.0, lam=1.5)  # S^4 in R^5
    cov = cv.cov_matrix(spec, pts, tol=1e-8)
    fs = sm.sample_cholesky(cov, 30000, sm.RngSpec(8))
    assert fs.method is sm.Method.CHOLESKY
    emp = fs.values.T @ fs.values / fs.replicates
    se = np.sqrt((np.outer(np.diag(cov.matrix), np.diag(cov.matrix)) + cov.matrix**2) / fs.replicates)
    assert np.max(np.abs(emp - cov.matrix) / se) < 4.5


def test_cholesky_singular_psd_matrix():
    mat = np.array([[1.0, -1.0], [-1.0, 1.0]])
    fs = sm.sample_cholesky(mat, 100, sm.RngSpec(1))
    np.testing.assert_allclose(fs.values[:, 0], -fs.values[:, 1], atol=1e-12)


def test_spacetime_sampler_shape_and_covariance(spec):
    cfs = (TemporalCF(TemporalKind.GAUSS, 1.0), TemporalCF(TemporalKind.RATIONAL, 0.5))
    model = SpaceTimeCovarianceModel(spec, cfs, (1.0, 0.7))
    pts = sphere_points(3, seed=9)
    times = np.array([0.0, 0.5, 2.0])
    fs = sm.sample_spacetime(model, 8, pts, times, 30000, sm.RngSpec(21))
    assert fs.values.shape == (30000, 3, 3)
    x = fs.values[:, 0, 0] * fs.values[:, 2, 1]
    ref = cv.bp_cov(model, float(pts[0] @ pts[2]), 0.5)
    assert abs(x.mean() - ref) < 4.5 * x.std() / math.sqrt(x.size)
    with pytest.raises(DomainError):
        sm.sample_spacetime(model, 8, pts, [0.0, 0.0], 5, sm.RngSpec(0))
    with pytest.raises(DomainError):
        sm.sample_spacetime(spec, 8, pts, times, 5, sm.RngSpec(0))


def test_literal_expansion_report(spec):
    cfs = (TemporalCF(TemporalKind.GAUSS, 1.0), TemporalCF(TemporalKind.EXPDECAY, 2.0))
    model = SpaceTimeCovarianceModel(spec, cfs, (1.0,))
    x, y = sphere_points(2, seed=4)
    rep = sm.verify_literal_expansion(model, x, y, 0.3, 1.1, 8, 20000, sm.RngSpec(3))
    assert rep.product_differs
    assert abs(rep.z_score) < 4.0
    # at s = 0 the product phi(0) phi(t) equals the stationary phi(t - 0)
    rep0 = sm.verify_literal_expansion(model, x, y, 0.0, 1.1, 8, 100, sm.RngSpec(3))
    assert not rep0.product_differs
    assert rep0.formula_value == pytest.approx(rep0.stationary_value)


def test_replicates_validation(spec):
    with pytest.raises(DomainError):
        sm.sample_kl_sphere(spec, 8, sphere_points(2), 0, sm.RngSpec(0))
    with pytest.raises(DomainError):
        sm.sample_kl_sphere(spec, -1, sphere_points(2), 3, sm.RngSpec(0))
