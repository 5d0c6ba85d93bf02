import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beziergan.baselines import (
    FFD,
    GanParameterization,
    ffd_build,
    gmdv_build,
    least_squares_fit,
    naca4,
    naca_camber,
    svd_fit,
    svd_residuals,
    third_difference_matrix,
)
from beziergan.dataset import synthetic_corpus
from beziergan.gan import BezierGAN, GanConfig
from beziergan.geometry import is_self_intersecting, signed_area


@pytest.fixture(scope="module")
def corpus():
    return np.asarray(synthetic_corpus(80, seed=11).curves)


def test_naca0012_symmetric_and_thickness():
    foil = naca4("0012")
    assert foil.shape == (192, 2)
    np.testing.assert_allclose(foil[::-1, 0], foil[:, 0], atol=1e-9)
    np.testing.assert_allclose(foil[::-1, 1], -foil[:, 1], atol=1e-9)
    x = np.linspace(0.001, 1, 20001)
    yt = 5 * 0.12 * (0.2969 * np.sqrt(x) - 0.1260 * x - 0.3516 * x ** 2 + 0.2843 * x ** 3 - 0.1036 * x ** 4)
    assert 2 * yt.max() == pytest.approx(0.12, abs=0.01)
    assert x[np.argmax(yt)] == pytest.approx(0.30, abs=0.01)
    upper = foil[:96]
    assert 2 * upper[:, 1].max() == pytest.approx(0.12, abs=0.01)
    assert signed_area(foil) > 0 and not is_self_intersecting(foil)
    np.testing.assert_array_equal(foil[0], [1.0, 0.0])
    np.testing.assert_array_equal(foil[-1], [1.0, 0.0])


def test_naca2412_camber():
    x = np.linspace(0, 1, 10001)
    yc = naca_camber("2412", x)
    assert yc.max() == pytest.approx(0.02, abs=0.005)
    assert x[np.argmax(yc)] == pytest.approx(0.4, abs=0.005)
    foil = naca4("2412")
    assert not is_self_intersecting(foil)


@pytest.mark.parametrize("code", ["12", "00a2", "00123"])
def test_naca_bad_code(code):
    with pytest.raises(ValueError):
        naca4(code)


def test_svd_orthonormal_and_sorted(corpus):
    b = svd_fit(corpus, 9)
    np.testing.assert_allclose(b.modes @ b.modes.T, np.eye(9), atol=1e-8)
    assert np.all(np.diff(b.singular_values) <= 0)
    assert b.dim == 9 and b.bounds.shape == (9, 2)


def test_svd_identical_curves_rank_zero():
    same = np.repeat(naca4("0012")[None], 10, axis=0)
    with pytest.raises(ValueError, match="rank 0"):
        svd_fit(same, 1)


def test_svd_full_rank_reconstruction():
    curves = np.asarray(synthetic_corpus(8, seed=1).curves)
    b = svd_fit(curves, 7)   # rank of 8 centred curves is 7
    for c in curves:
        np.testing.assert_allclose(b.synthesize(b.project(c)), c, atol=1e-6)
    with pytest.raises(ValueError):
        svd_fit(curves, 8)


def test_svd_project_reconstruct_identity_on_span(corpus):
    b = svd_fit(corpus, 6)
    v0 = np.random.default_rng(0).normal(size=6) * 0.1
    np.testing.assert_allclose(b.project(b.synthesize(v0)), v0, atol=1e-8)
    v, mse = least_squares_fit(b, b.synthesize(v0))
    np.testing.assert_allclose(v, v0, atol=1e-8)
    assert mse < 1e-10


def test_svd_residual_nonincreasing(corpus):
    res = svd_residuals(corpus, range(1, 13))
    assert all(b <= a for a, b in zip(res, res[1:]))
    # the oracle: direct reconstruction error for each k
    X = corpus.reshape(len(corpus), -1)
    for k, r in zip((2, 5, 9), (res[1], res[4], res[8])):
        b = svd_fit(corpus, k)
        recon = b.mean + (X - b.mean) @ b.modes.T @ b.modes
        assert np.sum((X - recon) ** 2) == pytest.approx(r, rel=1e-8, abs=1e-10)


def test_gmdv_modes_and_identity():
    g = gmdv_build(192, 8)
    np.testing.assert_allclose(g.modes @ g.modes.T, np.eye(8), atol=1e-8)
    np.testing.assert_array_equal(g.synthesize(np.zeros(8)), naca4("0012"))
    assert np.all(np.diff(g.singular_values) >= 0)
    for k in range(8):
        v = np.zeros(8)
        v[k] = g.bounds[k, 1]
        disp = g.synthesize(v) - naca4("0012")
        assert np.max(np.abs(disp[:, 1])) == pytest.approx(0.1)
        assert np.all(disp[:, 0] == 0)


def test_gmdv_quadratic_in_near_null_space():
    D = third_difference_matrix(192)
    s = np.arange(192.0)
    quad = 0.3 - 0.01 * s + 2e-4 * s ** 2
    assert np.max(np.abs(D @ quad)) < 1e-12
    g = gmdv_build(192, 3)
    proj = g.modes.T @ (g.modes @ quad)
    np.testing.assert_allclose(proj, quad, atol=1e-9)


def test_gmdv_range_errors():
    with pytest.raises(ValueError):
        gmdv_build(192, 0)
    with pytest.raises(ValueError):
        gmdv_build(192, 190)


def test_gmdv_linear_fit_recovers(corpus):
    g = gmdv_build(192, 8)
    v0 = g.bounds[:, 1] * np.linspace(-0.5, 0.5, 8)
    v, mse = least_squares_fit(g, g.synthesize(v0))
    np.testing.assert_allclose(v, v0, atol=1e-8)


def test_ffd_identity_and_x_fixed():
    f = ffd_build()
    assert f.dim == 12
    np.testing.assert_allclose(f.synthesize(np.zeros(12)), naca4("0012"), atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-0.2, 0.2), min_size=12, max_size=12))
def test_ffd_offsets_keep_x(offsets):
    f = ffd_build()
    out = f.synthesize(np.array(offsets))
    assert np.all(np.isfinite(out))
    np.testing.assert_array_equal(out[:, 0], naca4("0012")[:, 0])


def test_ffd_corner_locality():
    f = ffd_build()
    v = np.zeros(12)
    eps = 0.05
    v[f.lattice_index(0, 0)] = eps
    disp = f.synthesize(v)[:, 1] - naca4("0012")[:, 1]
    u, w = f.uv[:, 0], f.uv[:, 1]
    np.testing.assert_allclose(disp, eps * (1 - u) ** 3 * (1 - w) ** 2, atol=1e-12)
    peak = np.argmax(disp)
    assert peak == np.argmax((1 - u) ** 3 * (1 - w) ** 2)
    assert f.synthesize(v)[peak, 0] < 0.05     # near the leading edge corner


def test_ffd_rejects_baseline_outside():
    bad = naca4("0012") * np.array([1.0, 4.0])
    with pytest.raises(ValueError):
        FFD(bad)


def test_ffd_iterative_fit_reaches_linear_optimum():
    f = ffd_build()
    v0 = np.random.default_rng(2).uniform(-0.1, 0.1, 12)
    target = f.synthesize(v0)
    v, mse = least_squares_fit(f, target)
    assert mse < 1e-6


def test_gan_parameterization_fit_and_noise_helps():
    model = BezierGAN(GanConfig(), seed=0)
    pc = GanParameterization(model, fit_noise=False)
    pz = GanParameterization(model, fit_noise=True)
    assert pc.dim == 3 and pz.dim == 13
    target = pz.synthesize(np.r_[0.3, 0.6, 0.2, np.full(10, 0.4)])
    vc, mse_c = least_squares_fit(pc, target, restarts=2, iterations=60)
    vz, mse_z = least_squares_fit(pz, target, restarts=2, iterations=60, initial=np.r_[vc, np.zeros(10)])
    assert mse_z <= mse_c
    assert np.all(vz >= pz.bounds[:, 0]) and np.all(vz <= pz.bounds[:, 1])


def test_gan_gradient_matches_finite_difference():
    model = BezierGAN(GanConfig(), seed=1)
    p = GanParameterization(model, fit_noise=True)
    target = naca4("0012")
    v = np.random.default_rng(0).uniform(0.2, 0.8, size=(1, p.dim))
    _, g = p.batch_mse_and_grad(v, target)
    _, g_fd = super(GanParameterization, p).batch_mse_and_grad(v, target)
    np.testing.assert_allclose(g, g_fd, rtol=1e-4, atol=1e-7)
