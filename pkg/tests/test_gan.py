import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beziergan import autodiff as ad
from beziergan.dataset import synthetic_corpus
from beziergan.gan import (
    BezierGAN,
    CheckpointError,
    GanConfig,
    discriminator_loss,
    info_lower_bound,
    load_model,
    losses,
    regularizers,
    save_model,
    synthesize,
    train,
)
from beziergan.gan.checkpoint import MAGIC, checkpoint_bytes
from gan_gradcheck import check_configuration


@pytest.fixture(scope="module")
def model():
    return BezierGAN(GanConfig(), seed=7)


@pytest.fixture(scope="module")
def small_corpus():
    return np.asarray(synthetic_corpus(64, seed=3).curves)


def test_generator_shapes(model):
    c = np.random.default_rng(0).uniform(size=(5, 3))
    curve, P, w, t = model.generate(c)
    assert curve.shape == (5, 192, 2)
    assert P.shape == (5, 32, 2) and w.shape == (5, 32) and t.shape == (5, 192)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.booleans())
def test_parameter_variables_increase_from_0_to_1(seed, training):
    m = BezierGAN(GanConfig(), seed=1)
    rng = np.random.default_rng(seed)
    c, z = m.sample_inputs(4, rng)
    _, _, w, t = m.generate(c, 3.0 * z, training=training)
    t = t.data.astype(np.float64)
    assert np.all(np.abs(t[:, 0]) <= 1e-6) and np.all(np.abs(t[:, -1] - 1.0) <= 1e-6)
    assert np.all(np.diff(t, axis=1) > 0)
    assert np.all(w.data >= 0)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_full_graph_gradcheck(seed):
    err, _ = check_configuration(seed)
    assert err < 1e-4


def test_discriminator_probability_in_unit_interval(model):
    x = np.random.default_rng(1).normal(0, 5, size=(6, 192, 2))
    logit, mean, logvar = model.discriminate(x)
    p = 1.0 / (1.0 + np.exp(-logit.data.astype(np.float64)))
    assert np.all(np.isfinite(p)) and np.all((p > 0) & (p < 1))
    assert mean.shape == (6, 3) and logvar.shape == (6, 3)


def test_discriminator_rows_independent_in_inference(model):
    x = np.tile(np.random.default_rng(2).normal(size=(1, 192, 2)), (4, 1, 1))
    out = model.discriminate(x, training=False)
    for arr in out:
        assert np.all(arr.data == arr.data[0])


def test_logvar_clamped_under_extreme_inputs(model):
    x = np.random.default_rng(3).normal(0, 1e4, size=(8, 192, 2))
    _, _, logvar = model.discriminate(x)
    assert logvar.data.min() >= -7.0 and logvar.data.max() <= 7.0


def test_discriminator_rejects_wrong_length(model):
    with pytest.raises(ad.ShapeError):
        model.discriminate(np.zeros((2, 100, 2)))


def test_regularizer_zeros():
    P = np.tile(np.array([[0.3, -0.2]]), (4, 32, 1)).astype(np.float64)
    w = np.random.default_rng(0).uniform(size=(4, 32))
    r1, r2, r3, r4 = regularizers(P, w)
    assert float(r1.data) == 0.0 and float(r3.data) == 0.0 and float(r4.data) == 0.0
    w[:, 1:-1] = 0.0
    assert float(regularizers(P, w)[1].data) == 0.0


def test_r4_contributions():
    P = np.zeros((2, 32, 2))
    P[0, 0, 1], P[0, -1, 1] = 0.1, 0.0       # P0y - Pny = 0.1 -> 0
    P[1, 0, 1], P[1, -1, 1] = 0.0, 0.1       # -0.1 -> 1.0
    r4 = float(regularizers(P, np.ones((2, 32)))[3].data)
    assert r4 == pytest.approx(0.5, abs=1e-12)


def test_r1_r2_values():
    # a straight chain of unit steps: mean adjacent distance 1
    P = np.zeros((1, 5, 2))
    P[0, :, 0] = np.arange(5.0)
    w = np.array([[9.0, 1.0, 2.0, 3.0, 9.0]])
    r1, r2, r3, _ = regularizers(P, w)
    assert float(r1.data) == pytest.approx(1.0)
    assert float(r2.data) == pytest.approx(6.0 / 4.0)
    assert float(r3.data) == pytest.approx(4.0)
    assert float(regularizers(P, w, max_term=True)[0].data) == pytest.approx(2.0)


def test_constant_half_discriminator_loss():
    zero = ad.Tensor(np.zeros(32), dtype=np.float64)
    assert float(discriminator_loss(zero, zero).data) == pytest.approx(2 * math.log(2), abs=1e-6)


@pytest.mark.parametrize("d", [2, 3, 7])
def test_info_bound_closed_form(d):
    c = np.random.default_rng(d).uniform(size=(10, d))
    with ad.precision(np.float64):
        val = float(info_lower_bound(c, ad.Tensor(c), ad.Tensor(np.zeros((10, d)))).data)
    assert val == pytest.approx(-0.5 * d * math.log(2 * math.pi), abs=1e-12)


def test_losses_bundle(model, small_corpus):
    rng = np.random.default_rng(0)
    c, z = model.sample_inputs(8, rng)
    terms = losses(model, small_corpus[:8], c, z)
    assert all(np.isfinite(float(v.data)) for v in (terms.d_loss, terms.g_loss, terms.info))
    assert len(terms.regs) == 4 and all(float(r.data) >= 0 for r in terms.regs)


def test_default_loss_weights_and_prior():
    cfg = GanConfig()
    assert cfg.lambdas == (1.0, 10.0, 10.0, 10.0, 10.0)
    assert cfg.steps == 10_000 and cfg.batch_size == 32
    assert cfg.noise_std ** 2 == pytest.approx(0.5)


def test_config_validation():
    with pytest.raises(ValueError):
        GanConfig(degree=30)
    with pytest.raises(ValueError):
        GanConfig(lambdas=(1, 2))
    with pytest.raises(ValueError):
        GanConfig(g_updates=0)


@pytest.mark.parametrize("g_updates", [1, 3])
def test_generator_updates_per_step(small_corpus, monkeypatch, g_updates):
    import importlib

    mod = importlib.import_module("beziergan.gan.train")
    calls = []
    real_step = mod.adam_step

    def counting(params, grads, state):
        calls.append(state)
        return real_step(params, grads, state)

    monkeypatch.setattr(mod, "adam_step", counting)
    _, hist = train(small_corpus, GanConfig(steps=2, batch_size=16, mmd_every=0, g_updates=g_updates), seed=1)
    assert len(hist.losses) == 2
    # one discriminator step, then g_updates generator steps, per iteration
    assert len(calls) == 2 * (1 + g_updates)
    assert calls[0] is not calls[1]


def test_zero_steps_keeps_initialisation(small_corpus):
    cfg = GanConfig(steps=0, batch_size=16)
    m, hist = train(small_corpus, cfg, seed=4)
    ref = BezierGAN(cfg, seed=4)
    for k, v in ref.state_dict().items():
        np.testing.assert_array_equal(m.state_dict()[k], v)
    assert hist.losses == [] and hist.mmd == []


def test_training_deterministic(small_corpus):
    cfg = GanConfig(steps=4, batch_size=16, mmd_every=2, mmd_samples=32)
    _, h1 = train(small_corpus, cfg, seed=9)
    _, h2 = train(small_corpus, cfg, seed=9)
    assert h1.losses == h2.losses and h1.mmd == h2.mmd
    assert [s for s, _ in h1.mmd] == [2, 4]


def test_training_rejects_small_corpus(small_corpus):
    with pytest.raises(ValueError):
        train(small_corpus[:10], GanConfig(steps=1), seed=0)


def test_checkpoint_round_trip_bitwise(tmp_path, small_corpus):
    m, _ = train(small_corpus, GanConfig(steps=2, batch_size=16, mmd_every=0), seed=2)
    path = tmp_path / "m.ckpt"
    save_model(m, path)
    back = load_model(path)
    c = np.random.default_rng(5).uniform(size=(6, 3))
    z = np.random.default_rng(6).normal(size=(6, 10))
    assert np.array_equal(synthesize(back, c, z), synthesize(m, c, z))
    assert path.read_bytes()[:8] == MAGIC
    assert checkpoint_bytes(back) == path.read_bytes()


def test_checkpoint_version_mismatch(tmp_path, model):
    raw = bytearray(checkpoint_bytes(model))
    raw = raw.replace(b'"format_version": 1', b'"format_version": 9')
    path = tmp_path / "bad.ckpt"
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError, match="version"):
        load_model(path)
    path.write_bytes(b"garbage!")
    with pytest.raises(CheckpointError, match="magic"):
        load_model(path)


def test_synthesize_single_and_params(model):
    curve, params = synthesize(model, np.array([0.5, 0.5, 0.5]), return_params=True)
    assert curve.shape == (192, 2)
    params.check_monotone()
    assert np.all(params.weights >= 0)


def test_latent_sweep_is_smooth(model):
    steps = np.linspace(0, 1, 21)
    for axis in range(3):
        c = np.full((21, 3), 0.5)
        c[:, axis] = steps
        curves = synthesize(model, c)
        disp = np.linalg.norm(np.diff(curves, axis=0), axis=2).mean(axis=1)
        assert disp.max() < 0.05
