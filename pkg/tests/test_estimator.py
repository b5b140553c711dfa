"""Estimator network, scaler, pre-training, and regression training."""

import numpy as np
import pytest

from egeopt.autodiff import ops
from egeopt.autodiff.gradcheck import max_relative_error, numeric_gradient
from egeopt.autodiff.tensor import no_grad, tensor
from egeopt.dsp import StftConfig, Waveform, stft, synth_utterance
from egeopt.errors import ValidationError
from egeopt.estimator import (
    Estimator,
    EstimatorConfig,
    InputNorm,
    PretrainConfig,
    TargetScaler,
    TrainEstimatorConfig,
    encoder_forward,
    estimator_forward,
    init_estimator_params,
    pretrain_encoder,
    spectrogram_features,
    train_estimator,
)

STFT_CFG = StftConfig()


def _random_mags(n, t=64, f=257, seed=0):
    rng = np.random.default_rng(seed)
    return [np.abs(rng.standard_normal((t, f))) for i in range(n)]


def test_scaler_round_trip_and_floor():
    rng = np.random.default_rng(0)
    targets = rng.uniform(-5, 5, (20, 7))
    targets[:, 3] = 2.0  # constant dim exercises the floor
    scaler = TargetScaler.fit(targets, registry_id="reg")
    z = scaler.standardize(targets[0])
    np.testing.assert_allclose(scaler.unstandardize(z), targets[0], atol=1e-9)
    assert scaler.std[3] == 1e-6
    # standardized train dims have unit variance (population) where not floored
    zs = np.stack([scaler.standardize(t) for t in targets])
    np.testing.assert_allclose(zs[:, 0].std(), 1.0, rtol=1e-9)


def test_scaler_dict_round_trip():
    scaler = TargetScaler.fit(np.random.default_rng(1).uniform(0, 1, (5, 3)), registry_id="reg")
    back = TargetScaler.from_dict(scaler.to_dict())
    np.testing.assert_array_equal(back.mean, scaler.mean)
    np.testing.assert_array_equal(back.std, scaler.std)


def test_encoder_output_shape():
    # stride-2 arithmetic: floor((n + 2*1 - 3) / 2) + 1 per layer
    cfg = EstimatorConfig()
    params = init_estimator_params(cfg, seed=0)
    x = tensor(np.zeros((2, 1, 64, 257), dtype=np.float32))
    z = encoder_forward(params, x, cfg, bn_train=True)
    assert z.shape == (2, 64, 4, 17)


def test_minimum_frame_count_enforced():
    cfg = EstimatorConfig()
    params = init_estimator_params(cfg, seed=0)
    with pytest.raises(ValidationError, match="16"):
        estimator_forward(params, tensor(np.zeros((1, 1, 8, 257), dtype=np.float32)), cfg, bn_train=False)


def test_eval_estimate_pure_and_batch_invariant():
    cfg = EstimatorConfig(out_dim=5)
    params = init_estimator_params(cfg, seed=3)
    params.eval()
    rng = np.random.default_rng(4)
    a = rng.standard_normal((1, 1, 64, 257)).astype(np.float32)
    b = rng.standard_normal((1, 1, 64, 257)).astype(np.float32)
    with no_grad():
        out_a1 = estimator_forward(params, tensor(a), cfg, bn_train=False).data
        out_a2 = estimator_forward(params, tensor(a), cfg, bn_train=False).data
        batched = estimator_forward(params, tensor(np.concatenate([a, b])), cfg, bn_train=False).data
    np.testing.assert_array_equal(out_a1, out_a2)
    np.testing.assert_allclose(batched[0], out_a1[0], atol=1e-5)


def test_estimate_interface_checks_stft_config():
    cfg = EstimatorConfig(out_dim=4)
    params = init_estimator_params(cfg, seed=0)
    params.eval()
    est = Estimator(
        params=params, config=cfg, input_norm=InputNorm(0.0, 1.0),
        scaler=TargetScaler(np.zeros(4), np.ones(4), "reg"),
        stft_config=STFT_CFG, registry_id="reg",
    )
    w = synth_utterance("harmonic_voice", 1.0, 3)
    fv = est.estimate(stft(w))
    assert fv.size == 4 and fv.registry_id == "reg"
    bad = stft(w, fft_size=256, hop=64)
    with pytest.raises(ValidationError, match="config"):
        est.estimate(bad)


def test_gradient_wrt_input_spectrogram_matches_fd():
    # whole-network gradient at 5 random coordinates, f64
    cfg = EstimatorConfig(conv_channels=(4, 4, 4, 8), head_hidden=8, out_dim=3, crop_frames=16, input_bins=33)
    params = init_estimator_params(cfg, seed=5, dtype=np.float64)
    params.eval()
    rng = np.random.default_rng(6)
    x0 = rng.standard_normal((1, 1, 16, 33))
    target = rng.standard_normal((1, 3))

    xt = tensor(x0, requires_grad=True, dtype=np.float64)
    loss = ops.mse(estimator_forward(params, xt, cfg, bn_train=False), tensor(target, dtype=np.float64))
    loss.backward()

    def f(x):
        with no_grad():
            out = estimator_forward(params, tensor(x, dtype=np.float64), cfg, bn_train=False)
        return float(np.mean((out.data - target) ** 2))

    coords = [tuple(c) for c in zip(*[rng.integers(0, s, 5) for s in x0.shape])]
    for c in coords:
        step = 1e-6
        xp = x0.copy(); xp[c] += step
        xm = x0.copy(); xm[c] -= step
        numeric = (f(xp) - f(xm)) / (2 * step)
        analytic = xt.grad[c]
        denom = max(abs(analytic), abs(numeric), 1e-8)
        assert abs(analytic - numeric) / denom < 1e-3, c


def test_pretrain_reduces_reconstruction_loss():
    cfg = EstimatorConfig(conv_channels=(4, 4, 4, 8), head_hidden=8, out_dim=4)
    mags = []
    for i in range(36):
        w = synth_utterance("harmonic_voice", 0.7, 50 + i)
        s = stft(Waveform(w.samples[: 63 * 160]))
        mags.append(s.magnitude())
    enc, norm, hist = pretrain_encoder(mags, cfg, PretrainConfig(epochs=3, batch=8, seed=2))
    assert hist[-1]["recon_mse"] < hist[0]["recon_mse"]
    assert all(n.startswith("enc.") for n in enc.names())


def test_pretrain_deterministic():
    cfg = EstimatorConfig(conv_channels=(4, 4, 4, 8), head_hidden=8, out_dim=4)
    mags = _random_mags(32, t=16, f=33, seed=7)
    e1, _, _ = pretrain_encoder(mags, cfg, PretrainConfig(epochs=2, batch=8, seed=3))
    e2, _, _ = pretrain_encoder(mags, cfg, PretrainConfig(epochs=2, batch=8, seed=3))
    for name in e1.names():
        assert np.array_equal(e1[name].data, e2[name].data)


def test_pretrain_needs_enough_data():
    cfg = EstimatorConfig()
    with pytest.raises(ValidationError, match="32"):
        pretrain_encoder(_random_mags(10), cfg, PretrainConfig())


def _toy_pairs(n, d=4, seed=0):
    # targets linearly readable from the spectrogram so a tiny run learns
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n):
        level = rng.uniform(0.5, 2.0)
        mag = np.abs(rng.standard_normal((16, 33))) * level
        target = np.array([level, level**2, -level, 3.0 * level])[:d]
        pairs.append((mag, target))
    return pairs


def test_train_estimator_zero_lr_keeps_weights():
    cfg = EstimatorConfig(conv_channels=(4, 4, 4, 8), head_hidden=8, out_dim=4, crop_frames=16, input_bins=33)
    pairs = _toy_pairs(24)
    # frozen encoder: batch-norm stays in eval mode, so nothing at all may move
    params, _, _, metrics = train_estimator(
        pairs, cfg, TrainEstimatorConfig(epochs=2, lr=0.0, batch=8, seed=1, freeze_encoder=True, augment_scale=1.0),
        registry_id="reg",
    )
    fresh = init_estimator_params(cfg, seed=1)
    for name in fresh.names():
        np.testing.assert_array_equal(params[name].data, fresh[name].data)
    val_losses = [m["val_mse"] for m in metrics]
    assert max(val_losses) - min(val_losses) < 1e-9


def test_train_estimator_learns_toy_mapping():
    cfg = EstimatorConfig(conv_channels=(4, 4, 4, 8), head_hidden=8, out_dim=4, crop_frames=16, input_bins=33)
    pairs = _toy_pairs(80, seed=2)
    params, scaler, norm, metrics = train_estimator(
        pairs, cfg, TrainEstimatorConfig(epochs=25, lr=2e-3, batch=8, seed=1, freeze_encoder=False, augment_scale=1.0, ema_decay=0.0),
        registry_id="reg",
    )
    assert metrics[-1]["val_mse"] < 0.2 * metrics[0]["val_mse"]


def test_frozen_encoder_is_bitwise_stable():
    cfg = EstimatorConfig(conv_channels=(4, 4, 4, 8), head_hidden=8, out_dim=4, crop_frames=16, input_bins=33)
    mags = _random_mags(32, t=16, f=33, seed=8)
    enc, norm, _ = pretrain_encoder(mags, cfg, PretrainConfig(epochs=1, batch=8, seed=4))
    before = {n: enc[n].data.copy() for n in enc.names()}
    pairs = _toy_pairs(40, seed=3)
    params, _, _, _ = train_estimator(
        pairs, cfg, TrainEstimatorConfig(epochs=3, lr=1e-3, batch=8, seed=1, freeze_encoder=True, augment_scale=1.0),
        encoder=enc, input_norm=norm, registry_id="reg",
    )
    for name, data in before.items():
        assert np.array_equal(params[name].data, data), name


def test_registry_dimension_mismatch_rejected():
    cfg = EstimatorConfig(conv_channels=(4, 4, 4, 8), head_hidden=8, out_dim=7, crop_frames=16, input_bins=33)
    with pytest.raises(ValidationError, match="registry"):
        train_estimator(_toy_pairs(24), cfg, TrainEstimatorConfig(epochs=1, batch=8, augment_scale=1.0), registry_id="reg")


def test_estimator_checkpoint_round_trip(tmp_path):
    from egeopt.autodiff import load_checkpoint, save_checkpoint

    cfg = EstimatorConfig(out_dim=6)
    params = init_estimator_params(cfg, seed=9)
    params.eval()
    est = Estimator(
        params=params, config=cfg, input_norm=InputNorm(1.2, 3.4),
        scaler=TargetScaler(np.zeros(6), np.ones(6), "reg"),
        stft_config=STFT_CFG, registry_id="reg",
    )
    path = tmp_path / "est.ckpt"
    save_checkpoint(path, est.params, extra=est.header_extra())
    loaded_params, header = load_checkpoint(path)
    back = Estimator.from_checkpoint_parts(loaded_params, header)
    assert back.config == cfg
    assert back.input_norm == est.input_norm
    assert back.stft_config == STFT_CFG
    for name in params.names():
        np.testing.assert_array_equal(back.params[name].data, params[name].data)
