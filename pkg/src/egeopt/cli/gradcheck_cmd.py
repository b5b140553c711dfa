"""Finite-difference verification suites behind `egeopt gradcheck`.

Three levels: every autodiff op, the spectrogram -> estimator -> matching
loss chain, and the full pipeline gradient with respect to enhancer weights
(including the lambda-linearity identity). All checks run in float64.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import ops
from ..autodiff.gradcheck import max_relative_error, run_op_suite
from ..autodiff.params import ParameterSet
from ..autodiff.tensor import no_grad, tensor
from ..dsp.stft import StftConfig
from ..enhance.finetune import TrainCrop
from ..enhance.losses import egemaps_loss, original_loss
from ..enhance.model import EnhancerConfig, init_enhancer_params, predict_mask
from ..enhance.stft_bridge import batch_stft, istft_magnitude, waveform_crop_frames
from ..estimator.model import Estimator, EstimatorConfig, InputNorm, estimator_forward, init_estimator_params
from ..estimator.scaler import TargetScaler
from ..dsp.synth import synth_utterance

OP_TOLERANCE = 1e-4
CHAIN_TOLERANCE = 1e-3
LINEARITY_TOLERANCE = 1e-12
N_PROBE_COORDS = 5
FD_STEP = 1e-6

_SMALL_STFT = StftConfig(fft_size=64, hop=16, sample_rate=16000)


def _f64(params: ParameterSet) -> ParameterSet:
    out = ParameterSet(dtype=np.float64)
    out.mode = params.mode
    for name, t in params.items():
        out.add(name, t.data.astype(np.float64), trainable=t.requires_grad)
    return out


def _tiny_estimator(seed: int = 0, d: int = 5) -> Estimator:
    cfg = EstimatorConfig(conv_channels=(4, 4, 4, 8), head_hidden=8, out_dim=d, crop_frames=16, input_bins=_SMALL_STFT.fft_size // 2 + 1)
    params = _f64(init_estimator_params(cfg, seed=seed))
    params.eval()
    params.set_trainable("", False)
    return Estimator(
        params=params,
        config=cfg,
        input_norm=InputNorm(mean=0.1, std=1.3),
        scaler=TargetScaler(np.zeros(d), np.ones(d), "gradcheck"),
        stft_config=_SMALL_STFT,
        registry_id="gradcheck",
    )


def check_estimator_chain(seed: int = 0) -> float:
    """d(matching loss)/d(magnitude spectrogram) vs central differences."""
    est = _tiny_estimator(seed)
    rng = np.random.default_rng(seed + 1)
    bsz, t, f = 2, 16, _SMALL_STFT.fft_size // 2 + 1
    mag0 = np.abs(rng.standard_normal((bsz, t, f)))
    targets = rng.standard_normal((bsz, est.config.out_dim))

    def loss_tensor(mag_t):
        feats = ops.scale(ops.add_scalar(ops.log1p(mag_t), -est.input_norm.mean), 1.0 / est.input_norm.std)
        out = estimator_forward(est.params, ops.reshape(feats, (bsz, 1, t, f)), est.config, bn_train=False)
        return egemaps_loss(out, tensor(targets, dtype=np.float64))

    mag_t = tensor(mag0, requires_grad=True, dtype=np.float64)
    loss_tensor(mag_t).backward()
    analytic = mag_t.grad

    def f_scalar(m):
        with no_grad():
            return loss_tensor(tensor(m, dtype=np.float64)).item()

    coords = [tuple(c) for c in zip(*[rng.integers(0, s, N_PROBE_COORDS) for s in mag0.shape])]
    worst = 0.0
    for c in coords:
        plus = mag0.copy()
        plus[c] += FD_STEP
        minus = mag0.copy()
        minus[c] -= FD_STEP
        numeric = (f_scalar(plus) - f_scalar(minus)) / (2 * FD_STEP)
        worst = max(worst, max_relative_error(np.array([analytic[c]]), np.array([numeric])))
    return worst


def _pipeline_setup(seed: int = 0):
    est = _tiny_estimator(seed)
    enh_cfg = EnhancerConfig(channels=(4, 4))
    theta = _f64(init_enhancer_params(enh_cfg, seed=seed + 2))
    n = waveform_crop_frames(_SMALL_STFT, 16)
    crops = []
    for i in range(2):
        clean = synth_utterance("harmonic_voice", (n + 400) / 16000, 300 + i).samples[:n]
        noise = synth_utterance("noise", (n + 400) / 16000, 400 + i).samples[:n]
        crops.append(TrainCrop(utterance_id=f"g{i}", noisy=clean + 0.3 * noise, clean=clean))
    rng = np.random.default_rng(seed + 3)
    targets = rng.standard_normal((2, est.config.out_dim))
    return est, enh_cfg, theta, crops, targets, n


def _pipeline_loss(theta, est, enh_cfg, crops, targets, n, lam):
    noisy = np.stack([c.noisy for c in crops])
    clean = np.stack([c.clean for c in crops])
    spec = batch_stft(noisy, _SMALL_STFT)
    mag = np.abs(spec)
    phase = np.where(mag > 0, spec / np.maximum(mag, 1e-300), 1.0 + 0.0j)
    mag_t = tensor(mag, dtype=np.float64)
    mask = predict_mask(theta, mag_t, enh_cfg)
    mag_enh = ops.mul(mask, mag_t)
    y_hat = istft_magnitude(mag_enh, phase, _SMALL_STFT, n)
    l_orig = original_loss(
        y_hat, tensor(clean, dtype=np.float64),
        mag_enh, tensor(np.abs(batch_stft(clean, _SMALL_STFT)), dtype=np.float64),
    )
    bsz, t, f = mag_enh.shape
    feats = ops.scale(ops.add_scalar(ops.log1p(mag_enh), -est.input_norm.mean), 1.0 / est.input_norm.std)
    est_out = estimator_forward(est.params, ops.reshape(feats, (bsz, 1, t, f)), est.config, bn_train=False)
    l_ege = egemaps_loss(est_out, tensor(targets, dtype=np.float64))
    if lam == 0.0:
        return l_orig, l_ege
    return ops.add(l_orig, ops.scale(l_ege, lam)), l_ege


def check_pipeline_theta(seed: int = 0, lam: float = 1.0) -> float:
    """d(total loss)/d(theta) at 5 random weight coordinates vs central differences."""
    est, enh_cfg, theta, crops, targets, n = _pipeline_setup(seed)
    loss, _ = _pipeline_loss(theta, est, enh_cfg, crops, targets, n, lam)
    loss.backward()
    grads = {name: theta[name].grad.copy() for name, _ in theta.trainable_items()}

    rng = np.random.default_rng(seed + 4)
    names = [name for name, _ in theta.trainable_items()]
    worst = 0.0
    for _ in range(N_PROBE_COORDS):
        name = names[int(rng.integers(0, len(names)))]
        data = theta[name].data
        flat_idx = int(rng.integers(0, data.size))
        idx = np.unravel_index(flat_idx, data.shape)

        def f_scalar(value):
            original = data[idx]
            data[idx] = value
            with no_grad():
                out, _ = _pipeline_loss(theta, est, enh_cfg, crops, targets, n, lam)
                result = out.item()
            data[idx] = original
            return result

        center = data[idx]
        numeric = (f_scalar(center + FD_STEP) - f_scalar(center - FD_STEP)) / (2 * FD_STEP)
        worst = max(worst, max_relative_error(np.array([grads[name][idx]]), np.array([numeric])))
    return worst


def check_lambda_linearity(seed: int = 0, lam: float = 2.0) -> float:
    """max |grads(orig + lam*ege) - (grads(orig) + lam*grads(ege))| over theta."""
    est, enh_cfg, theta, crops, targets, n = _pipeline_setup(seed)

    def grads_for(mode):
        theta.zero_grads()
        l_orig, l_ege = _pipeline_loss(theta, est, enh_cfg, crops, targets, n, 0.0)
        if mode == "orig":
            l_orig.backward()
        elif mode == "ege":
            l_ege.backward()
        else:
            ops.add(l_orig, ops.scale(l_ege, lam)).backward()
        return {name: theta[name].grad.copy() for name, _ in theta.trainable_items()}

    g_both = grads_for("both")
    g_orig = grads_for("orig")
    g_ege = grads_for("ege")
    return max(
        float(np.max(np.abs(g_both[name] - (g_orig[name] + lam * g_ege[name]))))
        for name in g_both
    )


def run(module: str) -> int:
    failures = 0

    def report(name: str, err: float, tol: float):
        nonlocal failures
        ok = err < tol
        if not ok:
            failures += 1
        print(f"{name:42s} max rel err {err:.3e}  (tol {tol:.0e})  {'PASS' if ok else 'FAIL'}")

    if module in ("all", "autodiff"):
        for check in run_op_suite(seed=0):
            report(f"op {check.name}", check.max_error, OP_TOLERANCE)
    if module in ("all", "estimator"):
        report("estimator chain d(loss)/d(spectrogram)", check_estimator_chain(seed=0), CHAIN_TOLERANCE)
    if module in ("all", "pipeline"):
        report("pipeline d(L_final)/d(theta) at lambda=1", check_pipeline_theta(seed=0, lam=1.0), CHAIN_TOLERANCE)
        lin = check_lambda_linearity(seed=0, lam=2.0)
        ok = lin < LINEARITY_TOLERANCE
        if not ok:
            failures += 1
        print(f"{'lambda-linearity of gradients':42s} max abs dev {lin:.3e}  (tol 1e-12)  {'PASS' if ok else 'FAIL'}")

    if failures:
        print(f"gradcheck: {failures} check(s) FAILED")
        return 2
    print("gradcheck: all checks passed")
    return 0
