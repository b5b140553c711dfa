"""egeopt command-line interface.

Exit codes: 0 success, 1 validation/config error, 2 numerical failure
(NaN or gradient-check mismatch), 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..errors import AudioIOError, NumericalError, UnvoicedUtteranceError, ValidationError
from ..dsp.stft import StftConfig, stft
from ..dsp.synth import synth_utterance
from ..dsp.waveform import MixSpec, Waveform, mix_at_snr
from ..dsp.wavio import read_wav, write_wav
from ..features.extract import extract_functionals
from ..features.registry import default_registry
from ..autodiff.checkpoint import file_sha256, load_checkpoint, save_checkpoint
from ..estimator.model import Estimator, EstimatorConfig
from ..estimator.pretrain import PretrainConfig, pretrain_encoder
from ..estimator.train import TrainEstimatorConfig, train_estimator
from ..enhance.model import EnhancerConfig, enhance, init_enhancer_params
from ..enhance.finetune import FineTuneConfig, TrainCrop, train_enhancer
from ..analysis.diffs import (
    HistogramSpec,
    compute_diffs,
    compute_stats,
    mean_abs_diff,
    percent_improvement,
    summarize_distribution,
)
from .config import RunConfig
from .manifest import ManifestEntry, load_manifest, write_manifest
from .pipeline import (
    build_crops,
    crop_magnitude,
    crop_samples_for,
    load_features,
    mark_done,
    prepare_run_dir,
    stft_config_from,
    write_features,
    write_jsonl,
)

ENHANCER_CROP_PURPOSE = 0x6563   # enhancer training crops, shared by baseline and finetune
ESTIMATOR_CROP_PURPOSE = 0x7463  # estimator regression crops
PRETRAIN_CROP_PURPOSE = 0x7063   # encoder pre-training crops


def _config_from_args(args, overrides: dict[str, object]) -> RunConfig:
    return RunConfig.load(getattr(args, "config", None), overrides=overrides)


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = _config_from_args(
        args,
        {
            "synth.n_utterances": args.n_utterances,
            "synth.duration_s": args.duration_s,
            "synth.snr_lo": args.snr_lo,
            "synth.snr_hi": args.snr_hi,
            "seed": args.seed,
        },
    )
    n = cfg["synth.n_utterances"]
    if n < 10:
        raise ValidationError(f"synth needs at least 10 utterances, got {n}")
    if cfg["synth.snr_hi"] < cfg["synth.snr_lo"]:
        raise ValidationError("snr-hi must be >= snr-lo")

    out = Path(args.out)
    for sub in ("clean", "noise", "noisy"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    base_seed = cfg["seed"]
    duration = cfg["synth.duration_s"]
    snr_rng = np.random.default_rng(np.random.SeedSequence([base_seed & 0xFFFFFFFF, 0x736E]))
    split_rng = np.random.default_rng(np.random.SeedSequence([base_seed & 0xFFFFFFFF, 0x7373]))

    order = split_rng.permutation(n)
    n_train = int(0.8 * n)
    n_val = int(0.1 * n)
    splits = {}
    for rank, idx in enumerate(order):
        splits[int(idx)] = "train" if rank < n_train else ("val" if rank < n_train + n_val else "test")

    entries: list[ManifestEntry] = []
    for i in range(n):
        utt_seed = base_seed * 100000 + i
        utt_id = f"utt_{i:04d}"
        clean = synth_utterance("harmonic_voice", duration, utt_seed, sample_rate=cfg["sample_rate"])
        noise = synth_utterance("noise", duration + 1.0, utt_seed, sample_rate=cfg["sample_rate"])
        # quantize to the stored precision before mixing so the manifest
        # SNR is exact with respect to the files on disk
        clean_q = Waveform(clean.samples.astype(np.float32).astype(np.float64), clean.sample_rate)
        noise_q = Waveform(noise.samples.astype(np.float32).astype(np.float64), noise.sample_rate)
        snr_db = float(snr_rng.uniform(cfg["synth.snr_lo"], cfg["synth.snr_hi"]))
        mix = mix_at_snr(clean_q, noise_q, MixSpec(snr_db=snr_db, seed=utt_seed))

        write_wav(out / "clean" / f"{utt_id}.wav", clean_q)
        write_wav(out / "noise" / f"{utt_id}.wav", noise_q)
        write_wav(out / "noisy" / f"{utt_id}.wav", mix.mixture)
        entries.append(
            ManifestEntry(
                utterance_id=utt_id,
                clean_path=f"clean/{utt_id}.wav",
                noise_path=f"noise/{utt_id}.wav",
                noisy_path=f"noisy/{utt_id}.wav",
                snr_db=snr_db,
                seed=utt_seed,
                split=splits[i],
            )
        )

    write_manifest(out / "manifest.jsonl", entries)
    (out / "effective_config.txt").write_text(cfg.render(), encoding="utf-8")
    default_registry().save(out / "registry.json")
    print(f"synth: wrote {n} utterances to {out} (train/val/test = "
          f"{n_train}/{n_val}/{n - n_train - n_val})")
    return 0


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------

def _resolve_which(which: str, manifest, entry: ManifestEntry) -> Path:
    if which == "clean":
        return manifest.resolve(entry.clean_path)
    if which == "noisy":
        return manifest.resolve(entry.noisy_path)
    if which.startswith("enhanced:"):
        return Path(which.split(":", 1)[1]) / f"{entry.utterance_id}.wav"
    raise ValidationError(f"--which must be clean, noisy, or enhanced:PATH, got {which!r}")


def cmd_extract(args) -> int:
    cfg = _config_from_args(args, {})
    manifest = load_manifest(args.manifest, check_files=False)
    entries = manifest.split(args.split)
    registry = default_registry()
    if registry.registry_id != cfg["registry.id"]:
        raise ValidationError(
            f"config registry {cfg['registry.id']!r} unavailable; this build provides {registry.registry_id!r}"
        )

    def work(entry: ManifestEntry):
        path = _resolve_which(args.which, manifest, entry)
        w = read_wav(path)
        try:
            return entry.utterance_id, extract_functionals(w, registry)
        except UnvoicedUtteranceError:
            return entry.utterance_id, None

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(work, entries))
    else:
        results = [work(e) for e in entries]

    rows = [(utt, fv) for utt, fv in results if fv is not None]
    skipped = [utt for utt, fv in results if fv is None]
    if not rows:
        raise ValidationError("no utterance produced functionals (all unvoiced?)")
    write_features(args.out, rows, registry)
    print(f"extract: {len(rows)} records -> {args.out} (skipped unvoiced: {len(skipped)})")
    if skipped:
        print("  skipped:", ", ".join(skipped))
    return 0


# ---------------------------------------------------------------------------
# training commands
# ---------------------------------------------------------------------------

def _estimator_config(cfg: RunConfig) -> EstimatorConfig:
    return EstimatorConfig(out_dim=default_registry().size, crop_frames=cfg["estimator.crop_frames"])


def cmd_pretrain(args) -> int:
    cfg = _config_from_args(args, {"seed": args.seed})
    run_dir, done = prepare_run_dir(args.out_dir, "pretrain", cfg, args.force)
    ckpt = run_dir / "encoder.ckpt"
    if done:
        print(f"pretrain: run {run_dir} already complete (use --force to redo)")
        return 0
    manifest = load_manifest(args.manifest)
    entries = manifest.split("train")
    crops, _ = build_crops(
        manifest, entries, cfg,
        crops_per_utterance=cfg["pretrain.crops_per_utterance"],
        purpose=PRETRAIN_CROP_PURPOSE, with_noisy=False, with_targets=False,
    )
    mags = [crop_magnitude(c.clean, cfg) for c in crops]
    est_cfg = _estimator_config(cfg)
    encoder, norm, history = pretrain_encoder(
        mags, est_cfg,
        PretrainConfig(
            epochs=cfg["pretrain.epochs"], lr=cfg["pretrain.lr"],
            batch=cfg["pretrain.batch"], seed=cfg["seed"],
        ),
    )
    encoder.eval()
    save_checkpoint(
        ckpt, encoder,
        extra={
            "estimator_config": est_cfg.to_dict(),
            "input_norm": norm.to_dict(),
            "stft_config": stft_config_from(cfg).to_dict(),
            "registry_id": default_registry().registry_id,
        },
    )
    write_jsonl(run_dir / "metrics.jsonl", history)
    mark_done(run_dir)
    print(f"pretrain: encoder -> {ckpt} (recon mse {history[0]['recon_mse']:.4f} -> {history[-1]['recon_mse']:.4f})")
    return 0


def cmd_train_estimator(args) -> int:
    cfg = _config_from_args(args, {"seed": args.seed})
    run_dir, done = prepare_run_dir(args.out_dir, "train-estimator", cfg, args.force)
    ckpt_path = run_dir / "estimator.ckpt"
    if done:
        print(f"train-estimator: run {run_dir} already complete (use --force to redo)")
        return 0
    encoder_path = Path(args.encoder)
    if not encoder_path.exists():
        raise ValidationError(
            f"encoder checkpoint {encoder_path} not found; produce it with: "
            f"egeopt pretrain --manifest {args.manifest} --out-dir {args.out_dir}"
        )
    encoder, enc_header = load_checkpoint(encoder_path)
    manifest = load_manifest(args.manifest)
    registry = default_registry()
    if enc_header["registry_id"] != registry.registry_id:
        raise ValidationError(
            f"encoder was pre-trained for registry {enc_header['registry_id']!r}, "
            f"pipeline uses {registry.registry_id!r}"
        )
    entries = manifest.split("train")
    crops, skipped = build_crops(
        manifest, entries, cfg,
        crops_per_utterance=cfg["estimator.crops_per_utterance"],
        purpose=ESTIMATOR_CROP_PURPOSE, with_noisy=False, with_targets=True,
        registry=registry,
    )
    pairs = [(crop_magnitude(c.clean, cfg), c.target.values) for c in crops]
    est_cfg = EstimatorConfig.from_dict(enc_header["estimator_config"])
    from ..estimator.model import InputNorm

    norm = InputNorm.from_dict(enc_header["input_norm"])
    scaling_dims = [
        i for i, name in enumerate(registry.functional_names()) if name.startswith("rms.")
    ]
    params, scaler, norm, metrics = train_estimator(
        pairs, est_cfg,
        TrainEstimatorConfig(
            epochs=cfg["estimator.epochs"], lr=cfg["estimator.lr"],
            batch=cfg["estimator.batch"], freeze_encoder=cfg["estimator.freeze_encoder"],
            val_fraction=cfg["estimator.val_fraction"], seed=cfg["seed"],
        ),
        encoder=encoder, input_norm=norm, registry_id=registry.registry_id,
        amp_scaling_dims=scaling_dims,
    )
    est = Estimator(
        params=params, config=est_cfg, input_norm=norm, scaler=scaler,
        stft_config=stft_config_from(cfg), registry_id=registry.registry_id,
    )
    save_checkpoint(ckpt_path, params, extra=est.header_extra())
    write_jsonl(run_dir / "metrics.jsonl", metrics)
    mark_done(run_dir)
    print(
        f"train-estimator: {len(pairs)} pairs (skipped {skipped}), "
        f"val mse {metrics[0]['val_mse']:.4f} -> {metrics[-1]['val_mse']:.4f} -> {ckpt_path}"
    )
    return 0


def _load_estimator(path) -> Estimator:
    params, header = load_checkpoint(path)
    return Estimator.from_checkpoint_parts(params, header, sha256=file_sha256(path))


def _run_enhancer_training(
    args,
    cfg: RunConfig,
    command: str,
    init_params,
    lam: float,
    fix_estimator: bool,
    epochs: int,
    lr: float,
    batch: int,
    estimator: Estimator | None,
) -> int:
    run_dir, done = prepare_run_dir(args.out_dir, command, cfg, args.force)
    ckpt_path = run_dir / "enhancer.ckpt"
    if done:
        print(f"{command}: run {run_dir} already complete (use --force to redo)")
        return 0
    manifest = load_manifest(args.manifest)
    registry = default_registry()
    entries = manifest.split("train")
    need_targets = lam > 0.0
    crops_raw, skipped = build_crops(
        manifest, entries, cfg,
        crops_per_utterance=cfg["enhancer.crops_per_utterance"],
        purpose=ENHANCER_CROP_PURPOSE, with_noisy=True, with_targets=need_targets,
        registry=registry if need_targets else None,
    )
    if need_targets and estimator is not None:
        crops = [
            TrainCrop(
                utterance_id=c.utterance_id, noisy=c.noisy, clean=c.clean,
                target_std=estimator.scaler.standardize(c.target.values),
            )
            for c in crops_raw
        ]
    else:
        crops = [
            TrainCrop(utterance_id=c.utterance_id, noisy=c.noisy, clean=c.clean)
            for c in crops_raw
        ]

    enh_cfg = EnhancerConfig()
    tune = FineTuneConfig(
        lam=lam, fix_estimator=fix_estimator, epochs=epochs, lr=lr, batch=batch, seed=cfg["seed"],
    )
    try:
        params, breakdown = train_enhancer(
            init_params, crops, enh_cfg, stft_config_from(cfg), tune, estimator=estimator
        )
    except NumericalError as exc:
        last_good = getattr(exc, "last_good", None)
        if last_good is not None:
            last_good.eval()
            save_checkpoint(run_dir / "enhancer_last_good.ckpt", last_good, extra={
                "enhancer_config": enh_cfg.to_dict(),
                "stft_config": stft_config_from(cfg).to_dict(),
                "lambda": lam,
                "estimator_checkpoint_hash": None,
            })
            raise NumericalError(f"{exc}; last good checkpoint at {run_dir / 'enhancer_last_good.ckpt'}") from exc
        raise

    params.eval()
    save_checkpoint(
        ckpt_path, params,
        extra={
            "enhancer_config": enh_cfg.to_dict(),
            "stft_config": stft_config_from(cfg).to_dict(),
            "lambda": lam,
            "estimator_checkpoint_hash": estimator.checkpoint_sha256 if (estimator and lam > 0.0) else None,
        },
    )
    write_jsonl(run_dir / "loss_history.jsonl", breakdown.history)
    mark_done(run_dir)
    last = breakdown.last
    print(
        f"{command}: {len(crops)} crops (skipped {skipped}), lambda={lam}, "
        f"final losses orig={last['original']:.4f} ege={last['egemaps']:.4f} -> {ckpt_path}"
    )
    return 0


def cmd_train_baseline(args) -> int:
    cfg = _config_from_args(args, {"seed": args.seed})
    if args.init is not None:
        init_path = Path(args.init)
        if not init_path.exists():
            raise ValidationError(f"init checkpoint {init_path} not found")
        init_params, header = load_checkpoint(init_path)
        _check_enhancer_header(header, cfg)
    else:
        init_params = init_enhancer_params(EnhancerConfig(), seed=cfg["seed"])
    return _run_enhancer_training(
        args, cfg, "train-baseline", init_params,
        lam=0.0, fix_estimator=True,
        epochs=cfg["enhancer.epochs"], lr=cfg["enhancer.lr"], batch=cfg["enhancer.batch"],
        estimator=None,
    )


def cmd_finetune(args) -> int:
    overrides: dict[str, object] = {"seed": args.seed}
    if args.lam is not None:
        overrides["finetune.lambda"] = args.lam
    if args.fix_estimator is not None:
        overrides["finetune.fix_estimator"] = args.fix_estimator
    if args.epochs is not None:
        overrides["finetune.epochs"] = args.epochs
    cfg = _config_from_args(args, overrides)

    baseline_path = Path(args.baseline)
    if not baseline_path.exists():
        raise ValidationError(
            f"baseline checkpoint {baseline_path} not found; produce it with: "
            f"egeopt train-baseline --manifest {args.manifest} --out-dir {args.out_dir}"
        )
    init_params, header = load_checkpoint(baseline_path)
    _check_enhancer_header(header, cfg)

    lam = cfg["finetune.lambda"]
    estimator = None
    if lam > 0.0:
        if args.estimator is None:
            raise ValidationError(
                "fine-tuning with lambda > 0 needs --estimator CKPT; produce it with: "
                f"egeopt train-estimator --manifest {args.manifest} --encoder ENC --out-dir {args.out_dir}"
            )
        est_path = Path(args.estimator)
        if not est_path.exists():
            raise ValidationError(
                f"estimator checkpoint {est_path} not found; produce it with: "
                f"egeopt train-estimator --manifest {args.manifest} --encoder ENC --out-dir {args.out_dir}"
            )
        estimator = _load_estimator(est_path)
        if estimator.stft_config != stft_config_from(cfg):
            raise ValidationError(
                "estimator/enhancer STFT config mismatch:\n"
                f"  estimator: {estimator.stft_config}\n  pipeline:  {stft_config_from(cfg)}"
            )
    return _run_enhancer_training(
        args, cfg, "finetune", init_params,
        lam=lam, fix_estimator=cfg["finetune.fix_estimator"],
        epochs=cfg["finetune.epochs"], lr=cfg["finetune.lr"], batch=cfg["finetune.batch"],
        estimator=estimator,
    )


def _check_enhancer_header(header: dict, cfg: RunConfig) -> None:
    ckpt_stft = StftConfig.from_dict(header["stft_config"])
    pipeline_stft = stft_config_from(cfg)
    if ckpt_stft != pipeline_stft:
        raise ValidationError(
            "checkpoint STFT config does not match pipeline:\n"
            f"  checkpoint: {ckpt_stft}\n  pipeline:   {pipeline_stft}"
        )


# ---------------------------------------------------------------------------
# enhance
# ---------------------------------------------------------------------------

def cmd_enhance(args) -> int:
    cfg = _config_from_args(args, {})
    params, header = load_checkpoint(args.model)
    _check_enhancer_header(header, cfg)
    enh_cfg = EnhancerConfig.from_dict(header["enhancer_config"])
    params.eval()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stft_cfg = stft_config_from(cfg)

    in_path = Path(args.input)
    if in_path.suffix == ".jsonl":
        manifest = load_manifest(in_path, check_files=False)
        entries = manifest.split(args.split)
        jobs = []
        for e in entries:
            jobs.append((e.utterance_id, manifest.resolve(e.noisy_path)))
    else:
        jobs = [(in_path.stem, in_path)]

    def work(item):
        utt_id, path = item
        w = read_wav(path)
        result = enhance(w, params, enh_cfg, stft_cfg)
        if result.enhanced.num_samples != w.num_samples:
            raise NumericalError(
                f"enhanced output for {utt_id!r} has {result.enhanced.num_samples} samples, input had {w.num_samples}"
            )
        write_wav(out / f"{utt_id}.wav", result.enhanced)
        return utt_id

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            done = list(pool.map(work, jobs))
    else:
        done = [work(j) for j in jobs]
    print(f"enhance: wrote {len(done)} files to {out}")
    return 0


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    cfg = _config_from_args(args, {})
    registry = default_registry()
    names = registry.functional_names()

    clean, reg_clean = load_features(args.clean)
    conditions: dict[str, dict[str, np.ndarray]] = {}
    for cond_name, path in (
        ("enhanced_baseline", args.baseline),
        ("enhanced_finetuned", args.finetuned),
        ("noisy", args.noisy),
    ):
        if path is None:
            continue
        values, reg = load_features(path)
        if reg != reg_clean:
            raise ValidationError(f"registry mismatch: {args.clean} has {reg_clean}, {path} has {reg}")
        conditions[cond_name] = values

    if "enhanced_baseline" not in conditions or "enhanced_finetuned" not in conditions:
        raise ValidationError("analyze needs --baseline and --finetuned feature files")

    if args.allow_unpaired:
        common = set(clean)
        for values in conditions.values():
            common &= set(values)
        if len(common) < 2:
            raise ValidationError("fewer than 2 utterances shared by all conditions")
        clean = {k: clean[k] for k in sorted(common)}
        conditions = {c: {k: v[k] for k in sorted(common)} for c, v in conditions.items()}

    stats = compute_stats(clean, reg_clean)
    diff_records = {
        cond: compute_diffs(clean, values, stats, cond) for cond, values in conditions.items()
    }

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    all_rows = []
    for cond in sorted(diff_records):
        for r in diff_records[cond]:
            all_rows.append(r.to_dict())
    write_jsonl(out / "diffs.jsonl", all_rows)

    base = mean_abs_diff(diff_records["enhanced_baseline"])
    ft = mean_abs_diff(diff_records["enhanced_finetuned"])
    pct = percent_improvement(diff_records["enhanced_baseline"], diff_records["enhanced_finetuned"])
    imp_lines = ["functional,baseline_mean_abs_d,finetuned_mean_abs_d,percent_improvement"]
    for i, name in enumerate(names):
        pct_text = "n/a" if np.isnan(pct[i]) else repr(float(pct[i]))
        imp_lines.append(f"{name},{base[i]!r},{ft[i]!r},{pct_text}")
    (out / "improvement.csv").write_text("\n".join(imp_lines) + "\n", encoding="utf-8")

    hist_lines = ["functional,condition,bin_left,bin_right,probability"]
    for i, name in enumerate(names):
        spec = HistogramSpec(functional=name, index=i, bins=cfg["analysis.bins"],
                             range_limit=cfg["analysis.range"])
        for cond in sorted(diff_records):
            summary = summarize_distribution(diff_records[cond], spec)
            for b in range(summary.probabilities.size):
                hist_lines.append(
                    f"{name},{cond},{summary.edges[b]!r},{summary.edges[b + 1]!r},{summary.probabilities[b]!r}"
                )
    (out / "histogram.csv").write_text("\n".join(hist_lines) + "\n", encoding="utf-8")

    improved = int(np.sum(pct[np.isfinite(pct)] > 0.0))
    applicable = int(np.sum(np.isfinite(pct)))
    summary_lines = [
        f"utterances analyzed: {len(clean)}",
        f"functionals: {len(names)} ({applicable} applicable for improvement)",
    ]
    for cond in sorted(diff_records):
        agg = float(np.mean(mean_abs_diff(diff_records[cond])))
        summary_lines.append(f"mean |d| [{cond}]: {agg:.6f}")
    agg_base = float(np.mean(base))
    agg_ft = float(np.mean(ft))
    reduction = 100.0 * (agg_base - agg_ft) / agg_base if agg_base > 0 else float("nan")
    summary_lines.append(f"aggregate mean |d| reduction: {reduction:.2f}%")
    summary_lines.append(f"functionals improved: {improved}/{applicable}")
    (out / "summary.txt").write_text("\n".join(summary_lines) + "\n", encoding="utf-8")
    print("\n".join(summary_lines))
    return 0


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------

def cmd_gradcheck(args) -> int:
    from . import gradcheck_cmd

    return gradcheck_cmd.run(args.module)


# ---------------------------------------------------------------------------
# parser / dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="egeopt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seed=True):
        p.add_argument("--config", default=None, help="key = value config file")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="override config seed")

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-utterances", type=int, default=None)
    p.add_argument("--duration-s", type=float, default=None)
    p.add_argument("--snr-lo", type=float, default=None)
    p.add_argument("--snr-hi", type=float, default=None)
    add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="oracle functionals for manifest audio")
    p.add_argument("--manifest", required=True)
    p.add_argument("--which", required=True, help="clean | noisy | enhanced:PATH")
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="all")
    p.add_argument("--jobs", type=int, default=1)
    add_common(p, seed=False)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("pretrain", help="reconstruction pre-training of the encoder")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--force", action="store_true")
    add_common(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train-estimator", help="train the functional estimator")
    p.add_argument("--manifest", required=True)
    p.add_argument("--encoder", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--force", action="store_true")
    add_common(p)
    p.set_defaults(func=cmd_train_estimator)

    p = sub.add_parser("train-baseline", help="train the enhancer with lambda = 0")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--init", default=None, help="continue from an enhancer checkpoint")
    p.add_argument("--force", action="store_true")
    add_common(p)
    p.set_defaults(func=cmd_train_baseline)

    p = sub.add_parser("finetune", help="fine-tune the enhancer with the matching loss")
    p.add_argument("--manifest", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--estimator", default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--fix-estimator", choices=("true", "false"), default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--force", action="store_true")
    add_common(p)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("enhance", help="run the enhancer over a manifest or WAV")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="all")
    p.add_argument("--jobs", type=int, default=1)
    add_common(p, seed=False)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("analyze", help="standardized-difference analysis")
    p.add_argument("--clean", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--finetuned", required=True)
    p.add_argument("--noisy", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--allow-unpaired", action="store_true",
                   help="intersect utterance ids instead of rejecting unpaired files")
    add_common(p, seed=False)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("gradcheck", help="finite-difference verification suites")
    p.add_argument("--module", default="all", choices=("all", "autodiff", "estimator", "pipeline"))
    add_common(p, seed=False)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (AudioIOError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
