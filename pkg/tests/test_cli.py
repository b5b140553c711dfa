"""CLI pipeline: config parsing, synth determinism, extract, run dirs, exit codes."""

import json
import os
from pathlib import Path

import numpy as np
import pytest

from egeopt.cli.config import RunConfig
from egeopt.cli.main import main
from egeopt.cli.manifest import load_manifest
from egeopt.dsp import MixSpec, Waveform, mix_at_snr, read_wav
from egeopt.errors import ValidationError


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def test_config_defaults_and_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nsynth.n_utterances = 25\nfinetune.lambda = 0.5\nestimator.freeze_encoder = false\n")
    cfg = RunConfig.load(path)
    assert cfg["synth.n_utterances"] == 25
    assert cfg["finetune.lambda"] == 0.5
    assert cfg["estimator.freeze_encoder"] is False
    assert cfg["stft.fft_size"] == 512


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("synth.n_uterances = 25\n")
    with pytest.raises(ValidationError, match="unknown config key"):
        RunConfig.load(path)


def test_config_rejects_bad_types(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("synth.n_utterances = many\n")
    with pytest.raises(ValidationError, match="integer"):
        RunConfig.load(path)


def test_config_env_seed_override(tmp_path, monkeypatch):
    monkeypatch.setenv("EGEOPT_SEED", "77")
    cfg = RunConfig.load(None)
    assert cfg["seed"] == 77
    cfg2 = RunConfig.load(None, overrides={"seed": 5})
    assert cfg2["seed"] == 5  # explicit flag beats env


def test_config_digest_changes_with_values():
    a = RunConfig.load(None)
    b = RunConfig.load(None, overrides={"finetune.lambda": 2.0})
    assert a.digest("finetune") != b.digest("finetune")
    assert a.digest("finetune") != a.digest("train-baseline")


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    code = run_cli(
        "synth", "--out", out, "--n-utterances", 12, "--duration-s", 1.5, "--seed", 11,
    )
    assert code == 0
    return out


def test_synth_writes_dataset(small_dataset):
    manifest = load_manifest(small_dataset / "manifest.jsonl")
    assert len(manifest.entries) == 12
    splits = {e.split for e in manifest.entries}
    assert splits == {"train", "val", "test"}
    ids = [e.utterance_id for e in manifest.entries]
    assert len(set(ids)) == 12


def test_synth_rerun_is_byte_identical(small_dataset, tmp_path):
    out2 = tmp_path / "data2"
    assert run_cli("synth", "--out", out2, "--n-utterances", 12, "--duration-s", 1.5, "--seed", 11) == 0
    for rel in ["manifest.jsonl", "clean/utt_0003.wav", "noisy/utt_0007.wav", "noise/utt_0000.wav"]:
        assert (small_dataset / rel).read_bytes() == (out2 / rel).read_bytes(), rel


def test_synth_mixtures_reproducible_from_parts(small_dataset):
    manifest = load_manifest(small_dataset / "manifest.jsonl")
    e = manifest.entries[0]
    clean = read_wav(manifest.resolve(e.clean_path))
    noise = read_wav(manifest.resolve(e.noise_path))
    res = mix_at_snr(clean, noise, MixSpec(snr_db=e.snr_db, seed=e.seed))
    stored = read_wav(manifest.resolve(e.noisy_path))
    # the stored file is the float32 quantization of the recomputed mixture
    np.testing.assert_array_equal(
        stored.samples, res.mixture.samples.astype(np.float32).astype(np.float64)
    )
    crop = noise.samples[res.noise_offset : res.noise_offset + clean.num_samples]
    measured = 10 * np.log10(np.mean(clean.samples**2) / np.mean((res.noise_scale * crop) ** 2))
    assert abs(measured - e.snr_db) < 1e-9


def test_synth_snrs_cover_range_uniformly(tmp_path):
    out = tmp_path / "snr"
    assert run_cli("synth", "--out", out, "--n-utterances", 60, "--duration-s", 0.8,
                   "--snr-lo", 0, "--snr-hi", 40, "--seed", 2) == 0
    manifest = load_manifest(out / "manifest.jsonl")
    snrs = np.array([e.snr_db for e in manifest.entries])
    assert snrs.min() >= 0.0 and snrs.max() <= 40.0
    # one-sample KS against uniform at the 5% level: D_crit = 1.36 / sqrt(n)
    sorted_u = np.sort(snrs) / 40.0
    n = len(sorted_u)
    grid = np.arange(1, n + 1) / n
    d_stat = max(np.max(np.abs(grid - sorted_u)), np.max(np.abs(sorted_u - (grid - 1 / n))))
    assert d_stat < 1.36 / np.sqrt(n)


def test_synth_degenerate_snr_range(tmp_path):
    out = tmp_path / "snr10"
    assert run_cli("synth", "--out", out, "--n-utterances", 10, "--duration-s", 0.6,
                   "--snr-lo", 10, "--snr-hi", 10, "--seed", 3) == 0
    manifest = load_manifest(out / "manifest.jsonl")
    for e in manifest.entries:
        assert abs(e.snr_db - 10.0) < 1e-9
        clean = read_wav(manifest.resolve(e.clean_path))
        noise = read_wav(manifest.resolve(e.noise_path))
        res = mix_at_snr(clean, noise, MixSpec(snr_db=e.snr_db, seed=e.seed))
        crop = noise.samples[res.noise_offset : res.noise_offset + clean.num_samples]
        measured = 10 * np.log10(np.mean(clean.samples**2) / np.mean((res.noise_scale * crop) ** 2))
        assert abs(measured - 10.0) < 1e-9


def test_synth_rejects_tiny_dataset(tmp_path, capsys):
    assert run_cli("synth", "--out", tmp_path / "x", "--n-utterances", 5) == 1
    assert "at least 10" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------

def test_extract_clean_features(small_dataset, tmp_path):
    out = tmp_path / "feats.jsonl"
    assert run_cli("extract", "--manifest", small_dataset / "manifest.jsonl",
                   "--which", "clean", "--out", out) == 0
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(rows) == 12
    assert all(len(r["values"]) == 50 for r in rows)
    csv_lines = out.with_suffix(".csv").read_text().splitlines()
    assert csv_lines[0].startswith("utterance_id,f0.mean,f0.std")
    assert out.with_suffix(".registry.json").exists()


def test_extract_deterministic_across_jobs(small_dataset, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run_cli("extract", "--manifest", small_dataset / "manifest.jsonl",
                   "--which", "noisy", "--out", a, "--jobs", 1) == 0
    assert run_cli("extract", "--manifest", small_dataset / "manifest.jsonl",
                   "--which", "noisy", "--out", b, "--jobs", 3) == 0
    assert a.read_bytes() == b.read_bytes()


def test_extract_bad_which(small_dataset, tmp_path, capsys):
    assert run_cli("extract", "--manifest", small_dataset / "manifest.jsonl",
                   "--which", "raw", "--out", tmp_path / "x.jsonl") == 1


def test_missing_manifest_is_validation_error(tmp_path):
    assert run_cli("extract", "--manifest", tmp_path / "nope.jsonl",
                   "--which", "clean", "--out", tmp_path / "x.jsonl") == 1


# ---------------------------------------------------------------------------
# gradcheck command
# ---------------------------------------------------------------------------

def test_gradcheck_autodiff_module(capsys):
    assert run_cli("gradcheck", "--module", "autodiff") == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


# ---------------------------------------------------------------------------
# run directories
# ---------------------------------------------------------------------------

def test_run_dirs_content_addressed(tmp_path):
    from egeopt.cli.pipeline import mark_done, prepare_run_dir

    cfg = RunConfig.load(None)
    d1, done1 = prepare_run_dir(tmp_path, "pretrain", cfg, force=False)
    assert not done1
    assert (d1 / "effective_config.txt").exists()
    mark_done(d1)
    d2, done2 = prepare_run_dir(tmp_path, "pretrain", cfg, force=False)
    assert d2 == d1 and done2
    d3, done3 = prepare_run_dir(tmp_path, "pretrain", cfg, force=True)
    assert d3 == d1 and not done3
    cfg2 = RunConfig.load(None, overrides={"seed": 9})
    d4, _ = prepare_run_dir(tmp_path, "pretrain", cfg2, force=False)
    assert d4 != d1
