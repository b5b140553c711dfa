"""Shared pipeline plumbing: feature files, crop building, run directories."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import UnvoicedUtteranceError, ValidationError
from ..dsp.stft import StftConfig, stft
from ..dsp.waveform import Waveform
from ..dsp.wavio import read_wav
from ..features.extract import FunctionalVector, extract_functionals
from ..features.registry import FeatureRegistry
from ..enhance.stft_bridge import waveform_crop_frames
from .config import RunConfig
from .manifest import Manifest, ManifestEntry


def stft_config_from(cfg: RunConfig) -> StftConfig:
    return StftConfig(
        fft_size=cfg["stft.fft_size"],
        hop=cfg["stft.hop"],
        sample_rate=cfg["sample_rate"],
    )


# ---------------------------------------------------------------------------
# feature files
# ---------------------------------------------------------------------------

def write_features(path, rows: list[tuple[str, FunctionalVector]], registry: FeatureRegistry) -> None:
    """JSON-lines + CSV + registry JSON next to the output path."""
    path = Path(path)
    lines = []
    for utt_id, fv in rows:
        if fv.registry_id != registry.registry_id:
            raise ValidationError(
                f"registry mismatch for {utt_id!r}: {fv.registry_id} vs {registry.registry_id}"
            )
        lines.append(
            json.dumps(
                {
                    "utterance_id": utt_id,
                    "registry_id": fv.registry_id,
                    "values": [float(v) for v in fv.values],
                },
                sort_keys=True,
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    csv_path = path.with_suffix(".csv")
    header = ",".join(["utterance_id"] + registry.functional_names())
    csv_lines = [header]
    for utt_id, fv in rows:
        csv_lines.append(",".join([utt_id] + [repr(float(v)) for v in fv.values]))
    csv_path.write_text("\n".join(csv_lines) + "\n", encoding="utf-8")

    registry.save(path.with_suffix(".registry.json"))


def load_features(path) -> tuple[dict[str, np.ndarray], str]:
    """Read a features.jsonl file -> (id -> vector, registry_id)."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"feature file {path} does not exist")
    values: dict[str, np.ndarray] = {}
    registry_id = None
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        d = json.loads(line)
        if registry_id is None:
            registry_id = d["registry_id"]
        elif registry_id != d["registry_id"]:
            raise ValidationError(f"{path}:{lineno}: mixed registry ids in one file")
        values[d["utterance_id"]] = np.asarray(d["values"], dtype=np.float64)
    if not values:
        raise ValidationError(f"feature file {path} is empty")
    return values, registry_id


def write_jsonl(path, rows: list[dict]) -> None:
    Path(path).write_text(
        "\n".join(json.dumps(r, sort_keys=True) for r in rows) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# crop building
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class UtteranceCrop:
    utterance_id: str
    clean: np.ndarray
    noisy: np.ndarray | None
    target: FunctionalVector | None


def crop_samples_for(cfg: RunConfig) -> int:
    return waveform_crop_frames(stft_config_from(cfg), cfg["estimator.crop_frames"])


def build_crops(
    manifest: Manifest,
    entries: list[ManifestEntry],
    cfg: RunConfig,
    *,
    crops_per_utterance: int,
    purpose: int,
    with_noisy: bool,
    with_targets: bool,
    registry: FeatureRegistry | None = None,
) -> tuple[list[UtteranceCrop], int]:
    """Seeded fixed-length crops from manifest WAVs.

    Offsets depend only on (config seed, purpose, utterance index), so every
    command that uses the same purpose sees identical crops. Crops whose
    clean part has too few voiced frames are skipped; the skip count is
    returned.
    """
    if with_targets and registry is None:
        raise ValidationError("target extraction requires a registry")
    crop_len = crop_samples_for(cfg)
    base_seed = cfg["seed"]
    crops: list[UtteranceCrop] = []
    skipped = 0
    for idx, entry in enumerate(entries):
        clean = read_wav(manifest.resolve(entry.clean_path))
        noisy = read_wav(manifest.resolve(entry.noisy_path)) if with_noisy else None
        if clean.num_samples < crop_len:
            raise ValidationError(
                f"utterance {entry.utterance_id!r} shorter than one {crop_len}-sample crop"
            )
        rng = np.random.default_rng(
            np.random.SeedSequence([base_seed & 0xFFFFFFFF, purpose, idx])
        )
        offsets = rng.integers(0, clean.num_samples - crop_len + 1, size=crops_per_utterance)
        for k, off in enumerate(offsets):
            off = int(off)
            clean_crop = clean.samples[off : off + crop_len]
            target = None
            if with_targets:
                try:
                    target = extract_functionals(
                        Waveform(clean_crop, clean.sample_rate), registry
                    )
                except UnvoicedUtteranceError:
                    skipped += 1
                    continue
            crops.append(
                UtteranceCrop(
                    utterance_id=f"{entry.utterance_id}#{k}",
                    clean=clean_crop,
                    noisy=None if noisy is None else noisy.samples[off : off + crop_len],
                    target=target,
                )
            )
    return crops, skipped


def crop_magnitude(crop: np.ndarray, cfg: RunConfig) -> np.ndarray:
    sc = stft_config_from(cfg)
    return stft(Waveform(crop, sc.sample_rate), fft_size=sc.fft_size, hop=sc.hop).magnitude()


# ---------------------------------------------------------------------------
# run directories
# ---------------------------------------------------------------------------

DONE_MARKER = "DONE"


def prepare_run_dir(out_dir, command: str, cfg: RunConfig, force: bool) -> tuple[Path, bool]:
    """Content-addressed run directory; returns (path, already_done)."""
    run_dir = Path(out_dir) / f"{command}-{cfg.digest(command)[:12]}"
    done = run_dir / DONE_MARKER
    if done.exists() and not force:
        return run_dir, True
    run_dir.mkdir(parents=True, exist_ok=True)
    if done.exists():
        done.unlink()
    (run_dir / "effective_config.txt").write_text(cfg.render(), encoding="utf-8")
    return run_dir, False


def mark_done(run_dir: Path) -> None:
    (Path(run_dir) / DONE_MARKER).write_text("ok\n", encoding="utf-8")
