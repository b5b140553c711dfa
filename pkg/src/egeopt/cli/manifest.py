"""Dataset manifest: one JSON line per utterance."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import ValidationError

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ManifestEntry:
    utterance_id: str
    clean_path: str
    noise_path: str
    noisy_path: str
    snr_db: float
    seed: int
    split: str

    def to_dict(self) -> dict:
        return {
            "utterance_id": self.utterance_id,
            "clean_path": self.clean_path,
            "noise_path": self.noise_path,
            "noisy_path": self.noisy_path,
            "snr_db": self.snr_db,
            "seed": self.seed,
            "split": self.split,
        }


@dataclass(frozen=True)
class Manifest:
    root: Path
    entries: tuple[ManifestEntry, ...]

    def split(self, name: str) -> list[ManifestEntry]:
        if name == "all":
            return list(self.entries)
        if name not in SPLITS:
            raise ValidationError(f"unknown split {name!r}; expected one of {SPLITS} or 'all'")
        return [e for e in self.entries if e.split == name]

    def resolve(self, relative: str) -> Path:
        return self.root / relative


def write_manifest(path, entries: list[ManifestEntry]) -> None:
    lines = [json.dumps(e.to_dict(), sort_keys=True) for e in entries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_manifest(path, check_files: bool = True) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"manifest {path} does not exist")
    entries = []
    seen: set[str] = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        entry = ManifestEntry(
            utterance_id=str(d["utterance_id"]),
            clean_path=str(d["clean_path"]),
            noise_path=str(d["noise_path"]),
            noisy_path=str(d["noisy_path"]),
            snr_db=float(d["snr_db"]),
            seed=int(d["seed"]),
            split=str(d["split"]),
        )
        if entry.utterance_id in seen:
            raise ValidationError(f"{path}:{lineno}: duplicate utterance id {entry.utterance_id!r}")
        if entry.split not in SPLITS:
            raise ValidationError(f"{path}:{lineno}: unknown split {entry.split!r}")
        seen.add(entry.utterance_id)
        entries.append(entry)
    manifest = Manifest(root=path.parent, entries=tuple(entries))
    if check_files:
        for e in entries:
            for rel in (e.clean_path, e.noise_path, e.noisy_path):
                if not manifest.resolve(rel).exists():
                    raise ValidationError(f"manifest references missing file {rel!r}")
    return manifest
