"""Run configuration: `key = value` text files over typed defaults.

Precedence: built-in defaults < config file < EGEOPT_SEED env var < explicit
CLI flags. Unknown keys are rejected. The effective config is echoed into
every run directory and hashed to content-address it.
"""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

from ..errors import ValidationError

DEFAULTS: dict[str, object] = {
    "seed": 0,
    "sample_rate": 16000,
    "stft.fft_size": 512,
    "stft.hop": 160,
    "registry.id": "egeopt-reduced-50-v1",
    "synth.n_utterances": 200,
    "synth.duration_s": 4.0,
    "synth.snr_lo": 0.0,
    "synth.snr_hi": 40.0,
    "pretrain.epochs": 6,
    "pretrain.lr": 1e-3,
    "pretrain.batch": 16,
    "pretrain.crops_per_utterance": 1,
    "estimator.epochs": 42,
    "estimator.lr": 2e-3,
    "estimator.batch": 16,
    "estimator.freeze_encoder": False,
    "estimator.val_fraction": 0.1,
    "estimator.crop_frames": 64,
    "estimator.crops_per_utterance": 12,
    "enhancer.epochs": 4,
    "enhancer.lr": 1e-3,
    "enhancer.batch": 8,
    "enhancer.crops_per_utterance": 2,
    "finetune.lambda": 1.0,
    "finetune.fix_estimator": True,
    "finetune.epochs": 10,
    "finetune.lr": 1e-3,
    "finetune.batch": 8,
    "analysis.bins": 61,
    "analysis.range": 3.0,
}


def _parse_value(key: str, raw: str, default) -> object:
    raw = raw.strip()
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValidationError(f"config key {key!r}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError:
            raise ValidationError(f"config key {key!r}: expected an integer, got {raw!r}") from None
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError:
            raise ValidationError(f"config key {key!r}: expected a number, got {raw!r}") from None
    return raw


class RunConfig:
    """Typed flat config with dotted section keys."""

    def __init__(self, values: dict[str, object] | None = None):
        self._values = dict(DEFAULTS)
        if values:
            for key, value in values.items():
                self.set(key, value)

    @classmethod
    def load(cls, path=None, overrides: dict[str, object] | None = None) -> "RunConfig":
        cfg = cls()
        if path is not None:
            text = Path(path).read_text(encoding="utf-8")
            for lineno, line in enumerate(text.splitlines(), start=1):
                stripped = line.split("#", 1)[0].strip()
                if not stripped:
                    continue
                if "=" not in stripped:
                    raise ValidationError(f"{path}:{lineno}: expected `key = value`, got {line!r}")
                key, raw = stripped.split("=", 1)
                cfg.set_text(key.strip(), raw)
        env_seed = os.environ.get("EGEOPT_SEED")
        if env_seed is not None:
            cfg.set_text("seed", env_seed)
        if overrides:
            for key, value in overrides.items():
                if value is not None:
                    cfg.set(key, value)
        return cfg

    def set_text(self, key: str, raw: str) -> None:
        if key not in DEFAULTS:
            raise ValidationError(f"unknown config key {key!r}")
        self._values[key] = _parse_value(key, raw, DEFAULTS[key])

    def set(self, key: str, value: object) -> None:
        if key not in DEFAULTS:
            raise ValidationError(f"unknown config key {key!r}")
        default = DEFAULTS[key]
        if isinstance(default, bool) and isinstance(value, str):
            value = _parse_value(key, value, default)
        elif isinstance(default, (int, float)) and not isinstance(value, (int, float)):
            value = _parse_value(key, str(value), default)
        if isinstance(default, bool):
            value = bool(value)
        elif isinstance(default, int) and not isinstance(default, bool):
            value = int(value)
        elif isinstance(default, float):
            value = float(value)
        self._values[key] = value

    def __getitem__(self, key: str):
        if key not in DEFAULTS:
            raise ValidationError(f"unknown config key {key!r}")
        return self._values[key]

    def render(self) -> str:
        lines = []
        for key in sorted(self._values):
            value = self._values[key]
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def digest(self, command: str) -> str:
        payload = f"command = {command}\n" + self.render()
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()
