"""Training configuration: a flat dataclass with INI overlay and a stable hash."""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path


@dataclass
class TrainConfig:
    data: str = ""  # IDX path, or "toy" for the 2x2 two-mode problem
    subset_n: int = 0  # 0 keeps every image
    subset_seed: int = 0
    transform: str = "identity"
    seed: int = 0
    batch_size: int = 64
    steps: int = 1000
    d_steps: int = 1
    arch: str = "dcgan"  # "dcgan" for 28x28 images, "mlp" for the toy
    latent_dim: int = 64
    hidden: int = 32  # mlp width
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    loss: str = "nonsaturating"  # or "minimax"
    label_smoothing: float = 0.0
    clamp_eps: float = 1e-7
    precision: str = "float64"
    checkpoint_every: int = 0
    sample_every: int = 0
    out: str = "runs/default"

    def __post_init__(self):
        if self.loss not in ("nonsaturating", "minimax"):
            raise ValueError(f"loss must be 'nonsaturating' or 'minimax', got {self.loss!r}")
        if self.precision not in ("float64", "float32"):
            raise ValueError(f"precision must be float64 or float32, got {self.precision!r}")
        if self.arch not in ("dcgan", "mlp"):
            raise ValueError(f"arch must be dcgan or mlp, got {self.arch!r}")
        if self.batch_size < 1 or self.steps < 0 or self.d_steps < 1:
            raise ValueError("batch_size and d_steps must be positive, steps non-negative")
        if not 0.0 <= self.label_smoothing < 0.5:
            raise ValueError("label_smoothing must lie in [0, 0.5)")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = set(d) - set(known)
        if unknown:
            raise KeyError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for k, v in d.items():
            kwargs[k] = _coerce(known[k].type, v, k)
        return cls(**kwargs)

    def overlay(self, updates: dict) -> "TrainConfig":
        """A copy with ``updates`` (None values ignored) applied on top."""
        merged = self.to_dict()
        merged.update({k.replace("-", "_"): v for k, v in updates.items() if v is not None})
        return TrainConfig.from_dict(merged)


def _coerce(type_name, value, key):
    name = type_name if isinstance(type_name, str) else type_name.__name__
    try:
        if name == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if name == "float":
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ValueError(f"config key {key!r}: cannot read {value!r} as {name}") from None


def read_ini(path) -> dict[str, str]:
    """Flat ``key = value`` file; section headers are optional and ignored."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    parser.optionxform = str
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    parser.read_string(text, source=str(path))
    out: dict[str, str] = {}
    for section in parser.sections():
        for k, v in parser.items(section):
            out[k.replace("-", "_")] = v
    return out
