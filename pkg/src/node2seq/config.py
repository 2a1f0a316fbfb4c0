"""Run configuration and its flat ``key=value`` text form."""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .layer import READOUTS

SKIPS = ("sum", "concat", "none")
ABLATIONS = ("node2seq", "gcn_star", "gcn2")
SPLITS = ("fixed", "random")
ACTIVATION_NAMES = ("relu", "identity", "tanh")

# dotted config keys that do not map 1:1 onto attribute names
_ALIASES = {
    "nonlocal.enabled": "nonlocal_enabled",
    "nonlocal.beta": "nonlocal_beta",
    "nonlocal.ell": "nonlocal_ell",
}
_KEYS = {v: k for k, v in _ALIASES.items()}


class ConfigError(ValueError):
    pass


def _parse_bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


@dataclass
class TrainConfig:
    dataset_dir: str = ""
    hidden: int = 64
    kernel_size: int = 3
    readout: str = "mean"
    skip: str = "sum"
    dropout: float = 0.5
    lr: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 300
    seeds: list[int] = field(default_factory=lambda: [0])
    nonlocal_enabled: bool = False
    nonlocal_beta: float = 0.0
    nonlocal_ell: int = 2
    ablation: str = "node2seq"
    activation: str = "relu"
    normalize_features: bool = False
    split: str = "fixed"
    per_class_train: int = 20
    val_size: int = 500

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        choices = {
            "readout": READOUTS,
            "skip": SKIPS,
            "ablation": ABLATIONS,
            "split": SPLITS,
            "activation": ACTIVATION_NAMES,
        }
        for name, valid in choices.items():
            if getattr(self, name) not in valid:
                raise ConfigError(
                    f"invalid value {getattr(self, name)!r} for {name}; valid options: {', '.join(valid)}"
                )
        if self.kernel_size < 1:
            raise ConfigError(f"kernel_size must be >= 1, got {self.kernel_size}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.nonlocal_ell < 1:
            raise ConfigError(f"nonlocal.ell must be >= 1, got {self.nonlocal_ell}")
        if self.hidden < 1:
            raise ConfigError(f"hidden must be >= 1, got {self.hidden}")
        if not self.seeds:
            raise ConfigError("seeds must list at least one seed")

    @staticmethod
    def keys() -> list[str]:
        return [_KEYS.get(f.name, f.name) for f in fields(TrainConfig)]

    def with_overrides(self, pairs: dict[str, str]) -> "TrainConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        types = {f.name: f.type for f in fields(self)}
        for key, raw in pairs.items():
            attr = _ALIASES.get(key, key)
            if attr not in values or key in _KEYS:
                raise ConfigError(f"unknown config key {key!r}; valid keys: {', '.join(self.keys())}")
            kind = types[attr]
            try:
                if kind == "list[int]":
                    values[attr] = _parse_seeds(raw)
                elif kind == "bool":
                    values[attr] = _parse_bool(raw)
                elif kind == "int":
                    values[attr] = int(raw)
                elif kind == "float":
                    values[attr] = float(raw)
                else:
                    values[attr] = raw.strip()
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}") from None
        return TrainConfig(**values)

    def to_lines(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ",".join(str(s) for s in v)
            elif isinstance(v, bool):
                v = str(v).lower()
            elif isinstance(v, float):
                v = repr(v)
            out.append(f"{_KEYS.get(f.name, f.name)}={v}")
        return out


def _parse_seeds(raw: str) -> list[int]:
    raw = raw.strip()
    if ".." in raw:
        lo, hi = raw.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in raw.split(",") if s.strip()]


def parse_pairs(lines, source: str = "<config>") -> dict[str, str]:
    """Parse ``key=value`` lines.

    Blank lines and ``#`` comments are skipped, but a comment of the form
    ``# key=value`` is read as a setting, so CSV reports (whose header echoes
    the config that way) can be fed back in as a config file.
    """
    pairs: dict[str, str] = {}
    for ln, line in enumerate(lines, 1):
        line = line.strip()
        if line.startswith("#"):
            line = line.lstrip("#").strip()
            if "=" not in line or " " in line.split("=", 1)[0]:
                continue
        if not line:
            continue
        if "=" not in line:
            # first non-comment line without '=' ends the header of a report file
            if pairs:
                break
            raise ConfigError(f"{source}:{ln}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        pairs[k.strip()] = v.strip()
    return pairs


def load_config(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> TrainConfig:
    cfg = TrainConfig()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} not found")
        cfg = cfg.with_overrides(parse_pairs(p.read_text().splitlines(), str(p)))
    if overrides:
        cfg = cfg.with_overrides(overrides)
    return cfg
