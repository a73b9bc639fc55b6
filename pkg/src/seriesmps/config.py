"""Training configuration and the plain-text key-value config format."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the sweeping optimizer.

    ``n_sweeps`` defaults to the fixed 10-sweep schedule; ``loss_tolerance``
    enables optional early stopping on the absolute sweep-over-sweep loss
    improvement and is disabled by default.
    """

    eta: float = 0.05
    chi_max: int = 40
    d: int = 10
    n_sweeps: int = 10
    chi_init: int = 4
    cutoff: float = 1e-12
    seed: int = 0
    loss_tolerance: float | None = None
    grid_size: int = 512

    def validate(self) -> "TrainConfig":
        if not self.eta > 0:
            raise ConfigError("eta must be > 0")
        if not (self.chi_max >= self.chi_init >= 1):
            raise ConfigError("need chi_max >= chi_init >= 1")
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if self.n_sweeps < 0:
            raise ConfigError("n_sweeps must be >= 0")
        if self.cutoff < 0:
            raise ConfigError("cutoff must be >= 0")
        if self.loss_tolerance is not None and self.loss_tolerance < 0:
            raise ConfigError("loss_tolerance must be >= 0 when set")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def merged(self, **overrides) -> "TrainConfig":
        """New config with the non-None overrides applied."""
        updates = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **updates)


_INT_KEYS = {"chi_max", "d", "n_sweeps", "chi_init", "seed", "grid_size"}
_FLOAT_KEYS = {"eta", "cutoff", "loss_tolerance"}


def config_from_dict(raw: dict) -> TrainConfig:
    kwargs = {}
    for key, value in raw.items():
        if key in _INT_KEYS:
            kwargs[key] = int(value)
        elif key in _FLOAT_KEYS:
            kwargs[key] = None if value is None else float(value)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return TrainConfig(**kwargs).validate()


def read_config_file(path) -> TrainConfig:
    """Parse a ``key = value`` config file; ``#`` starts a comment."""
    raw = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        raw[key] = value
    try:
        return config_from_dict(raw)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def write_config_file(config: TrainConfig, path) -> None:
    lines = []
    for key, value in config.to_dict().items():
        if value is None:
            continue
        lines.append(f"{key} = {value!r}" if isinstance(value, str) else f"{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n")
