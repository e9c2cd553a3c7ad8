"""Scenario configuration: defaults, validation and plain-text loading.

Defaults follow the macro/femto parameter table (10 MHz, 46/20 dBm,
14/0/2.2 dBi, -174 dBm/Hz, 9 dB noise figure, 2000 runs). Values the
evaluation never states (step count, step length, apartment size,
aggressor threshold) are ordinary fields so they can be swept.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    """Invalid or unparseable configuration; ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


RATE_ENGINES = ("closed_form", "least_norm")
SERVING_MODELS = ("femto", "indoor")


@dataclass(frozen=True)
class ScenarioConfig:
    # geometry and powers
    macro_radius: float = 500.0          # m
    menb_power: float = 46.0             # dBm
    henb_power: float = 20.0             # dBm
    menb_antenna_gain: float = 14.0      # dBi
    mue_antenna_gain: float = 0.0        # dBi, also used for FUEs
    henb_antenna_gain: float = 2.2       # dBi
    num_mues: int = 10
    num_henbs: int = 40
    apartment_size: float = 10.0         # m, square footprint side per HeNB

    # radio
    bandwidth: float = 10e6              # Hz
    thermal_noise_density: float = -174.0  # dBm/Hz
    noise_figure: float = 9.0            # dB
    sinr_threshold: float = 0.0          # dB
    outdoor_wall_loss: float = 20.0      # dB
    shadow_std_macro: float = 10.0       # dB
    shadow_std_femto: float = 8.0        # dB
    min_distance: float = 0.1            # m, floor for all links
    serving_link_model: str = "femto"    # HeNB->own FUE pathloss
    aggressor_epsilon: float = 0.05
    complete_aggressor_sets: bool = True

    # frame
    num_subframes: int = 10
    num_resource_blocks: int = 50
    subframe_duration: float = 1.0       # ms

    # muting
    rate_engine: str = "closed_form"
    stagger_coalitions: bool = False

    # Monte-Carlo
    num_runs: int = 2000
    num_steps: int = 30
    step_distance: float = 10.0          # m, mean displacement per step
    rng_seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(cond: bool, name: str, msg: str) -> None:
            if not cond:
                raise ConfigError(name, msg)

        for name in ("macro_radius", "bandwidth", "apartment_size", "min_distance",
                     "subframe_duration"):
            value = getattr(self, name)
            need(math.isfinite(value) and value > 0, name, f"must be > 0, got {value!r}")
        need(self.num_mues >= 1, "num_mues", f"must be >= 1, got {self.num_mues!r}")
        need(self.num_henbs >= 0, "num_henbs", f"must be >= 0, got {self.num_henbs!r}")
        for name in ("shadow_std_macro", "shadow_std_femto", "outdoor_wall_loss",
                     "aggressor_epsilon", "step_distance"):
            value = getattr(self, name)
            need(math.isfinite(value) and value >= 0, name, f"must be >= 0, got {value!r}")
        need(self.num_subframes >= 1, "num_subframes", "must be >= 1")
        need(self.num_resource_blocks >= 1, "num_resource_blocks", "must be >= 1")
        need(self.num_runs >= 1, "num_runs", "must be >= 1")
        need(self.num_steps >= 0, "num_steps", "must be >= 0")
        need(self.rng_seed >= 0, "rng_seed", "must be a non-negative integer")
        need(self.rate_engine in RATE_ENGINES, "rate_engine",
             f"must be one of {RATE_ENGINES}, got {self.rate_engine!r}")
        need(self.serving_link_model in SERVING_MODELS, "serving_link_model",
             f"must be one of {SERVING_MODELS}, got {self.serving_link_model!r}")

    @property
    def noise_power_dbm(self) -> float:
        """Receiver noise floor: density + 10 log10(bandwidth) + noise figure."""
        return self.thermal_noise_density + 10.0 * math.log10(self.bandwidth) + self.noise_figure

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}


def coerce_field(name: str, raw: Any) -> Any:
    """Convert ``raw`` (string or JSON scalar) to the type of field ``name``."""
    if name not in _FIELDS:
        raise ConfigError(name, "unknown configuration key")
    kind = type(_FIELDS[name].default)
    try:
        if kind is bool:
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(float(raw)) if isinstance(raw, str) and "e" in raw.lower() else int(raw)
        if kind is float:
            return float(raw)
        return str(raw).strip()
    except (TypeError, ValueError):
        raise ConfigError(name, f"cannot interpret {raw!r} as {kind.__name__}") from None


def _strip_prefix(key: str) -> str:
    # dotted keys ("scenario.num_mues") address the flat namespace
    return key.strip().rsplit(".", 1)[-1]


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines ignored."""
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        sep = "=" if "=" in line else (":" if ":" in line else None)
        if sep is None:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, raw = line.split(sep, 1)
        raw = raw.strip().strip('"').strip("'")
        name = _strip_prefix(key)
        values[name] = coerce_field(name, raw)
    return values


def load_config(path: str | Path, **overrides: Any) -> ScenarioConfig:
    """Load a config file (JSON or key/value text) and apply overrides."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{path}: {exc}") from None
        values = {_strip_prefix(k): coerce_field(_strip_prefix(k), v) for k, v in data.items()}
    else:
        values = parse_config_text(text)
    return make_config(values, **overrides)


def make_config(values: Mapping[str, Any] | None = None, **overrides: Any) -> ScenarioConfig:
    merged = dict(values or {})
    for key, raw in overrides.items():
        merged[key] = coerce_field(key, raw)
    for key in merged:
        if key not in _FIELDS:
            raise ConfigError(key, "unknown configuration key")
    return ScenarioConfig(**merged)


def format_config(config: ScenarioConfig) -> str:
    """Inverse of :func:`parse_config_text`."""
    return "".join(f"{k} = {v}\n" for k, v in config.to_dict().items())
