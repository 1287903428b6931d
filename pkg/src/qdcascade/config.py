"""Run configuration: a flat key=value document with named presets.

Lines are ``key = value``; ``#`` starts a comment. A ``preset`` line, if
present, must come first and supplies the defaults that later lines
override. Every error names the offending line and field.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any

from . import constants as C
from .detection import BeamsplitterParams, DetectorParams
from .experiments import ExperimentConfig
from .quantum_state import BASES, CascadeStateParams
from .source import SourceParams

EXPERIMENTS = ("hbt", "tomography", "tpi", "lifetime", "power", "coherence", "reproduce")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# key -> parser; grouped by the object each key ends up in
SOURCE_KEYS = {k: float for k in ("t1_xx", "t1_x", "t2_xx", "t2_x", "rabi_damping", "incoherent_slope", "rep_period", "double_pulse_delay")}
STATE_KEYS = {"cross_coherence": float, "fss_energy": float, "background_fraction": float}
DETECTOR_KEYS = {"efficiency": float, "dark_rate": float, "jitter_sigma": float}
BS_KEYS = {"transmittance": float, "mode_overlap": float}
RUN_KEYS = {
    "experiment": str,
    "seed": int,
    "workers": int,
    "out": str,
    "duration": float,
    "periods": int,
    "pulse_area": float,
    "mzi_delay": float,
    "coincidence_window": float,
    "block_periods": int,
    "channel": str,
    "basis": str,
    "co_polarized": _bool,
    "parallel": _bool,
    "bin_width": int,
    "window": float,
    "pulses_per_point": int,
}
ALL_KEYS = {**SOURCE_KEYS, **STATE_KEYS, **RUN_KEYS}
for _k, _p in DETECTOR_KEYS.items():
    ALL_KEYS[_k] = _p
    ALL_KEYS[_k + "_0"] = _p
    ALL_KEYS[_k + "_1"] = _p
ALL_KEYS.update(BS_KEYS)


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    experiment_config: ExperimentConfig = field(default_factory=ExperimentConfig)
    out: str = "out"
    channel: str = "XX"
    basis: str = "linear"
    co_polarized: bool = True
    parallel: bool = True
    bin_width: int = 129
    window: float = 6 * C.REP_PERIOD_PS + 1000.0
    pulses_per_point: int = 100_000
    preset: str = "custom"

    def __post_init__(self):
        if not self.experiment:
            raise ConfigError("experiment must not be empty", key="experiment")
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}", key="experiment")
        if self.channel not in ("X", "XX"):
            raise ConfigError(f"channel must be X or XX, got {self.channel!r}", key="channel")
        if self.basis not in BASES:
            raise ConfigError(f"basis must be one of {', '.join(BASES)}", key="basis")
        if self.bin_width <= 0:
            raise ConfigError("bin_width must be positive", key="bin_width")
        if self.window <= 0:
            raise ConfigError("window must be positive", key="window")
        if self.pulses_per_point <= 0:
            raise ConfigError("pulses_per_point must be positive", key="pulses_per_point")

    @property
    def seed(self) -> int:
        return self.experiment_config.seed

    @property
    def workers(self) -> int:
        return self.experiment_config.workers

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    def digest(self) -> str:
        """sha256 of the canonical JSON form, used for report provenance."""
        text = json.dumps(self.as_dict(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()


# -- presets -------------------------------------------------------------------


def paper_state() -> CascadeStateParams:
    p = C.PAPER_CONTRASTS
    return CascadeStateParams.from_contrasts(p["linear"], p["diagonal"], p["circular"])


def _preset(efficiency: float, dark: float, duration: float) -> dict[str, Any]:
    return {
        "source": SourceParams(state=paper_state()),
        "detectors": (
            DetectorParams(efficiency, dark, C.APD_JITTER_PS, 0),
            DetectorParams(efficiency, dark, C.APD_JITTER_PS, 1),
        ),
        "beamsplitter": BeamsplitterParams(0.5, C.MODE_OVERLAP),
        "duration": duration,
    }


def _paper_default() -> dict[str, Any]:
    # detection efficiency chosen so that half the pulse rate reaches each
    # detector at the quoted singles level (dark counts included)
    eta = (C.SINGLES_RATE_CPS - C.DARK_RATE_CPS) / (0.5 * C.REP_RATE_HZ)
    return _preset(eta, C.DARK_RATE_CPS, 1000.0)


DESK_EFFICIENCY = 0.2
DESK_PERIODS = 1_000_000


def desk_dark_rate(efficiency: float = DESK_EFFICIENCY) -> float:
    """Dark rate keeping the reference dark-to-signal ratio at a higher efficiency."""
    signal = 0.5 * efficiency * 1e12 / C.REP_PERIOD_PS
    return signal * C.DARK_RATE_CPS / (C.SINGLES_RATE_CPS - C.DARK_RATE_CPS)


def _desk() -> dict[str, Any]:
    return _preset(DESK_EFFICIENCY, desk_dark_rate(), DESK_PERIODS * C.REP_PERIOD_PS * 1e-12)


PRESETS = {
    "paper-default": (_paper_default, "reference parameters at the literal singles and dark rates (1000 s, not desk scale)"),
    "desk": (_desk, "reference parameters, efficiency 0.2, dark rate scaled to keep n_dc/n_s, 10^6 periods"),
}


def preset_experiment_config(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}", key="preset")
    return replace(ExperimentConfig(**PRESETS[name][0]()), **overrides)


def preset_fields(name: str) -> dict[str, Any]:
    """Flat key/value view of a preset, as accepted by :func:`parse_config`."""
    cfg = preset_experiment_config(name)
    src = cfg.source
    d0 = cfg.detectors[0]
    out: dict[str, Any] = {k: getattr(src, k) for k in SOURCE_KEYS}
    out.update({k: getattr(src.state, k) for k in STATE_KEYS})
    out.update({k: getattr(d0, k) for k in DETECTOR_KEYS})
    out.update({k: getattr(cfg.beamsplitter, k) for k in BS_KEYS})
    out.update(duration=cfg.duration, pulse_area=cfg.pulse_area, mzi_delay=cfg.mzi_delay,
               coincidence_window=cfg.coincidence_window, seed=cfg.seed, workers=cfg.workers)
    return out


# -- parsing -------------------------------------------------------------------


def _lines(text: str):
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=n)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("missing key before '='", line=n)
        yield n, key, value


def parse_config(text: str, preset: str | None = None) -> RunConfig:
    """Parse and validate a key=value run description.

    Raises
    ------
    ConfigError
        Unknown key, malformed or out-of-range value, or missing experiment.
    """
    values: dict[str, tuple[int, Any]] = {}
    for n, key, raw in _lines(text):
        if key == "preset":
            if values:
                raise ConfigError("preset must be the first setting", line=n, key=key)
            preset = raw
            continue
        if key not in ALL_KEYS:
            raise ConfigError("unknown key", line=n, key=key)
        if key in values:
            raise ConfigError(f"duplicate key (first set on line {values[key][0]})", line=n, key=key)
        if raw == "" and key != "experiment":
            raise ConfigError("empty value", line=n, key=key)
        try:
            v = ALL_KEYS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"invalid value {raw!r}: {exc}", line=n, key=key) from None
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigError("value must be finite", line=n, key=key)
        values[key] = (n, v)
    if "experiment" not in values:
        raise ConfigError("missing required field", key="experiment")
    return build_config({k: v for k, (_, v) in values.items()}, preset, lines={k: n for k, (n, _) in values.items()})


def _apply(obj, fields: dict, lines: dict, rename=lambda k: k):
    if not fields:
        return obj
    try:
        return replace(obj, **{rename(k): v for k, v in fields.items()})
    except ValueError as exc:
        key = next((k for k in fields if k in str(exc)), next(iter(fields)))
        raise ConfigError(str(exc), line=lines.get(key), key=key) from None


def build_config(values: dict[str, Any], preset: str | None = None, lines: dict[str, int] | None = None) -> RunConfig:
    lines = lines or {}
    base = preset_experiment_config(preset) if preset else ExperimentConfig()

    state = _apply(base.source.state, {k: v for k, v in values.items() if k in STATE_KEYS}, lines)
    src = _apply(base.source, {k: v for k, v in values.items() if k in SOURCE_KEYS}, lines)
    src = replace(src, state=state)

    dets = []
    for i, d in enumerate(base.detectors):
        f = {k: values[k] for k in DETECTOR_KEYS if k in values}
        f.update({k: values[f"{k}_{i}"] for k in DETECTOR_KEYS if f"{k}_{i}" in values})
        lk = {k: lines.get(f"{k}_{i}", lines.get(k)) for k in DETECTOR_KEYS}
        dets.append(_apply(d, f, lk))
    bs = _apply(base.beamsplitter, {k: v for k, v in values.items() if k in BS_KEYS}, lines)

    exp_fields = {k: values[k] for k in ("seed", "workers", "duration", "pulse_area", "mzi_delay", "coincidence_window", "block_periods") if k in values}
    cfg = _apply(replace(base, source=src, detectors=tuple(dets), beamsplitter=bs), exp_fields, lines)
    if "periods" in values:
        if values["periods"] <= 0:
            raise ConfigError("periods must be positive", line=lines.get("periods"), key="periods")
        if "duration" in values:
            raise ConfigError("give either duration or periods, not both", line=lines.get("periods"), key="periods")
        cfg = cfg.with_periods(values["periods"])

    run = {k: values[k] for k in ("experiment", "out", "channel", "basis", "co_polarized", "parallel", "bin_width", "window", "pulses_per_point") if k in values}
    try:
        return RunConfig(experiment_config=cfg, preset=preset or "custom", **run)
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], line=lines.get(exc.key), key=exc.key) from None
