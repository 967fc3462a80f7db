"""Experiment configuration: a YAML (or JSON) file plus command-line overrides.

SIR, SNR, loss weights, STFT and optimizer defaults are the standard
experiment settings. Fields marked ``# ours`` are free choices of this
package.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .beamforming import OptimizerConfig
from .room import ArrayGeometry, RoomSpec, SceneConfig
from .stft import WindowSpec
from .wavio import WAV_FORMATS


class ConfigError(ValueError):
    """Invalid configuration or inconsistent input files (exit code 1)."""


@dataclass
class RoomSettings:
    dimensions: tuple[float, float, float] = (6.0, 5.0, 3.0)  # ours
    speed_of_sound: float = 343.0


@dataclass
class ArraySettings:
    num_mics: int = 4
    spacing: float = 0.08
    center: tuple[float, float, float] = (3.0, 1.0, 1.5)  # ours
    reference_index: int = 0

    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry.ula(self.num_mics, self.spacing, self.center, self.reference_index)


@dataclass
class SceneSettings:
    clip_seconds: float = 6.0
    speech_seconds: float = 4.0
    angle_range: tuple[float, float] = (30.0, 150.0)
    radius_range: tuple[float, float] = (0.75, 2.1)  # ours
    min_separation: float = 15.0  # ours
    grid_mode: bool = False
    early_window: float = 0.016
    vad_threshold_db: float = 40.0
    source_dir: str | None = None
    interferer_dir: str | None = None
    wav_format: str = "float32"

    def placement(self) -> SceneConfig:
        return SceneConfig(tuple(self.angle_range), tuple(self.radius_range),
                           self.min_separation, self.grid_mode)


@dataclass
class OptimizerSettings:
    learning_rate: float = 1e-3
    max_iters: int = 500
    init: str = "reference_selector"
    patience: int = 25
    min_improvement: float = 1e-6
    time_varying: bool = False

    def build(self, alpha: float, beta: float, seed: int = 0) -> OptimizerConfig:
        return OptimizerConfig(learning_rate=self.learning_rate, max_iters=self.max_iters,
                               init=self.init, seed=seed, alpha=alpha, beta=beta,
                               time_varying=self.time_varying, patience=self.patience,
                               min_improvement=self.min_improvement)


@dataclass
class ExperimentConfig:
    seed: int = 0
    num_scenes: int = 8  # ours
    sample_rate: int = 16000
    alpha: tuple[float, ...] = (0.5,)
    beta: tuple[float, ...] = (0.5,)
    baseline: bool = True
    sir: tuple[float, ...] = (-5.0, 0.0, 5.0, 10.0)
    snr: tuple[float, ...] = (20.0, 25.0, 30.0)
    t60: tuple[float, ...] = (0.0, 0.3, 0.6)  # ours
    grid: str = "fine"
    workers: int = 1
    room: RoomSettings = field(default_factory=RoomSettings)
    array: ArraySettings = field(default_factory=ArraySettings)
    scene: SceneSettings = field(default_factory=SceneSettings)
    stft: WindowSpec = field(default_factory=WindowSpec)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)

    def __post_init__(self):
        for name in ("alpha", "beta", "sir", "snr", "t60"):
            v = getattr(self, name)
            v = (v,) if isinstance(v, (int, float)) else v
            try:
                v = tuple(float(x) for x in v)
            except (TypeError, ValueError):
                raise ConfigError(f"{name} must be a number or a list of numbers") from None
            if not v:
                raise ConfigError(f"{name} list must not be empty")
            setattr(self, name, v)
        self.validate()

    def validate(self):
        if self.num_scenes < 0:
            raise ConfigError("num_scenes must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")
        if self.grid not in ("fine", "coarse"):
            raise ConfigError(f"grid must be 'fine' or 'coarse', got {self.grid!r}")
        for name in ("alpha", "beta"):
            if any(not 0.0 <= x <= 1.0 for x in getattr(self, name)):
                raise ConfigError(f"{name} values must lie in [0, 1]")
        if any(not math.isfinite(x) for x in self.sir):
            raise ConfigError("sir values must be finite")
        if any(math.isnan(x) for x in self.snr):
            raise ConfigError("snr values must not be NaN")
        sc = self.scene
        if not 0 < sc.speech_seconds <= sc.clip_seconds:
            raise ConfigError("need 0 < speech_seconds <= clip_seconds")
        if sc.wav_format not in WAV_FORMATS:
            raise ConfigError(f"wav_format must be one of {WAV_FORMATS}")
        if self.stft.fft_size != 2 * (self.stft.num_bins - 1):
            raise ConfigError("inconsistent STFT settings")
        if self.stft.window_length > sc.speech_seconds * self.sample_rate:
            raise ConfigError("speech clip shorter than one analysis window")
        try:
            self.array.geometry()
            sc.placement()
            for t in self.t60:
                self.room_spec(t).absorption()
            self.optimizer.build(self.alpha[0], self.beta[0])
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None

    def room_spec(self, t60: float) -> RoomSpec:
        return RoomSpec(tuple(float(x) for x in self.room.dimensions), float(t60),
                        float(self.room.speed_of_sound))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["stft"] = self.stft.to_dict()
        return _plain(d)

    @classmethod
    def from_dict(cls, d: dict | None) -> "ExperimentConfig":
        d = dict(d or {})
        sections = {"room": RoomSettings, "array": ArraySettings, "scene": SceneSettings,
                    "optimizer": OptimizerSettings}
        kwargs = {}
        try:
            for key, value in d.items():
                if key in sections:
                    kwargs[key] = _build(sections[key], value, key)
                elif key == "stft":
                    kwargs[key] = _build(WindowSpec, value, key)
                elif key in _field_names(cls):
                    kwargs[key] = value
                else:
                    raise ConfigError(f"unknown config key {key!r}")
            return cls(**kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Copy with top-level fields replaced; ``None`` values are ignored."""
        d = self.to_dict()
        for k, v in overrides.items():
            if v is None:
                continue
            if k not in d:
                raise ConfigError(f"unknown override {k!r}")
            d[k] = v
        return ExperimentConfig.from_dict(d)


def _field_names(cls) -> set:
    return {f.name for f in dataclasses.fields(cls)}


def _build(cls, value, section: str):
    if value is None:
        return cls()
    if not isinstance(value, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    unknown = set(value) - _field_names(cls)
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    conv = {k: tuple(v) if isinstance(v, list) else v for k, v in value.items()}
    return cls(**conv)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Read ``path`` (YAML or JSON) if given, then apply ``overrides``."""
    if path is None:
        cfg = ExperimentConfig()
    else:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} not found")
        try:
            data = yaml.safe_load(p.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from None
        if data is not None and not isinstance(data, dict):
            raise ConfigError(f"{p} must contain a mapping at the top level")
        cfg = ExperimentConfig.from_dict(data)
    return cfg.with_overrides(**overrides) if overrides else cfg
