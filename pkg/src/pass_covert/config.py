"""Scenario configuration: JSON in, validated dataclasses out.

All dB quantities are converted to watts once, through the properties of
:class:`PowerConfig`.  Unknown keys anywhere in the file are rejected.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .geometry import PassGeometry, PhysicalConstants
from .sac import SACConfig
from .tracking import MotionNoise


def dbm_to_watts(dbm: float) -> float:
    return float(10.0 ** ((dbm - 30.0) / 10.0))


def noise_power(density_dbm_hz: float, bandwidth_hz: float) -> float:
    """Thermal noise power in watts over ``bandwidth_hz``."""
    if bandwidth_hz <= 0:
        raise ConfigurationError("bandwidth must be positive")
    return dbm_to_watts(density_dbm_hz + 10.0 * np.log10(bandwidth_hz))


@dataclass
class PowerConfig:
    p_max_dbm: float = 30.0
    gamma_sen_dbm: float = -50.0
    noise_density_dbm_hz: float = -174.0
    bandwidth_hz: float = 1e4

    @property
    def p_max(self) -> float:
        return dbm_to_watts(self.p_max_dbm)

    @property
    def gamma_sen(self) -> float:
        return dbm_to_watts(self.gamma_sen_dbm)

    @property
    def noise(self) -> float:
        """Shared noise power of Bob, the warden and the LCX receiver."""
        return noise_power(self.noise_density_dbm_hz, self.bandwidth_hz)


@dataclass
class GeometryConfig:
    n_waveguides: int = 3
    pas_per_waveguide: int = 4
    n_lcx: int = 3
    height: float = 3.0
    waveguide_spacing: float = 5.0
    lcx_offset: float = 0.5
    waveguide_length: float = 10.0
    slot_spacing: float = 1.0
    inter_pa_spacing: float | None = None
    min_spacing: float | None = None


@dataclass
class ConstantsConfig:
    carrier_freq: float = 15e9
    guided_index: float = 1.4
    lcx_index: float = 1.1
    cpi_duration: float = 1e-4
    rcs: float = 1.0


@dataclass
class WillieConfig:
    position: list = field(default_factory=lambda: [1.0, 4.0])
    velocity: list = field(default_factory=lambda: [2.0, 1.0])
    init_cov_diag: list = field(default_factory=lambda: [1e-2, 1e-2, 1e-1, 1e-1])
    # which initial-state components are drawn from N(truth, P0): none, velocity, full
    init_perturbation: str = "velocity"

    def __post_init__(self):
        if self.init_perturbation not in ("none", "velocity", "full"):
            raise ConfigurationError(f"bad init_perturbation {self.init_perturbation!r}")
        if len(self.position) != 2 or len(self.velocity) != 2 or len(self.init_cov_diag) != 4:
            raise ConfigurationError("willie position/velocity need 2 entries, init_cov_diag 4")
        if min(self.init_cov_diag) < 0:
            raise ConfigurationError("initial covariance must be non-negative")


@dataclass
class MotionConfig:
    sigma_vx2: float = 0.01
    sigma_vy2: float = 0.02


@dataclass
class SearchConfig:
    n_steps: int = 10
    mode: str = "coordinate"

    def __post_init__(self):
        if self.mode not in ("coordinate", "cartesian") or self.n_steps < 1:
            raise ConfigurationError("invalid search settings")


@dataclass
class ScenarioConfig:
    seed: int = 0
    T: int = 1000
    monte_carlo_runs: int = 20
    moving_average_window: int = 100
    bob_position: list = field(default_factory=lambda: [3.0, 5.0, 0.0])
    mimo_center: list = field(default_factory=lambda: [0.0, 0.0, 3.0])
    eig_rtol: float = 1e-10
    infeasible_fail_fraction: float = 0.5
    # False drops the receiver noise from the echo (noiseless tracking checks)
    echo_noise: bool = True
    sweep_dbm: list = field(default_factory=lambda: [20.0, 25.0, 30.0, 35.0])
    constants: ConstantsConfig = field(default_factory=ConstantsConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    power: PowerConfig = field(default_factory=PowerConfig)
    willie: WillieConfig = field(default_factory=WillieConfig)
    motion: MotionConfig = field(default_factory=MotionConfig)
    sac: SACConfig = field(default_factory=SACConfig)
    search: SearchConfig = field(default_factory=SearchConfig)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.T < 1 or self.monte_carlo_runs < 1 or self.moving_average_window < 1:
            raise ConfigurationError("T, monte_carlo_runs and moving_average_window must be >= 1")
        if len(self.bob_position) != 3 or len(self.mimo_center) != 3:
            raise ConfigurationError("positions need three coordinates")
        if not 0 < self.eig_rtol < 1:
            raise ConfigurationError("eig_rtol must lie in (0, 1)")
        # converting also validates the underlying physics objects
        self.build_constants()
        self.build_geometry()
        self.build_motion()

    # builders

    def build_constants(self) -> PhysicalConstants:
        return PhysicalConstants(**dataclasses.asdict(self.constants))

    def build_geometry(self) -> PassGeometry:
        kw = {k: v for k, v in dataclasses.asdict(self.geometry).items() if v is not None}
        if "inter_pa_spacing" not in kw or "min_spacing" not in kw:
            half = self.build_constants().wavelength / 2
            kw.setdefault("inter_pa_spacing", half)
            kw.setdefault("min_spacing", half)
        return PassGeometry(**kw)

    def build_motion(self) -> MotionNoise:
        return MotionNoise(self.motion.sigma_vx2, self.motion.sigma_vy2,
                           self.constants.cpi_duration)

    @property
    def bob(self) -> np.ndarray:
        return np.asarray(self.bob_position, dtype=float)

    @property
    def willie_xi0(self) -> np.ndarray:
        return np.r_[self.willie.position, self.willie.velocity].astype(float)

    # (de)serialisation

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        return _build(cls, d, "")

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def replace(self, **changes) -> "ScenarioConfig":
        """Copy with dotted-path overrides, e.g. ``replace(**{"power.p_max_dbm": 20})``."""
        d = self.to_dict()
        for key, value in changes.items():
            node = d
            *parents, leaf = key.split(".")
            for p in parents:
                node = node[p]
            if leaf not in node:
                raise ConfigurationError(f"unknown config key {key!r}")
            node[leaf] = value
        return ScenarioConfig.from_dict(d)


def _build(cls, d, prefix):
    if not isinstance(d, dict):
        raise ConfigurationError(f"section {prefix or '<root>'} must be an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(d) - set(fields)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(prefix + k for k in unknown)}")
    kw = {}
    for name, value in d.items():
        default = fields[name].default_factory if fields[name].default_factory is not dataclasses.MISSING else None
        sub = default() if default is not None else None
        if dataclasses.is_dataclass(sub):
            kw[name] = _build(type(sub), value, f"{prefix}{name}.")
        else:
            kw[name] = value
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
