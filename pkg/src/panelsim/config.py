"""Scenario configuration: typed sections, strict YAML loading, overrides.

Every key carries its unit as a suffix (_m, _s, _n, _kg, _rad, ...) so a
config file never leaves magnitudes ambiguous.  Unknown keys are rejected
with the path that failed; missing keys fall back to the documented
defaults.  parse -> serialize -> parse is the identity.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

import yaml

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "default_config",
    "load_config",
    "config_from_dict",
    "config_to_dict",
    "dump_config",
    "apply_override",
]


class ConfigError(ValueError):
    """A scenario file failed validation; the message carries the key path."""


@dataclass
class ContactConfig:
    stiffness_npm: float = 2000.0
    damping_nspm: float = 50.0
    friction_coeff: float = 0.3
    capture_radius_m: float = 0.010
    capture_angle_rad: float = 0.10
    hole_clearance_m: float = 0.001
    chamfer_width_m: float = 0.008
    depth_threshold_m: float = 0.010


@dataclass
class PanelConfig:
    width_m: float = 0.5
    height_m: float = 0.5
    thickness_m: float = 0.02
    mass_kg: float = 1.0
    rod_length_m: float = 0.015


@dataclass
class PanelPoseConfig:
    """Nominal initial pose of one panel on the table (z from rest)."""

    x_m: float = 0.45
    y_m: float = 0.5
    yaw_rad: float = 0.0


@dataclass
class WorldConfig:
    gravity_mps2: float = 9.81
    ee_lag_tau_s: float = 0.02
    table_height_m: float = 0.0
    ee_home_height_m: float = 0.40
    contact: ContactConfig = field(default_factory=ContactConfig)
    panel: PanelConfig = field(default_factory=PanelConfig)
    driving_panel: PanelPoseConfig = field(
        default_factory=lambda: PanelPoseConfig(y_m=0.52)
    )
    yielding_panel: PanelPoseConfig = field(
        default_factory=lambda: PanelPoseConfig(y_m=-0.40)
    )


@dataclass
class RandomizationConfig:
    """Uniform half-ranges around the nominal panel poses for batch runs."""

    x_halfrange_m: float = 0.05
    y_halfrange_m: float = 0.03
    yaw_halfrange_rad: float = 0.25


@dataclass
class CameraConfig:
    fx_px: float = 600.0
    fy_px: float = 600.0
    cx_px: float = 320.0
    cy_px: float = 240.0
    x_m: float = 0.45
    y_m: float = 0.0
    z_m: float = 1.5
    yaw_rad: float = 0.0


@dataclass
class NoiseConfig:
    pixel_sigma_px: float = 0.0
    depth_sigma_m: float = 0.0
    angle_sigma_rad: float = 0.0
    miss_rate: float = 0.0


@dataclass
class PerceptionConfig:
    camera: CameraConfig = field(default_factory=CameraConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)


@dataclass
class ImpedanceConfig:
    """Diagonal impedance used for the approach tracker and, with the
    insert values, the Yielding arm's compliance during insertion."""

    mass_kg: float = 1.0
    damping_nspm: float = 14.0
    stiffness_npm: float = 50.0
    insert_damping_nspm: float = 45.0
    insert_stiffness_npm: float = 500.0


@dataclass
class WrenchConfig:
    kp_mps_per_n: float = 0.01
    ki_mps_per_ns: float = 0.1
    integrator_clamp: float = 0.5
    velocity_clamp_mps: float = 0.1
    insert_force_n: float = -35.0
    settle_band_n: float = 0.5


@dataclass
class OcpSection:
    horizon_s: float = 2.0
    nodes: int = 20
    resolve_rate_hz: float = 20.0
    v_max_mps: float = 0.2
    yaw_rate_max_radps: float = 0.5
    goal_tol_lift_m: float = 0.005
    goal_tol_assembly_m: float = 0.002
    settle_hold_s: float = 0.3
    abort_after_nonconverged: int = 10


@dataclass
class ControllersConfig:
    impedance: ImpedanceConfig = field(default_factory=ImpedanceConfig)
    wrench: WrenchConfig = field(default_factory=WrenchConfig)
    ocp: OcpSection = field(default_factory=OcpSection)


@dataclass
class ApproachConfig:
    settle_pos_m: float = 0.002
    settle_speed_mps: float = 0.005
    settle_hold_s: float = 0.2
    timeout_s: float = 8.0


@dataclass
class LiftConfig:
    height_m: float = 0.25
    timeout_s: float = 12.0


@dataclass
class AssemblyConfig:
    """Mating geometry targets: where the held panel waits and how the
    pushed panel lines up in front of it before force control starts."""

    yielding_center_x_m: float = 0.45
    yielding_center_y_m: float = -0.10
    insert_gap_m: float = 0.005
    approach_offset_z_m: float = 0.003
    timeout_s: float = 12.0


@dataclass
class InsertConfig:
    timeout_s: float = 15.0


@dataclass
class WallsConfig:
    """Lift-phase planes: keep-out x plane and the virtual wall separating
    the two arms' workspaces (sign handled per role)."""

    b_collision_m: float = 0.05
    driving_y_wall_m: float = 0.165
    yielding_y_wall_m: float = 0.16


@dataclass
class PipelineConfig:
    driving_arm: str = "left"
    yielding_arm: str = "right"
    sim_dt_s: float = 0.001
    log_decimation: int = 10
    detect_retries: int = 3
    approach: ApproachConfig = field(default_factory=ApproachConfig)
    lift: LiftConfig = field(default_factory=LiftConfig)
    assembly: AssemblyConfig = field(default_factory=AssemblyConfig)
    insert: InsertConfig = field(default_factory=InsertConfig)
    walls: WallsConfig = field(default_factory=WallsConfig)


@dataclass
class ScenarioConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    randomization: RandomizationConfig = field(default_factory=RandomizationConfig)
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    controllers: ControllersConfig = field(default_factory=ControllersConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    seed: int = 0

    def validate(self) -> "ScenarioConfig":
        p = self.pipeline
        if p.driving_arm == p.yielding_arm:
            raise ConfigError("pipeline: driving_arm and yielding_arm must differ")
        if p.sim_dt_s <= 0.0:
            raise ConfigError("pipeline.sim_dt_s must be positive")
        if p.log_decimation < 1:
            raise ConfigError("pipeline.log_decimation must be >= 1")
        if p.detect_retries < 0:
            raise ConfigError("pipeline.detect_retries must be >= 0")
        ocp = self.controllers.ocp
        if ocp.resolve_rate_hz <= 0.0 or ocp.nodes < 2 or ocp.horizon_s <= 0.0:
            raise ConfigError("controllers.ocp: rate, nodes, horizon must be positive")
        noise = self.perception.noise
        if not 0.0 <= noise.miss_rate <= 1.0:
            raise ConfigError("perception.noise.miss_rate must be in [0, 1]")
        for name in ("pixel_sigma_px", "depth_sigma_m", "angle_sigma_rad"):
            if getattr(noise, name) < 0.0:
                raise ConfigError(f"perception.noise.{name} must be >= 0")
        if self.world.contact.stiffness_npm <= 0.0:
            raise ConfigError("world.contact.stiffness_npm must be positive")
        return self


def default_config() -> ScenarioConfig:
    return ScenarioConfig().validate()


def _build(cls, data: Any, path: str):
    """Recursive strict constructor: reject unknown keys, recurse into
    nested config dataclasses, keep scalars as-is."""
    if not dataclasses.is_dataclass(cls):
        return data
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for name, f in known.items():
        sub_path = f"{path}.{name}" if path else name
        sub_cls = _resolve(f)
        if name in data:
            if dataclasses.is_dataclass(sub_cls):
                kwargs[name] = _build(sub_cls, data[name], sub_path)
            else:
                kwargs[name] = _coerce(data[name], sub_path)
    return cls(**kwargs)


def _resolve(f) -> Any:
    """Field type as a class, tolerating string annotations."""
    t = f.type
    if isinstance(t, str):
        t = globals().get(t, t)
    return t


def _coerce(value: Any, path: str) -> Any:
    if isinstance(value, dict):
        raise ConfigError(f"{path}: expected a scalar, got a mapping")
    return value


def config_from_dict(data: Dict[str, Any]) -> ScenarioConfig:
    return _build(ScenarioConfig, data, "").validate()


def config_to_dict(cfg: ScenarioConfig) -> Dict[str, Any]:
    return dataclasses.asdict(cfg)


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if data is None:
        data = {}
    return config_from_dict(data)


def dump_config(cfg: ScenarioConfig, path) -> None:
    """Write the fully resolved config (all defaults materialized)."""
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)


def apply_override(cfg: ScenarioConfig, assignment: str) -> ScenarioConfig:
    """Apply one dotted `section.key=value` override in place.

    The value is parsed with YAML scalar rules so `--set seed=7` and
    `--set world.gravity_mps2=0.0` both do the expected thing.
    """
    if "=" not in assignment:
        raise ConfigError(f"override '{assignment}' is not of the form key=value")
    dotted, raw = assignment.split("=", 1)
    parts = dotted.strip().split(".")
    target = cfg
    for part in parts[:-1]:
        if not dataclasses.is_dataclass(target) or part not in {f.name for f in fields(target)}:
            raise ConfigError(f"override: no config section '{'.'.join(parts)}'")
        target = getattr(target, part)
    leaf = parts[-1]
    if not dataclasses.is_dataclass(target) or leaf not in {f.name for f in fields(target)}:
        raise ConfigError(f"override: no config key '{dotted.strip()}'")
    current = getattr(target, leaf)
    if dataclasses.is_dataclass(current):
        raise ConfigError(f"override: '{dotted.strip()}' is a section, not a value")
    value = yaml.safe_load(raw)
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"override: '{dotted.strip()}' expects a boolean")
    elif isinstance(current, int) and not isinstance(value, int):
        raise ConfigError(f"override: '{dotted.strip()}' expects an integer")
    elif isinstance(current, float):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"override: '{dotted.strip()}' expects a number")
        value = float(value)
    elif isinstance(current, str) and not isinstance(value, str):
        raise ConfigError(f"override: '{dotted.strip()}' expects a string")
    setattr(target, leaf, value)
    cfg.validate()
    return cfg
