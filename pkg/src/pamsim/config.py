"""Plain-text configuration: `key = value` lines, '#' comments.

Every parameter has an embedded default, so an empty (or missing) file yields
a fully usable configuration. Joint parameters may be overridden per joint
with a `joint<k>.` prefix, e.g. `joint2.inertia = 0.4`.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .plant import FORCE_LAWS, JointParams, MuscleParams

NUM_JOINTS = 4
NUM_MUSCLES = 8


@dataclass(frozen=True)
class ProbeConfig:
    stiffness_n_per_mm: float = 150.0
    engage_position: float = 0.3    # rad
    attached_joint: int = 0
    effective_mass: float = 1.3     # kg
    lever_arm: float = 0.5          # m, contact Jacobian

    def __post_init__(self):
        if not self.stiffness_n_per_mm > 0:
            raise ValueError("probe stiffness must be positive")
        if not self.effective_mass > 0:
            raise ValueError("probe effective_mass must be positive")
        if not 0 <= self.attached_joint < NUM_JOINTS:
            raise ValueError("probe attached_joint out of range")
        if not self.lever_arm > 0:
            raise ValueError("probe lever_arm must be positive")


@dataclass(frozen=True)
class SimConfig:
    muscle: MuscleParams = field(default_factory=MuscleParams)
    joints: tuple[JointParams, ...] = field(
        default_factory=lambda: tuple(JointParams() for _ in range(NUM_JOINTS)))
    force_law: str = "quadratic"
    substeps: int = 4
    pid_kp: float = 20.0
    pid_ki: float = 0.0
    pid_kd: float = 1.0
    collision_threshold: float = 0.2    # rad/s per tick
    watchdog_ticks: int = 250           # 500 ms at 500 Hz
    probe: ProbeConfig = field(default_factory=ProbeConfig)

    def __post_init__(self):
        if len(self.joints) != NUM_JOINTS:
            raise ValueError(f"expected {NUM_JOINTS} joints")
        if self.force_law not in FORCE_LAWS:
            raise ValueError(f"unknown force_law {self.force_law!r}")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if not self.collision_threshold > 0:
            raise ValueError("collision_threshold must be positive")
        if self.watchdog_ticks < 1:
            raise ValueError("watchdog_ticks must be >= 1")

    @property
    def medium_pressure(self) -> float:
        return self.muscle.medium_pressure

    @property
    def minimum_pressure(self) -> float:
        return self.muscle.minimum_pressure


_MUSCLE_KEYS = {f.name for f in fields(MuscleParams)}
_JOINT_KEYS = {f.name for f in fields(JointParams)}
_PROBE_KEYS = {f.name for f in fields(ProbeConfig)}
_TOP_KEYS = {
    "sim.substeps": ("substeps", int),
    "sim.force_law": ("force_law", str),
    "pid.kp": ("pid_kp", float),
    "pid.ki": ("pid_ki", float),
    "pid.kd": ("pid_kd", float),
    "collision.threshold": ("collision_threshold", float),
    "watchdog.ticks": ("watchdog_ticks", int),
}


def parse_config_text(text: str) -> SimConfig:
    """Parse `key = value` lines into a SimConfig; unknown keys are errors."""
    muscle_over: dict[str, float] = {}
    joint_over: dict[str, float] = {}
    per_joint_over: dict[int, dict[str, float]] = {k: {} for k in range(NUM_JOINTS)}
    probe_over: dict[str, object] = {}
    top_over: dict[str, object] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            _assign(key, value, muscle_over, joint_over, per_joint_over,
                    probe_over, top_over)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None

    try:
        muscle = MuscleParams(**muscle_over)
        joints = []
        for k in range(NUM_JOINTS):
            joints.append(JointParams(**{**joint_over, **per_joint_over[k]}))
        probe = ProbeConfig(**probe_over)
        return SimConfig(muscle=muscle, joints=tuple(joints), probe=probe, **top_over)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _assign(key, value, muscle_over, joint_over, per_joint_over, probe_over, top_over):
    if key in _TOP_KEYS:
        name, conv = _TOP_KEYS[key]
        top_over[name] = conv(value)
        return
    section, _, attr = key.partition(".")
    if section == "muscle" and attr in _MUSCLE_KEYS:
        muscle_over[attr] = float(value)
        return
    if section == "muscle" and attr == "force_law":
        top_over["force_law"] = value
        return
    if section == "joint" and attr in _JOINT_KEYS:
        joint_over[attr] = float(value)
        return
    if section.startswith("joint") and section[5:].isdigit():
        idx = int(section[5:])
        if not 0 <= idx < NUM_JOINTS:
            raise ConfigError(f"joint index {idx} out of range")
        if attr not in _JOINT_KEYS:
            raise ConfigError(f"unknown joint key {attr!r}")
        per_joint_over[idx][attr] = float(value)
        return
    if section == "probe" and attr in _PROBE_KEYS:
        probe_over[attr] = int(value) if attr == "attached_joint" else float(value)
        return
    raise ConfigError(f"unknown key {key!r}")


def load_config(path: str | Path | None) -> SimConfig:
    """Load a config file; None or a missing path yields pure defaults."""
    if path is None:
        return SimConfig()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text())


def dump_config(cfg: SimConfig) -> str:
    """Canonical `key = value` dump of the fully resolved configuration."""
    lines = []
    for name in sorted(_MUSCLE_KEYS):
        lines.append(f"muscle.{name} = {getattr(cfg.muscle, name)!r}")
    lines.append(f"sim.force_law = {cfg.force_law}")
    lines.append(f"sim.substeps = {cfg.substeps}")
    for k, jp in enumerate(cfg.joints):
        for name in sorted(_JOINT_KEYS):
            lines.append(f"joint{k}.{name} = {getattr(jp, name)!r}")
    for name in sorted(_PROBE_KEYS):
        lines.append(f"probe.{name} = {getattr(cfg.probe, name)!r}")
    lines.append(f"pid.kp = {cfg.pid_kp!r}")
    lines.append(f"pid.ki = {cfg.pid_ki!r}")
    lines.append(f"pid.kd = {cfg.pid_kd!r}")
    lines.append(f"collision.threshold = {cfg.collision_threshold!r}")
    lines.append(f"watchdog.ticks = {cfg.watchdog_ticks}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: SimConfig) -> str:
    """Stable SHA-256 of the resolved configuration."""
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()


def with_joint_params(cfg: SimConfig, joint: int, **overrides) -> SimConfig:
    """Copy of cfg with parameters of one joint replaced."""
    joints = list(cfg.joints)
    joints[joint] = replace(joints[joint], **overrides)
    return replace(cfg, joints=tuple(joints))


def with_all_joint_params(cfg: SimConfig, **overrides) -> SimConfig:
    """Copy of cfg with parameters of every joint replaced."""
    joints = tuple(replace(jp, **overrides) for jp in cfg.joints)
    return replace(cfg, joints=joints)
