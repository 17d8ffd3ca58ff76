"""Collision peak-force experiment against the spring-probe body model.

Sweeps contact conditions and approach velocities, drives one joint into the
probe with a linear pressure ramp, halts on detected collision and records
the peak contact force, classified against the per-region pain thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import SimConfig, with_joint_params
from .engine import Session, SpringProbe, TICK_DT, detect_collision
from .errors import NoContactError

POST_CONTACT_WINDOW_S = 0.5
SETTLE_TIME_S = 6.0
CONTACT_DEADLINE_S = 10.0


@dataclass(frozen=True)
class ContactCondition:
    """One body-region row of the ISO/TS 15066 contact model."""

    index: int
    body_part: str
    stiffness_n_per_mm: float
    hardness_shore_a: float
    pain_threshold_n: float

    @property
    def stiffness_n_per_m(self) -> float:
        return self.stiffness_n_per_mm * 1000.0


CONTACT_CONDITIONS: tuple[ContactCondition, ...] = (
    ContactCondition(1, "Skull", 150.0, 70.0, 130.0),
    ContactCondition(2, "Face/hand", 75.0, 70.0, 65.0),
    ContactCondition(3, "Lower legs", 60.0, 30.0, 260.0),
    ContactCondition(4, "Thighs", 50.0, 30.0, 300.0),
    ContactCondition(5, "Neck", 50.0, 70.0, 440.0),
    ContactCondition(6, "Lower arms", 40.0, 70.0, 320.0),
    ContactCondition(7, "Back", 35.0, 30.0, 420.0),
    ContactCondition(8, "Upper arms", 30.0, 30.0, 300.0),
    ContactCondition(9, "Chest", 25.0, 70.0, 280.0),
    ContactCondition(10, "Abdomen", 10.0, 10.0, 220.0),
)


def contact_conditions() -> tuple[ContactCondition, ...]:
    """The embedded ten-row body-region table."""
    return CONTACT_CONDITIONS


def condition_by_index(index: int) -> ContactCondition:
    for c in CONTACT_CONDITIONS:
        if c.index == index:
            return c
    raise KeyError(f"no contact condition {index}")


@dataclass(frozen=True)
class ForceMapEntry:
    condition: int
    target_velocity: float      # m/s at the tip
    achieved_velocity: float    # m/s measured at first contact
    peak_force: float           # N
    exceeds_pain_threshold: bool


def _impact_config(config: SimConfig) -> SimConfig:
    """Joint inertia pinned so the reflected tip mass equals the probe mass."""
    probe = config.probe
    inertia = probe.effective_mass * probe.lever_arm ** 2
    return with_joint_params(config, probe.attached_joint, inertia=inertia)


def _probe_for(config: SimConfig, condition: ContactCondition) -> SpringProbe:
    p = config.probe
    return SpringProbe(stiffness=condition.stiffness_n_per_m,
                       engage_position=p.engage_position,
                       attached_joint=p.attached_joint,
                       effective_mass=p.effective_mass,
                       lever_arm=p.lever_arm)


class ImpactRig:
    """Reusable impact runner: settle phase and detector calibration shared.

    The collision detector threshold is raised above the largest per-tick
    velocity change a probe-free full-rate launch produces (same pattern as
    calibrating against a gravity free swing), so only contact trips it.
    """

    RATE_LO = 0.5        # bar/s; slower ramps miss the 10 s contact deadline
    RATE_HI = 20000.0    # effectively a pressure step

    def __init__(self, config: SimConfig | None = None):
        self.config = _impact_config(config if config is not None else SimConfig())
        self.joint = self.config.probe.attached_joint
        self.lever = self.config.probe.lever_arm
        m = self.config.muscle
        self._ramp_start = (m.p_min, m.p_max)   # agonist slack, antagonist taut
        self._settled = self._settle()
        self._threshold = max(self.config.collision_threshold,
                              1.5 * self._max_launch_delta_v())

    def _settle(self):
        session = Session(self.config)
        targets = np.full(8, self.config.medium_pressure)
        targets[2 * self.joint] = self._ramp_start[0]
        targets[2 * self.joint + 1] = self._ramp_start[1]
        for _ in range(int(round(SETTLE_TIME_S / TICK_DT))):
            session.step(targets)
        return (session.q.copy(), session.v.copy(),
                session.p_obs.copy(), session.p_des.copy())

    def _new_session(self, probe: SpringProbe | None) -> Session:
        session = Session(self.config, probe=probe)
        q0, v0, po0, pd0 = self._settled
        session.set_state(q=q0, v=v0, p_obs=po0, p_des=pd0)
        return session

    def _max_launch_delta_v(self) -> float:
        """Largest drive-induced per-tick velocity change up to the probe plane."""
        session = self._new_session(None)
        engage = self.config.probe.engage_position
        j = self.joint
        worst = 0.0
        targets = self._settled[3].copy()
        m = self.config.muscle
        for tick in range(int(round(CONTACT_DEADLINE_S / TICK_DT))):
            t_s = tick * TICK_DT
            targets[2 * j] = min(m.p_max, self._ramp_start[0] + self.RATE_HI * t_s)
            targets[2 * j + 1] = max(m.p_min, self._ramp_start[1] - self.RATE_HI * t_s)
            session.step(targets)
            worst = max(worst, float(session.delta_velocity()[j]))
            if session.q[j] > engage:
                break
        return worst

    def run(self, condition: ContactCondition, ramp_rate: float) -> ForceMapEntry:
        """One impact trial: ramp the pair pressures linearly until contact.

        On a detected collision the desired pressures are frozen; the peak
        probe force is taken over the 0.5 s following first contact.
        """
        if not ramp_rate > 0:
            raise ValueError("ramp_rate must be positive")
        session = self._new_session(_probe_for(self.config, condition))
        m = self.config.muscle
        j = self.joint
        targets = self._settled[3].copy()
        deadline = int(round(CONTACT_DEADLINE_S / TICK_DT))
        post_ticks = int(round(POST_CONTACT_WINDOW_S / TICK_DT))
        frozen = False
        contact_tick = -1
        contact_v = math.nan
        peak = 0.0
        tick = 0
        while True:
            if contact_tick < 0 and tick > deadline:
                raise NoContactError(
                    f"no probe contact within {CONTACT_DEADLINE_S}s "
                    f"(ramp_rate={ramp_rate} bar/s)")
            if frozen:
                force = session.step(None)
            else:
                t_s = tick * TICK_DT
                targets[2 * j] = min(m.p_max, self._ramp_start[0] + ramp_rate * t_s)
                targets[2 * j + 1] = max(m.p_min, self._ramp_start[1] - ramp_rate * t_s)
                force = session.step(targets)
            if not frozen and detect_collision(
                    [session.v_prev[j], session.v[j]], self._threshold):
                frozen = True  # halt the movement: keep target pressures fixed
            if contact_tick < 0 and not math.isnan(session.last_contact_velocity):
                contact_tick = tick
                contact_v = session.last_contact_velocity
            if contact_tick >= 0:
                peak = max(peak, force)
                if tick - contact_tick >= post_ticks:
                    break
            tick += 1
        achieved = contact_v * self.lever
        return ForceMapEntry(
            condition=condition.index,
            target_velocity=achieved,
            achieved_velocity=achieved,
            peak_force=peak,
            exceeds_pain_threshold=peak > condition.pain_threshold_n)

    def achieved_velocity(self, ramp_rate: float) -> float:
        """Tip speed at first contact for one ramp rate (probe-independent)."""
        return self.run(CONTACT_CONDITIONS[0], ramp_rate).achieved_velocity

    def calibrate_ramp_rate(self, target_velocity: float,
                            rel_tol: float = 0.01, max_iter: int = 40) -> float:
        """Log-bisect the ramp rate whose contact tip speed hits the target."""
        v_lo = self.achieved_velocity(self.RATE_LO)
        v_hi = self.achieved_velocity(self.RATE_HI)
        if not v_lo <= target_velocity <= v_hi:
            raise NoContactError(
                f"target velocity {target_velocity} m/s outside achievable "
                f"range [{v_lo:.3f}, {v_hi:.3f}]")
        lo, hi = self.RATE_LO, self.RATE_HI
        best = math.sqrt(lo * hi)
        for _ in range(max_iter):
            best = math.sqrt(lo * hi)
            v = self.achieved_velocity(best)
            if abs(v - target_velocity) <= rel_tol * target_velocity:
                return best
            if v < target_velocity:
                lo = best
            else:
                hi = best
        return best


def run_impact(condition: ContactCondition, ramp_rate: float,
               config: SimConfig | None = None) -> ForceMapEntry:
    """Single impact trial with its own settle phase."""
    return ImpactRig(config).run(condition, ramp_rate)


def run_drive_free_impact(stiffness_n_per_m: float, tip_speed: float,
                          effective_mass: float,
                          config: SimConfig | None = None) -> float:
    """Peak force of a pure spring-mass contact: drive and friction removed.

    The joint starts exactly at the probe surface moving at tip_speed; muscle
    pressures are zero, friction and gravity disabled, limits moved out of
    reach. Returns the peak probe force over 0.5 s.
    """
    cfg = config if config is not None else SimConfig()
    probe_cfg = cfg.probe
    j = probe_cfg.attached_joint
    lever = probe_cfg.lever_arm
    cfg = with_joint_params(cfg, j,
                            inertia=effective_mass * lever ** 2,
                            viscous_friction=0.0, coulomb_friction=0.0,
                            gravity_torque_amplitude=0.0,
                            limit_lo=-100.0, limit_hi=100.0)
    probe = SpringProbe(stiffness=stiffness_n_per_m,
                        engage_position=probe_cfg.engage_position,
                        attached_joint=j, effective_mass=effective_mass,
                        lever_arm=lever)
    session = Session(cfg, probe=probe)
    q = np.zeros(4)
    v = np.zeros(4)
    q[j] = probe_cfg.engage_position
    v[j] = tip_speed / lever
    session.set_state(q=q, v=v, p_obs=np.zeros(8), p_des=np.zeros(8))
    peak = 0.0
    for _ in range(int(round(POST_CONTACT_WINDOW_S / TICK_DT))):
        peak = max(peak, session.step(None))
    return peak


def run_static_contact(condition: ContactCondition,
                       config: SimConfig | None = None,
                       ramp_rate: float = 0.1) -> ForceMapEntry:
    """Zero-velocity entry: quasi-static push into the probe.

    Starting from the symmetric medium-pressure equilibrium, the pair
    pressures ramp slowly enough that the joint creeps onto the probe; the
    recorded peak is essentially the static contact force of the fully
    developed drive torque.
    """
    cfg = _impact_config(config if config is not None else SimConfig())
    j = cfg.probe.attached_joint
    session = Session(cfg, probe=_probe_for(cfg, condition))
    m = cfg.muscle
    med = cfg.medium_pressure
    targets = np.full(8, med)
    peak = 0.0
    ramp_ticks = int(round((m.p_max - med) / ramp_rate / TICK_DT))
    settle_ticks = int(round(2.0 / TICK_DT))
    for tick in range(ramp_ticks + settle_ticks):
        t_s = tick * TICK_DT
        targets[2 * j] = min(m.p_max, med + ramp_rate * t_s)
        targets[2 * j + 1] = max(m.p_min, med - ramp_rate * t_s)
        peak = max(peak, session.step(targets))
    return ForceMapEntry(condition=condition.index, target_velocity=0.0,
                         achieved_velocity=0.0, peak_force=peak,
                         exceeds_pain_threshold=peak > condition.pain_threshold_n)


def max_safe_velocity(condition: ContactCondition,
                      config: SimConfig | None = None,
                      effective_mass: float | None = None,
                      rel_tol: float = 1e-3, max_iter: int = 20) -> float:
    """Tip speed at which the drive-free peak force meets the pain threshold.

    Measured from simulated impacts (secant iteration), not from the
    closed-form scaling law, so it independently exercises the integrator.
    """
    cfg = config if config is not None else SimConfig()
    m_eff = effective_mass if effective_mass is not None else cfg.probe.effective_mass
    k = condition.stiffness_n_per_m
    v = 1.0
    for _ in range(max_iter):
        peak = run_drive_free_impact(k, v, m_eff, cfg)
        if abs(peak - condition.pain_threshold_n) <= rel_tol * condition.pain_threshold_n:
            return v
        v *= condition.pain_threshold_n / peak
    return v


def build_force_map(velocities, conditions=None,
                    config: SimConfig | None = None) -> list[ForceMapEntry]:
    """One entry per (condition, velocity), ordered by (condition, velocity).

    Ramp rates are calibrated once per velocity (the approach dynamics do not
    depend on the probe spring) and reused across conditions.
    """
    cfg = config if config is not None else SimConfig()
    conds = tuple(conditions) if conditions is not None else CONTACT_CONDITIONS
    velocities = [float(v) for v in velocities]
    if not velocities:
        raise ValueError("velocity grid must be non-empty")
    rig = ImpactRig(cfg)
    rates = {v: rig.calibrate_ramp_rate(v) for v in sorted(set(velocities)) if v > 0.0}
    entries = []
    for cond in conds:
        for v in velocities:
            if v <= 0.0:
                entry = replace(run_static_contact(cond, cfg), target_velocity=v)
            else:
                entry = replace(rig.run(cond, rates[v]), target_velocity=v)
            entries.append(entry)
    entries.sort(key=lambda e: (e.condition, e.target_velocity))
    return entries


def write_force_map_csv(path, entries) -> None:
    by_index = {c.index: c for c in CONTACT_CONDITIONS}
    with open(path, "w") as fh:
        fh.write("condition,body_part,velocity,peak_force,pain_threshold,exceeds\n")
        for e in entries:
            cond = by_index[e.condition]
            fh.write(f"{e.condition},{cond.body_part},{e.target_velocity!r},"
                     f"{e.peak_force!r},{cond.pain_threshold_n!r},"
                     f"{'true' if e.exceeds_pain_threshold else 'false'}\n")


def parse_velocity_grid(spec: str) -> list[float]:
    """start:stop:count grid syntax, e.g. 0.12:1.94:14."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be start:stop:count, got {spec!r}")
    start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 1:
        raise ValueError("grid count must be >= 1")
    return [float(x) for x in np.linspace(start, stop, count)]
