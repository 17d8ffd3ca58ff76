"""Fixed-tick deterministic integrator for the four decoupled joints.

The engine advances all joints on a 500 Hz tick (2 ms), each tick split into
semi-implicit Euler substeps. State lives in flat float64 arrays and the per
tick kernel is numba-compiled; stepping is a pure function of the command
stream, so identical inputs give bit-identical state trajectories.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .config import NUM_JOINTS, NUM_MUSCLES, SimConfig
from .errors import DomainError, IntegrationDivergedError, InvalidStateError
from .plant import (
    FORCE_LAWS,
    JointState,
    MuscleState,
    _contraction_pair,
    _force_linear,
    _force_quadratic,
    _pressure_step,
    _torque,
)

TICK_NS = 2_000_000
TICK_DT = 0.002
SAMPLE_RATE = 500.0

# param matrix columns: muscles are [p_min p_max tau f0 a b eps_max],
# joints are [inertia r viscous coulomb gravity lo hi k_lim l_ref]
_JP_COLS = 9


class ControlMode(enum.IntEnum):
    PRESSURE_TARGET = 0
    POSITION_TARGET = 1


@dataclass(frozen=True)
class SpringProbe:
    """Virtual spring load cell in joint space (PRMS-style contact model)."""

    stiffness: float            # N/m at the contact point
    engage_position: float      # rad, contact surface location
    attached_joint: int = 0
    effective_mass: float = 1.3  # kg, reflected mass used by analysis runs
    lever_arm: float = 0.5      # m, contact Jacobian (tip lever)

    def __post_init__(self):
        if not self.stiffness > 0:
            raise ValueError("probe stiffness must be positive")
        if not self.effective_mass > 0:
            raise ValueError("probe effective_mass must be positive")
        if not 0 <= self.attached_joint < NUM_JOINTS:
            raise ValueError("attached_joint out of range")
        if not self.lever_arm > 0:
            raise ValueError("lever_arm must be positive")


@dataclass(frozen=True)
class ArmState:
    """Immutable snapshot of the full arm at one tick."""

    joints: tuple[JointState, ...]
    tick: int

    @property
    def time_ns(self) -> int:
        return self.tick * TICK_NS


def detect_collision(velocity_history, threshold: float) -> bool:
    """True iff any consecutive per-tick velocity jump exceeds the threshold."""
    if len(velocity_history) < 2:
        raise DomainError("velocity history needs at least 2 samples")
    prev = velocity_history[0]
    for v in velocity_history[1:]:
        if abs(v - prev) > threshold:
            return True
        prev = v
    return False


@njit(cache=True)
def _step_tick(q, v, p_obs, p_des, mp, jp, force_law, p_ref,
               probe_on, probe_joint, probe_k, probe_engage, probe_lever,
               substeps, dt):
    """One 2 ms tick in `substeps` semi-implicit Euler substeps.

    Mutates q, v, p_obs in place. Returns (ok, probe_peak, contact_velocity)
    where contact_velocity is the joint velocity latched at the first substep
    whose position crosses the probe surface (nan if no crossing this tick).
    """
    peak = 0.0
    contact_v = np.nan
    if probe_on:
        pen0 = q[probe_joint] - probe_engage
        if pen0 > 0.0:
            f0 = probe_k * probe_lever * pen0
            if f0 > peak:
                peak = f0
    for _ in range(substeps):
        for i in range(NUM_MUSCLES):
            p_obs[i] = _pressure_step(p_obs[i], p_des[i], mp[i, 2], dt,
                                      mp[i, 0], mp[i, 1])
        for j in range(NUM_JOINTS):
            e_ag, e_ant = _contraction_pair(q[j], jp[j, 1], jp[j, 8], mp[2 * j, 6])
            if force_law == 1:
                f_ag = _force_linear(p_obs[2 * j], e_ag, mp[2 * j, 3],
                                     mp[2 * j, 4], mp[2 * j, 5], mp[2 * j, 6], p_ref)
                f_ant = _force_linear(p_obs[2 * j + 1], e_ant, mp[2 * j + 1, 3],
                                      mp[2 * j + 1, 4], mp[2 * j + 1, 5],
                                      mp[2 * j + 1, 6], p_ref)
            else:
                f_ag = _force_quadratic(p_obs[2 * j], e_ag, mp[2 * j, 3],
                                        mp[2 * j, 4], mp[2 * j, 5], mp[2 * j, 6])
                f_ant = _force_quadratic(p_obs[2 * j + 1], e_ant, mp[2 * j + 1, 3],
                                         mp[2 * j + 1, 4], mp[2 * j + 1, 5],
                                         mp[2 * j + 1, 6])
            t = _torque(f_ag, f_ant, q[j], v[j], jp[j, 1], jp[j, 2], jp[j, 3],
                        jp[j, 4], jp[j, 5], jp[j, 6], jp[j, 7])
            if probe_on and j == probe_joint:
                pen = q[j] - probe_engage
                if pen > 0.0:
                    t -= probe_k * probe_lever * probe_lever * pen
            v[j] = v[j] + dt * t / jp[j, 0]
            if probe_on and j == probe_joint and math.isnan(contact_v):
                if q[j] <= probe_engage and q[j] + dt * v[j] > probe_engage:
                    contact_v = v[j]
            q[j] = q[j] + dt * v[j]
            if probe_on and j == probe_joint:
                pen = q[j] - probe_engage
                if pen > 0.0:
                    f = probe_k * probe_lever * pen
                    if f > peak:
                        peak = f
    ok = True
    for j in range(NUM_JOINTS):
        if not (math.isfinite(q[j]) and math.isfinite(v[j])):
            ok = False
    for i in range(NUM_MUSCLES):
        if not math.isfinite(p_obs[i]):
            ok = False
    return ok, peak, contact_v


def _muscle_param_matrix(cfg: SimConfig) -> np.ndarray:
    m = cfg.muscle
    row = (m.p_min, m.p_max, m.tau, m.f0, m.a, m.b, m.eps_max)
    return np.tile(np.asarray(row, dtype=np.float64), (NUM_MUSCLES, 1))


def _joint_param_matrix(cfg: SimConfig) -> np.ndarray:
    out = np.empty((NUM_JOINTS, _JP_COLS), dtype=np.float64)
    for k, jp in enumerate(cfg.joints):
        out[k] = (jp.inertia, jp.pulley_radius, jp.viscous_friction,
                  jp.coulomb_friction, jp.gravity_torque_amplitude,
                  jp.limit_lo, jp.limit_hi, jp.limit_stiffness,
                  jp.tendon_ref_length)
    return out


class Session:
    """Single stepped instance of the simulated arm.

    Stepping is single-threaded per session; independent sessions may run in
    parallel. Snapshots are immutable values safe to hand across threads.
    """

    def __init__(self, config: SimConfig | None = None,
                 mode: ControlMode = ControlMode.PRESSURE_TARGET,
                 probe: SpringProbe | None = None):
        self.config = config if config is not None else SimConfig()
        self.mode = ControlMode(mode)
        self.probe = probe
        self._mp = _muscle_param_matrix(self.config)
        self._jp = _joint_param_matrix(self.config)
        self._force_law = FORCE_LAWS[self.config.force_law]
        self._p_ref = self.config.medium_pressure
        self._dt = TICK_DT / self.config.substeps
        if self._dt > self.config.muscle.tau / 10.0:
            raise DomainError(
                f"substep {self._dt} violates pressure stability guard "
                f"tau/10={self.config.muscle.tau / 10.0}")
        self.q = np.zeros(NUM_JOINTS)
        self.v = np.zeros(NUM_JOINTS)
        med = self.config.medium_pressure
        self.p_obs = np.full(NUM_MUSCLES, med)
        self.p_des = np.full(NUM_MUSCLES, med)
        self.tick = 0
        self.v_prev = np.zeros(NUM_JOINTS)
        self.last_probe_force = 0.0
        self.last_contact_velocity = math.nan
        self._pid_integral = np.zeros(NUM_JOINTS)
        self._pid_prev_err = np.zeros(NUM_JOINTS)
        self._pid_primed = False

    @property
    def time_ns(self) -> int:
        return self.tick * TICK_NS

    def set_state(self, q=None, v=None, p_obs=None, p_des=None) -> None:
        """Rig hook: overwrite parts of the state (used by experiment runners)."""
        if q is not None:
            self.q[:] = q
        if v is not None:
            self.v[:] = v
        if p_obs is not None:
            self.p_obs[:] = p_obs
        if p_des is not None:
            self.p_des[:] = p_des
        self.v_prev[:] = self.v

    def command_pressures(self, targets) -> None:
        t = np.asarray(targets, dtype=np.float64)
        if t.shape != (NUM_MUSCLES,):
            raise InvalidStateError(f"expected {NUM_MUSCLES} pressure targets")
        if not np.all(np.isfinite(t)):
            raise InvalidStateError("non-finite pressure targets")
        np.clip(t, self.config.muscle.p_min, self.config.muscle.p_max,
                out=self.p_des)

    def _command_positions(self, targets) -> None:
        t = np.asarray(targets, dtype=np.float64)
        if t.shape != (NUM_JOINTS,):
            raise InvalidStateError(f"expected {NUM_JOINTS} position targets")
        if not np.all(np.isfinite(t)):
            raise InvalidStateError("non-finite position targets")
        err = t - self.q
        if not self._pid_primed:
            self._pid_prev_err[:] = err
            self._pid_primed = True
        self._pid_integral += err * TICK_DT
        derr = (err - self._pid_prev_err) / TICK_DT
        self._pid_prev_err[:] = err
        cfg = self.config
        diff = cfg.pid_kp * err + cfg.pid_ki * self._pid_integral + cfg.pid_kd * derr
        med = self._p_ref
        pressures = np.empty(NUM_MUSCLES)
        pressures[0::2] = med + 0.5 * diff
        pressures[1::2] = med - 0.5 * diff
        np.clip(pressures, cfg.muscle.p_min, cfg.muscle.p_max, out=self.p_des)

    def step(self, targets=None) -> float:
        """Advance one 2 ms tick. Returns the peak probe force seen this tick.

        `targets` is 8 pressures (pressure mode) or 4 angles (position mode);
        None holds the current desired pressures (also the watchdog freeze).
        """
        if targets is not None:
            if self.mode == ControlMode.PRESSURE_TARGET:
                self.command_pressures(targets)
            else:
                self._command_positions(targets)
        self.v_prev[:] = self.v
        probe = self.probe
        if probe is not None:
            ok, peak, cv = _step_tick(
                self.q, self.v, self.p_obs, self.p_des, self._mp, self._jp,
                self._force_law, self._p_ref, True, probe.attached_joint,
                probe.stiffness, probe.engage_position, probe.lever_arm,
                self.config.substeps, self._dt)
        else:
            ok, peak, cv = _step_tick(
                self.q, self.v, self.p_obs, self.p_des, self._mp, self._jp,
                self._force_law, self._p_ref, False, 0, 0.0, 0.0, 1.0,
                self.config.substeps, self._dt)
        self.tick += 1
        if not ok:
            raise IntegrationDivergedError(
                f"non-finite state after tick {self.tick}")
        self.last_probe_force = peak
        self.last_contact_velocity = cv
        return peak

    def delta_velocity(self) -> np.ndarray:
        """Per-joint |velocity change| over the last tick."""
        return np.abs(self.v - self.v_prev)

    def collision_detected(self, joint: int | None = None) -> bool:
        """Collision check on the last tick's velocity jump."""
        thr = self.config.collision_threshold
        if joint is None:
            return bool(np.any(self.delta_velocity() > thr))
        return detect_collision([self.v_prev[joint], self.v[joint]], thr)

    def snapshot(self) -> ArmState:
        joints = []
        mp = self.config.muscle
        for j in range(NUM_JOINTS):
            e_ag, e_ant = _contraction_pair(
                self.q[j], self._jp[j, 1], self._jp[j, 8], mp.eps_max)
            joints.append(JointState(
                angle=float(self.q[j]), velocity=float(self.v[j]),
                agonist=MuscleState(float(self.p_obs[2 * j]),
                                    float(self.p_des[2 * j]), e_ag),
                antagonist=MuscleState(float(self.p_obs[2 * j + 1]),
                                       float(self.p_des[2 * j + 1]), e_ant)))
        return ArmState(joints=tuple(joints), tick=self.tick)

    def valve_positions(self) -> np.ndarray:
        m = self.config.muscle
        v = (self.p_des - self.p_obs) / (m.p_max - m.p_min)
        return np.clip(v, -1.0, 1.0)


__all__ = [
    "ArmState", "ControlMode", "SAMPLE_RATE", "Session", "SpringProbe",
    "TICK_DT", "TICK_NS", "detect_collision",
]
