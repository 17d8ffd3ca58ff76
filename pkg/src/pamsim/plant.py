"""Antagonistic PAM pair driving one rotational joint.

Static muscle force law, first-order pressure dynamics, tendon kinematics
over a pulley and the net joint torque. All operations are pure functions
over value types and safe to call from any thread. The scalar kernels are
numba-compiled and shared with the array-based engine so both paths compute
identical arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from numba import njit

from .errors import DomainError, InvalidStateError

# tanh knee for the smoothed Coulomb term, rad/s
VELOCITY_SMOOTHING = 1e-3

FORCE_LAW_QUADRATIC = 0
FORCE_LAW_LINEAR = 1
FORCE_LAWS = {"quadratic": FORCE_LAW_QUADRATIC, "linear": FORCE_LAW_LINEAR}


@dataclass(frozen=True)
class MuscleParams:
    """Static parameters of a single pneumatic muscle."""

    p_min: float = 0.0          # bar
    p_max: float = 5.0          # bar
    tau: float = 0.1            # s, pressure lag time constant
    f0: float = 600.0           # N per bar at zero contraction (a=1, b=0)
    a: float = 1.0              # force curve coefficient
    b: float = 0.05             # force curve offset
    eps_max: float = 0.3        # maximum contraction ratio

    def __post_init__(self):
        if not self.p_min < self.p_max:
            raise ValueError(f"p_min must be < p_max, got {self.p_min} >= {self.p_max}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.f0 > 0:
            raise ValueError(f"f0 must be positive, got {self.f0}")
        if not (self.a > self.b >= 0):
            raise ValueError(f"need a > b >= 0, got a={self.a}, b={self.b}")
        if not 0 < self.eps_max < 1:
            raise ValueError(f"eps_max must be in (0, 1), got {self.eps_max}")

    @property
    def medium_pressure(self) -> float:
        return 0.5 * (self.p_min + self.p_max)

    @property
    def minimum_pressure(self) -> float:
        return self.p_min


@dataclass(frozen=True)
class MuscleState:
    """Observed/desired pressure plus the derived contraction ratio."""

    pressure_obs: float
    pressure_des: float
    contraction: float = 0.0


@dataclass(frozen=True)
class JointParams:
    """Mechanical parameters of one rotational DoF."""

    inertia: float = 0.325              # kg m^2
    pulley_radius: float = 0.02         # m
    viscous_friction: float = 1.5       # N m s / rad
    coulomb_friction: float = 0.02      # N m
    gravity_torque_amplitude: float = 0.0  # N m
    limit_lo: float = -1.0              # rad
    limit_hi: float = 1.0               # rad
    limit_stiffness: float = 100.0      # N m / rad beyond the limits
    tendon_ref_length: float = 0.2      # m, reference tendon length for kinematics

    def __post_init__(self):
        if not self.inertia > 0:
            raise ValueError(f"inertia must be positive, got {self.inertia}")
        if not self.pulley_radius > 0:
            raise ValueError(f"pulley_radius must be positive, got {self.pulley_radius}")
        if not self.limit_lo < self.limit_hi:
            raise ValueError(f"limit_lo must be < limit_hi, got {self.limit_lo} >= {self.limit_hi}")
        for name in ("viscous_friction", "coulomb_friction", "gravity_torque_amplitude",
                     "limit_stiffness"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.tendon_ref_length > 0:
            raise ValueError(f"tendon_ref_length must be positive, got {self.tendon_ref_length}")


@dataclass(frozen=True)
class JointState:
    """One DoF: angle, velocity and the two muscle states."""

    angle: float
    velocity: float
    agonist: MuscleState
    antagonist: MuscleState


# ---------------------------------------------------------------------------
# scalar kernels (single source of truth, also inlined by the engine)

@njit(cache=True)
def _pressure_step(p_obs, p_des, tau, dt, p_min, p_max):
    p = p_obs + dt * (p_des - p_obs) / tau
    if p < p_min:
        p = p_min
    elif p > p_max:
        p = p_max
    return p


@njit(cache=True)
def _force_quadratic(pressure, contraction, f0, a, b, eps_max):
    s = 1.0 - contraction / eps_max
    g = a * s * s - b
    if g < 0.0:
        g = 0.0
    return f0 * pressure * g


@njit(cache=True)
def _force_linear(pressure, contraction, f0, a, b, eps_max, p_ref):
    # tangent of the quadratic law at (p_ref, eps_max/2); intentionally unclamped
    g0 = 0.25 * a - b
    return f0 * (g0 * pressure - (a * p_ref / eps_max) * (contraction - 0.5 * eps_max))


@njit(cache=True)
def _contraction_pair(angle, pulley_radius, tendon_ref_length, eps_max):
    d = pulley_radius * angle / tendon_ref_length
    e_mid = 0.5 * eps_max
    e_ag = e_mid + d
    e_ant = e_mid - d
    if e_ag < 0.0:
        e_ag = 0.0
    elif e_ag > eps_max:
        e_ag = eps_max
    if e_ant < 0.0:
        e_ant = 0.0
    elif e_ant > eps_max:
        e_ant = eps_max
    return e_ag, e_ant


@njit(cache=True)
def _torque(f_ag, f_ant, angle, velocity, pulley_radius, viscous, coulomb,
            gravity_amp, limit_lo, limit_hi, limit_stiffness):
    t = pulley_radius * (f_ag - f_ant)
    t -= viscous * velocity
    t -= coulomb * math.tanh(velocity / VELOCITY_SMOOTHING)
    t -= gravity_amp * math.sin(angle)
    if angle > limit_hi:
        t -= limit_stiffness * (angle - limit_hi)
    elif angle < limit_lo:
        t += limit_stiffness * (limit_lo - angle)
    return t


# ---------------------------------------------------------------------------
# typed operations

def clamp_pressure(value: float, params: MuscleParams) -> float:
    """Clamp a commanded pressure into the admissible range."""
    return min(max(value, params.p_min), params.p_max)


def with_target(state: MuscleState, params: MuscleParams, pressure_des: float) -> MuscleState:
    """Ingest a new target pressure, clamping it into [p_min, p_max]."""
    if not math.isfinite(pressure_des):
        raise InvalidStateError(f"non-finite target pressure {pressure_des!r}")
    return replace(state, pressure_des=clamp_pressure(pressure_des, params))


def step_pressure(state: MuscleState, params: MuscleParams, dt: float) -> MuscleState:
    """Advance the first-order pressure lag by one Euler step of length dt."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if dt > params.tau / 10.0:
        raise DomainError(f"dt={dt} exceeds stability guard tau/10={params.tau / 10.0}")
    if not (math.isfinite(state.pressure_obs) and math.isfinite(state.pressure_des)):
        raise InvalidStateError("non-finite muscle pressures")
    p = _pressure_step(state.pressure_obs, state.pressure_des, params.tau, dt,
                       params.p_min, params.p_max)
    return replace(state, pressure_obs=p)


def muscle_force(pressure: float, contraction: float, params: MuscleParams,
                 law: int = FORCE_LAW_QUADRATIC) -> float:
    """Static pulling force of one muscle, N. Never negative for the quadratic law."""
    if not 0.0 <= contraction <= params.eps_max:
        raise DomainError(
            f"contraction {contraction} outside [0, {params.eps_max}]")
    if law == FORCE_LAW_QUADRATIC:
        return _force_quadratic(pressure, contraction, params.f0, params.a,
                                params.b, params.eps_max)
    return _force_linear(pressure, contraction, params.f0, params.a, params.b,
                         params.eps_max, params.medium_pressure)


def muscle_kinematics(angle: float, jp: JointParams, mp: MuscleParams) -> tuple[float, float]:
    """Agonist/antagonist contraction ratios for one joint angle."""
    if not math.isfinite(angle):
        raise InvalidStateError(f"non-finite angle {angle!r}")
    return _contraction_pair(angle, jp.pulley_radius, jp.tendon_ref_length, mp.eps_max)


def joint_torque(state: JointState, mp: MuscleParams, jp: JointParams,
                 law: int = FORCE_LAW_QUADRATIC) -> float:
    """Net torque on the joint from muscles, friction, gravity and limit springs."""
    f_ag = muscle_force(state.agonist.pressure_obs, state.agonist.contraction, mp, law)
    f_ant = muscle_force(state.antagonist.pressure_obs, state.antagonist.contraction, mp, law)
    return _torque(f_ag, f_ant, state.angle, state.velocity, jp.pulley_radius,
                   jp.viscous_friction, jp.coulomb_friction,
                   jp.gravity_torque_amplitude, jp.limit_lo, jp.limit_hi,
                   jp.limit_stiffness)


def valve_position(state: MuscleState, params: MuscleParams) -> float:
    """Normalized actuation duty derived from the pressure error, in [-1, 1]."""
    v = (state.pressure_des - state.pressure_obs) / (params.p_max - params.p_min)
    return min(max(v, -1.0), 1.0)


def make_joint_state(angle: float, velocity: float, mp: MuscleParams, jp: JointParams,
                     p_obs: tuple[float, float], p_des: tuple[float, float]) -> JointState:
    """Build a JointState with contractions derived from the angle."""
    e_ag, e_ant = muscle_kinematics(angle, jp, mp)
    return JointState(
        angle=angle,
        velocity=velocity,
        agonist=MuscleState(p_obs[0], clamp_pressure(p_des[0], mp), e_ag),
        antagonist=MuscleState(p_obs[1], clamp_pressure(p_des[1], mp), e_ant),
    )
