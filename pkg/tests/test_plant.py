import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pamsim.errors import DomainError, InvalidStateError
from pamsim.plant import (
    FORCE_LAW_LINEAR,
    JointParams,
    JointState,
    MuscleParams,
    MuscleState,
    joint_torque,
    make_joint_state,
    muscle_force,
    muscle_kinematics,
    step_pressure,
    valve_position,
    with_target,
)


def test_param_invariants_enforced():
    with pytest.raises(ValueError):
        MuscleParams(p_min=5.0, p_max=5.0)
    with pytest.raises(ValueError):
        MuscleParams(tau=0.0)
    with pytest.raises(ValueError):
        MuscleParams(a=0.1, b=0.2)
    with pytest.raises(ValueError):
        MuscleParams(eps_max=1.0)
    with pytest.raises(ValueError):
        JointParams(inertia=0.0)
    with pytest.raises(ValueError):
        JointParams(limit_lo=1.0, limit_hi=-1.0)
    with pytest.raises(ValueError):
        JointParams(viscous_friction=-0.1)


class TestStepPressure:
    def test_fixed_point(self):
        mp = MuscleParams()
        s = MuscleState(pressure_obs=1.0, pressure_des=1.0)
        for dt in (0.0005, 0.002, 0.01):
            assert step_pressure(s, mp, dt).pressure_obs == 1.0

    def test_single_euler_step(self):
        # hand-computed: 0 + 0.002 * (2 - 0) / 0.1 = 0.04
        mp = MuscleParams(tau=0.1)
        s = MuscleState(pressure_obs=0.0, pressure_des=2.0)
        out = step_pressure(s, mp, 0.002)
        assert out.pressure_obs == pytest.approx(0.04, abs=1e-15)
        assert out.contraction == s.contraction

    def test_target_clamped_on_ingestion_and_converges(self):
        mp = MuscleParams(p_max=5.0)
        s = with_target(MuscleState(pressure_obs=1.0, pressure_des=1.0), mp, 10.0)
        assert s.pressure_des == 5.0
        for _ in range(20000):
            s = step_pressure(s, mp, 0.002)
        assert s.pressure_obs == pytest.approx(5.0, abs=1e-12)

    def test_monotone_convergence(self):
        mp = MuscleParams()
        s = MuscleState(pressure_obs=0.5, pressure_des=4.0)
        gap = abs(s.pressure_des - s.pressure_obs)
        for _ in range(500):
            s = step_pressure(s, mp, 0.002)
            new_gap = abs(s.pressure_des - s.pressure_obs)
            assert new_gap <= gap
            gap = new_gap

    def test_preconditions(self):
        mp = MuscleParams(tau=0.1)
        s = MuscleState(1.0, 1.0)
        with pytest.raises(DomainError):
            step_pressure(s, mp, 0.0)
        with pytest.raises(DomainError):
            step_pressure(s, mp, 0.02)  # > tau/10
        with pytest.raises(InvalidStateError):
            step_pressure(MuscleState(math.nan, 1.0), mp, 0.002)
        with pytest.raises(InvalidStateError):
            with_target(s, mp, math.inf)


class TestMuscleForce:
    def test_zero_pressure(self):
        mp = MuscleParams()
        for eps in (0.0, 0.1, mp.eps_max):
            assert muscle_force(0.0, eps, mp) == 0.0

    def test_force_curve_root(self):
        # a (1 - eps/eps_max)^2 = b  =>  F = 0
        mp = MuscleParams(a=1.0, b=0.2)
        eps = mp.eps_max * (1.0 - math.sqrt(0.2))
        assert muscle_force(3.0, eps, mp) == pytest.approx(0.0, abs=1e-12)

    def test_hand_value(self):
        # 100 * 2 * (0.25 - 0.2) = 10 N
        mp = MuscleParams(f0=100.0, a=1.0, b=0.2)
        assert muscle_force(2.0, mp.eps_max / 2, mp) == pytest.approx(10.0, abs=1e-12)

    def test_domain_error(self):
        mp = MuscleParams()
        with pytest.raises(DomainError):
            muscle_force(2.0, -0.01, mp)
        with pytest.raises(DomainError):
            muscle_force(2.0, mp.eps_max + 0.01, mp)

    @given(pressure=st.floats(0.0, 5.0), frac=st.floats(0.0, 1.0))
    @settings(max_examples=300, deadline=None)
    def test_nonnegative_on_grid(self, pressure, frac):
        mp = MuscleParams()
        assert muscle_force(pressure, frac * mp.eps_max, mp) >= 0.0

    def test_linear_law_matches_tangent_at_operating_point(self):
        mp = MuscleParams()
        p0, e0 = mp.medium_pressure, mp.eps_max / 2
        f_quad = muscle_force(p0, e0, mp)
        f_lin = muscle_force(p0, e0, mp, law=FORCE_LAW_LINEAR)
        assert f_lin == pytest.approx(f_quad, rel=1e-12)
        # slope in pressure matches
        d = 1e-4
        dq = (muscle_force(p0 + d, e0, mp) - muscle_force(p0 - d, e0, mp)) / (2 * d)
        dl = (muscle_force(p0 + d, e0, mp, law=FORCE_LAW_LINEAR)
              - muscle_force(p0 - d, e0, mp, law=FORCE_LAW_LINEAR)) / (2 * d)
        assert dl == pytest.approx(dq, rel=1e-6)


class TestKinematics:
    def test_midpoint(self):
        mp, jp = MuscleParams(), JointParams()
        e_ag, e_ant = muscle_kinematics(0.0, jp, mp)
        assert e_ag == e_ant == mp.eps_max / 2

    def test_monotone_antisymmetry(self):
        mp, jp = MuscleParams(), JointParams()
        e_ag, e_ant = muscle_kinematics(0.4, jp, mp)
        assert e_ag > e_ant
        f_ag, f_ant = muscle_kinematics(-0.4, jp, mp)
        assert (f_ag, f_ant) == (e_ant, e_ag)

    def test_hand_value(self):
        # r=0.02, L=0.2, eps_max=0.3, angle=0.5 -> (0.2, 0.1)
        mp = MuscleParams(eps_max=0.3)
        jp = JointParams(pulley_radius=0.02, tendon_ref_length=0.2)
        e_ag, e_ant = muscle_kinematics(0.5, jp, mp)
        assert e_ag == pytest.approx(0.2, abs=1e-15)
        assert e_ant == pytest.approx(0.1, abs=1e-15)

    def test_clamped_to_range(self):
        mp, jp = MuscleParams(), JointParams()
        e_ag, e_ant = muscle_kinematics(50.0, jp, mp)
        assert e_ag == mp.eps_max and e_ant == 0.0


class TestJointTorque:
    def _quiet_joint(self):
        return JointParams(viscous_friction=0.0, coulomb_friction=0.0,
                           gravity_torque_amplitude=0.0)

    def test_symmetric_is_zero(self):
        mp, jp = MuscleParams(), self._quiet_joint()
        state = make_joint_state(0.0, 0.0, mp, jp, (2.5, 2.5), (2.5, 2.5))
        assert joint_torque(state, mp, jp) == 0.0

    def test_pure_force_product(self):
        # F_ag = 10 N, F_ant = 0, r = 0.02 -> tau = 0.2 N m
        mp = MuscleParams(f0=100.0, a=1.0, b=0.05)
        jp = self._quiet_joint()
        e_mid = mp.eps_max / 2
        p_ag = 10.0 / (mp.f0 * (0.25 * mp.a - mp.b))  # makes F_ag exactly 10
        state = JointState(0.0, 0.0,
                           agonist=MuscleState(p_ag, p_ag, e_mid),
                           antagonist=MuscleState(0.0, 0.0, e_mid))
        assert joint_torque(state, mp, jp) == pytest.approx(0.2, rel=1e-12)

    def test_limit_spring_contribution(self):
        # 0.01 rad beyond the limit at 100 N m / rad -> -1.0 N m
        mp = MuscleParams()
        jp = JointParams(viscous_friction=0.0, coulomb_friction=0.0,
                         gravity_torque_amplitude=0.0, limit_stiffness=100.0)
        angle = jp.limit_hi + 0.01
        state = make_joint_state(angle, 0.0, mp, jp, (0.0, 0.0), (0.0, 0.0))
        assert joint_torque(state, mp, jp) == pytest.approx(-1.0, rel=1e-9)

    @given(angle=st.floats(-0.9, 0.9), p_ag=st.floats(0.0, 5.0),
           p_ant=st.floats(0.0, 5.0))
    @settings(max_examples=200, deadline=None)
    def test_antisymmetry(self, angle, p_ag, p_ant):
        # swap pressures and negate the angle: torque negates (no gravity, v=0)
        mp, jp = MuscleParams(), self._quiet_joint()
        s1 = make_joint_state(angle, 0.0, mp, jp, (p_ag, p_ant), (p_ag, p_ant))
        s2 = make_joint_state(-angle, 0.0, mp, jp, (p_ant, p_ag), (p_ant, p_ag))
        t1 = joint_torque(s1, mp, jp)
        t2 = joint_torque(s2, mp, jp)
        assert t2 == pytest.approx(-t1, abs=1e-9)


def test_valve_position_clamped():
    mp = MuscleParams(p_min=0.0, p_max=5.0)
    assert valve_position(MuscleState(2.0, 3.0), mp) == pytest.approx(0.2)
    assert valve_position(MuscleState(5.0, 0.0), mp) == -1.0
    assert valve_position(MuscleState(0.0, 5.0), mp) == 1.0
