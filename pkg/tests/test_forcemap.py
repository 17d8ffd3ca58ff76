import math

import numpy as np
import pytest

from pamsim.config import SimConfig
from pamsim.errors import NoContactError
from pamsim.forcemap import (
    CONTACT_CONDITIONS,
    ImpactRig,
    build_force_map,
    condition_by_index,
    contact_conditions,
    max_safe_velocity,
    parse_velocity_grid,
    run_drive_free_impact,
    run_impact,
    run_static_contact,
    write_force_map_csv,
)

# the ten rows as independent literals (index, body part, N/mm, ShA, N)
TABLE = [
    (1, "Skull", 150.0, 70.0, 130.0),
    (2, "Face/hand", 75.0, 70.0, 65.0),
    (3, "Lower legs", 60.0, 30.0, 260.0),
    (4, "Thighs", 50.0, 30.0, 300.0),
    (5, "Neck", 50.0, 70.0, 440.0),
    (6, "Lower arms", 40.0, 70.0, 320.0),
    (7, "Back", 35.0, 30.0, 420.0),
    (8, "Upper arms", 30.0, 30.0, 300.0),
    (9, "Chest", 25.0, 70.0, 280.0),
    (10, "Abdomen", 10.0, 10.0, 220.0),
]


@pytest.fixture(scope="module")
def rig():
    return ImpactRig(SimConfig())


class TestTable:
    def test_table_matches_field_for_field(self):
        assert len(contact_conditions()) == 10
        for cond, row in zip(contact_conditions(), TABLE):
            assert (cond.index, cond.body_part, cond.stiffness_n_per_mm,
                    cond.hardness_shore_a, cond.pain_threshold_n) == row

    def test_lookup_by_index(self):
        assert condition_by_index(7).body_part == "Back"
        assert condition_by_index(1).stiffness_n_per_m == 150_000.0
        with pytest.raises(KeyError):
            condition_by_index(11)


class TestDriveFreeOracle:
    def test_scaling_law_random_sweep(self, rng):
        for _ in range(20):
            k = rng.uniform(10e3, 150e3)
            v = rng.uniform(0.1, 2.0)
            m_eff = rng.uniform(0.8, 3.0)
            peak = run_drive_free_impact(k, v, m_eff)
            assert peak / (v * math.sqrt(k * m_eff)) == pytest.approx(1.0, abs=0.02)

    def test_skull_max_safe_velocity(self):
        # threshold / sqrt(k m) = 130 / sqrt(150000 * 1.3) = 0.2944 m/s
        v = max_safe_velocity(condition_by_index(1), effective_mass=1.3)
        assert v == pytest.approx(0.294, rel=0.05)

    def test_iso_force_velocity_scales_with_inverse_sqrt_mass(self):
        """Quartering the moving mass doubles the velocity at equal force."""
        cond = condition_by_index(5)
        v_heavy = max_safe_velocity(cond, effective_mass=2.0)
        v_light = max_safe_velocity(cond, effective_mass=0.5)
        assert v_light / v_heavy == pytest.approx(2.0, rel=0.02)


class TestImpactRuns:
    def test_ramp_monotonicity(self, rig):
        """Larger ramp rate -> larger contact speed -> larger peak force."""
        cond = condition_by_index(3)
        rates = [2.0, 5.0, 12.0, 40.0, 400.0]
        entries = [rig.run(cond, r) for r in rates]
        speeds = [e.achieved_velocity for e in entries]
        peaks = [e.peak_force for e in entries]
        assert speeds == sorted(speeds)
        assert peaks == sorted(peaks)

    def test_run_impact_detects_and_freezes(self, rig):
        entry = rig.run(condition_by_index(1), ramp_rate=50.0)
        assert entry.peak_force > 100.0
        assert entry.achieved_velocity > 0.5
        assert entry.exceeds_pain_threshold == (entry.peak_force > 130.0)

    def test_no_contact_error(self):
        # ramp far too slow to reach the probe within the deadline
        with pytest.raises(NoContactError):
            run_impact(condition_by_index(1), ramp_rate=0.05)

    def test_static_contact_stays_below_thresholds(self):
        for cond in (condition_by_index(1), condition_by_index(10)):
            entry = run_static_contact(cond)
            assert entry.achieved_velocity == 0.0
            assert entry.peak_force > 0.0
            assert not entry.exceeds_pain_threshold

    def test_static_contact_close_to_drive_equilibrium(self):
        """Quasi-static entry: peak ~ fully developed drive torque / lever."""
        cfg = SimConfig()
        entry = run_static_contact(condition_by_index(1), cfg)
        from pamsim.plant import muscle_force, muscle_kinematics
        mp = cfg.muscle
        jp = cfg.joints[cfg.probe.attached_joint]
        e_ag, e_ant = muscle_kinematics(cfg.probe.engage_position, jp, mp)
        tau = jp.pulley_radius * (muscle_force(mp.p_max, e_ag, mp)
                                  - muscle_force(mp.p_min, e_ant, mp))
        static = tau / cfg.probe.lever_arm
        assert entry.peak_force == pytest.approx(static, rel=0.2)


@pytest.fixture(scope="module")
def small_map():
    conds = [condition_by_index(1), condition_by_index(5), condition_by_index(10)]
    velocities = [0.3, 0.9]
    return build_force_map(velocities, conds), conds, velocities


class TestForceMap:
    def test_entries_cover_grid_in_order(self, small_map):
        entries, conds, velocities = small_map
        assert len(entries) == len(conds) * len(velocities)
        keys = [(e.condition, e.target_velocity) for e in entries]
        assert keys == sorted(keys)
        for e in entries:
            assert e.achieved_velocity == pytest.approx(e.target_velocity, rel=0.05)

    def test_peak_grows_with_stiffness_at_fixed_velocity(self, small_map):
        entries, conds, velocities = small_map
        for v in velocities:
            col = {e.condition: e.peak_force for e in entries
                   if e.target_velocity == v}
            # conditions 1, 5, 10 have stiffness 150 > 50 > 10 N/mm
            assert col[1] > col[5] > col[10]

    def test_exceeds_flag_consistency(self, small_map):
        entries, _, _ = small_map
        by_index = {c.index: c for c in CONTACT_CONDITIONS}
        for e in entries:
            assert e.exceeds_pain_threshold == (
                e.peak_force > by_index[e.condition].pain_threshold_n)

    def test_csv_layout(self, small_map, tmp_path):
        entries, conds, velocities = small_map
        path = tmp_path / "map.csv"
        write_force_map_csv(path, entries)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "condition,body_part,velocity,peak_force,pain_threshold,exceeds"
        assert len(lines) == 1 + len(entries)
        first = lines[1].split(",")
        assert first[0] == "1" and first[1] == "Skull"


class TestGrid:
    def test_parse_velocity_grid(self):
        grid = parse_velocity_grid("0.12:1.94:14")
        assert len(grid) == 14
        assert grid[0] == pytest.approx(0.12)
        assert grid[-1] == pytest.approx(1.94)
        assert np.allclose(np.diff(grid), 0.14)

    def test_parse_errors(self):
        with pytest.raises(ValueError):
            parse_velocity_grid("0.1:1.9")
        with pytest.raises(ValueError):
            parse_velocity_grid("0.1:1.9:0")
