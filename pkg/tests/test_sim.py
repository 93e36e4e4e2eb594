"""Engine tests: integrator accuracy, scenario validation, determinism,
zero-order hold, decimation, and hard-failure behavior."""

import math

import numpy as np
import pytest

from geopid.integrate import rk4_step
from geopid.lie import hat, project_rotation
from geopid.scenario import ScenarioError, apply_override, load_scenario, validate_scenario
from geopid.scenarios import scenario_path
from geopid.sim import (
    MonitorHardFailure,
    SimConfig,
    run_scenario,
    write_monitor_report,
    write_trace_csv,
)
from geopid.systems.references import CurveReference


class TestRk4:
    def test_zero_rhs_keeps_state(self):
        y = np.array([1.0, -2.0, 3.0])
        assert np.array_equal(rk4_step(lambda t, x: np.zeros(3), 0.0, y, 0.01), y)

    def test_exponential_growth_accuracy(self):
        y = np.array([1.0])
        for k in range(1000):
            y = rk4_step(lambda t, x: x, k * 1e-3, y, 1e-3)
        assert abs(float(y[0]) - math.e) / math.e < 1e-12

    def test_rotation_flow_quarter_turn(self):
        omega = np.array([0.0, 0.0, 1.0])
        y = np.eye(3).ravel()
        n = 1600
        h = (np.pi / 2.0) / n
        for k in range(n):
            y = rk4_step(lambda t, x: (x.reshape(3, 3) @ hat(omega)).ravel(), 0.0, y, h)
            r = y.reshape(3, 3)
            if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-9:
                y = project_rotation(r).ravel()
        got = y.reshape(3, 3) @ np.array([1.0, 0.0, 0.0])
        assert np.max(np.abs(got - [0.0, 1.0, 0.0])) < 1e-9

    def test_non_positive_step_rejected(self):
        with pytest.raises(ValueError):
            rk4_step(lambda t, x: x, 0.0, np.ones(1), 0.0)

    def test_non_finite_derivative_raises(self):
        with pytest.raises(FloatingPointError):
            rk4_step(lambda t, x: x * np.inf, 0.0, np.ones(1), 1e-3)


class TestScenarioValidation:
    def base(self):
        return {
            "system": "pendulum",
            "sim": {"h_plant_s": 0.001, "h_control_s": 0.02, "t_final_s": 1.0},
            "gains": {"kp": 16.0, "kd": 8.0, "kI": 1.0},
            "reference": {"kind": "constant"},
            "initial": {"tilt_axis": [1.0, 0.0, 0.0], "tilt_angle_deg": 10.0,
                        "omega_rad_s": [0.0, 0.0, 0.0]},
            "params_nominal": {"mass_kg": 1.0, "rod_length_m": 1.0, "gravity_m_s2": 1.0,
                               "inertia_kgm2": [1.0, 1.0, 1.0]},
            "params_true": {"scale_all": 1.5},
        }

    def test_unknown_key_rejected_with_path(self):
        sc = self.base()
        sc["sim"]["h_plnt_s"] = 0.001
        with pytest.raises(ScenarioError, match="sim.h_plnt_s"):
            validate_scenario(sc)

    def test_missing_required_key(self):
        sc = self.base()
        del sc["gains"]["kp"]
        with pytest.raises(ScenarioError, match="gains.kp"):
            validate_scenario(sc)

    def test_control_rate_must_divide_plant_rate(self):
        sc = self.base()
        sc["sim"]["h_control_s"] = 0.0015
        with pytest.raises(ScenarioError, match="integer multiple"):
            validate_scenario(sc)

    def test_scale_all_expansion_skips_gravity(self):
        sc = validate_scenario(self.base())
        assert sc["params_true"]["mass_kg"] == pytest.approx(1.5)
        assert sc["params_true"]["inertia_kgm2"] == pytest.approx([1.5, 1.5, 1.5])
        assert sc["params_true"]["gravity_m_s2"] == pytest.approx(1.0)

    def test_override_requires_existing_key(self):
        sc = self.base()
        with pytest.raises(ScenarioError, match="missing scenario key"):
            apply_override(sc, "gains.kq=3.0")

    def test_override_applies(self):
        sc = self.base()
        apply_override(sc, "gains.kI=2.5")
        assert sc["gains"]["kI"] == 2.5

    def test_bundled_scenarios_all_validate(self):
        from geopid.scenarios import all_names

        for name in all_names():
            load_scenario(scenario_path(name))

    def test_unknown_kind_rejected(self):
        sc = self.base()
        sc["reference"]["kind"] = "spline"
        with pytest.raises(ScenarioError, match="reference.kind"):
            validate_scenario(sc)


class TestReferences:
    def test_waypoint_interpolation(self):
        ref = CurveReference.from_config(
            {"kind": "waypoint", "times_s": [0.0, 2.0, 4.0],
             "values": [[0.0, 0.0], [2.0, -2.0], [2.0, -2.0]]}, dim=2)
        assert np.allclose(ref.value(1.0), [1.0, -1.0])
        assert np.allclose(ref.velocity(1.0), [1.0, -1.0])
        assert np.allclose(ref.velocity(3.0), [0.0, 0.0])
        assert np.allclose(ref.value(10.0), [2.0, -2.0])

    def test_sinusoid_derivatives(self):
        ref = CurveReference.from_config(
            {"kind": "sinusoid", "offset": [1.0], "drift_per_s": [0.5],
             "amplitude": [2.0], "freq_rad_s": [0.7], "phase_rad": [0.3]}, dim=1)
        t = 1.234
        eps = 1e-6
        fd_v = (ref.value(t + eps) - ref.value(t - eps)) / (2 * eps)
        fd_a = (ref.velocity(t + eps) - ref.velocity(t - eps)) / (2 * eps)
        assert np.allclose(ref.velocity(t), fd_v, atol=1e-7)
        assert np.allclose(ref.acceleration(t), fd_a, atol=1e-6)


def short_pendulum(t_final=2.0):
    return validate_scenario({
        "system": "pendulum",
        "sim": {"h_plant_s": 0.001, "h_control_s": 0.02, "t_final_s": t_final},
        "gains": {"kp": 16.0, "kd": 8.0, "kI": 1.0},
        "reference": {"kind": "constant"},
        "initial": {"tilt_axis": [1.0, 0.0, 0.0], "tilt_angle_deg": 30.0,
                    "omega_rad_s": [0.0, 0.0, 0.0]},
        "params_nominal": {"mass_kg": 1.0, "rod_length_m": 1.0, "gravity_m_s2": 1.0,
                           "inertia_kgm2": [1.0, 1.0, 1.0]},
        "params_true": {"scale_all": 1.5},
    })


class TestEngine:
    def test_deterministic_traces(self, tmp_path):
        r1 = run_scenario(short_pendulum())
        r2 = run_scenario(short_pendulum())
        assert np.array_equal(r1.trace, r2.trace)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_trace_csv(p1, r1)
        write_trace_csv(p2, r2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_trace_shape_and_decimation(self):
        full = run_scenario(short_pendulum())
        dec = run_scenario(short_pendulum(), decimate=10)
        assert full.trace.shape[0] == 2001
        assert dec.trace.shape[0] == 201
        assert dec.times[-1] == pytest.approx(2.0)

    def test_zero_order_hold_visible_in_trace(self):
        r = run_scenario(short_pendulum())
        tau1 = r.column("tau_1_nm")
        n_sub = 20  # 0.02 / 0.001
        # within each hold window the control is bitwise constant
        for k in range(0, 5):
            block = tau1[1 + k * n_sub: 1 + (k + 1) * n_sub]
            assert np.all(block == block[0])
        # and it changes across at least some tick boundaries
        ticks = tau1[1::n_sub]
        assert np.any(np.diff(ticks) != 0.0)

    def test_hard_failure_on_blowup(self):
        sc = load_scenario(scenario_path("so3_disturbance_rejection"),
                           overrides=["gains.kI=1.0e6", "sim.t_final_s=4.0"])
        with pytest.raises(MonitorHardFailure):
            with np.errstate(all="ignore"):
                run_scenario(sc)

    def test_monitor_report_written(self, tmp_path):
        r = run_scenario(short_pendulum())
        path = tmp_path / "report.txt"
        write_monitor_report(path, r)
        text = path.read_text()
        assert "orthonormality" in text
        assert "overall:" in text

    def test_csv_header_and_precision(self, tmp_path):
        r = run_scenario(short_pendulum(), decimate=100)
        path = tmp_path / "t.csv"
        write_trace_csv(path, r)
        lines = path.read_text().splitlines()
        assert lines[0].split(",")[0] == "t_s"
        assert len(lines) == r.trace.shape[0] + 1
        # 17 significant digits survive a round trip
        value = float(lines[5].split(",")[1])
        assert value == r.trace[4, 1]

    def test_windup_freeze_holds_integrator_between_ticks(self):
        sc = load_scenario(scenario_path("quad_attitude"),
                           overrides=["sim.t_final_s=2.0"])
        r = run_scenario(sc)
        sat = r.column("saturated")
        zi = np.stack([r.column("integrator_1"), r.column("integrator_2"),
                       r.column("integrator_3")], axis=1)
        n_sub = 20
        ticks = np.arange(1, len(sat), n_sub)  # first row of each hold window
        frozen_checked = 0
        for a, b in zip(ticks[:-1], ticks[1:]):
            if sat[a] > 0.5:  # anti-windup active during this window
                assert np.array_equal(zi[a], zi[b])
                frozen_checked += 1
        assert frozen_checked > 0

    def test_sim_config_validation(self):
        with pytest.raises(KeyError):
            SimConfig.from_dict({"h_plant_s": 0.001})
