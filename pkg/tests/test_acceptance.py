"""Acceptance suite: one test per acceptance criterion, each printing a
pass/fail line with its measured margin.  Scenario executions are cached
module-wide so criteria share runs; step-halved twins are executed once
for the convergence criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete.
"""

import math
import time

import numpy as np
import pytest

from geopid.geometry import InertiaMetric, koszul_numeric, quadratic_correction
from geopid.integrate import rk4_step
from geopid.lie import AlgebraElement, Rotation, exp_so3
from geopid.pid import (
    ControllerState,
    ErrorState,
    GainSet,
    estimate_mu_lambda,
    gain_bounds,
    pid_full_step,
    q_matrix,
)
from geopid.scenario import load_scenario
from geopid.scenarios import PAPER_SUITE, scenario_path
from geopid.sim import run_scenario
from geopid.systems.hoop import HoopParams

RNG = np.random.default_rng(20260809)

_CACHE = {}


def get_run(name, halved=False):
    """Run a bundled scenario once and memoize (result, wall_seconds)."""
    key = (name, halved)
    if key not in _CACHE:
        overrides = []
        if halved:
            sc = load_scenario(scenario_path(name))
            overrides = [f"sim.h_plant_s={sc['sim']['h_plant_s'] / 2.0!r}"]
        sc = load_scenario(scenario_path(name), overrides)
        start = time.perf_counter()
        result = run_scenario(sc, decimate=5)
        _CACHE[key] = (result, time.perf_counter() - start)
    return _CACHE[key]


def report(name, passed, detail):
    print(f"[{name}] {'PASS' if passed else 'FAIL'}: {detail}")
    assert passed, detail


def monitor(result, name):
    return next(m for m in result.monitors if m.name == name)


# ---------------------------------------------------------------------------
# 1. Geometry identity suite
# ---------------------------------------------------------------------------

def test_geometry_identity_suite():
    start = time.perf_counter()
    inertia = np.diag([0.4, 0.7, 1.1])
    met = InertiaMetric.constant(inertia, "left")
    base = Rotation(exp_so3(np.array([0.3, -0.5, 0.8])))
    worst_tf = worst_met = worst_kos = 0.0
    for _ in range(100):
        x, y, z = (RNG.normal(size=3) for _ in range(3))
        tf = quadratic_correction(met, x, y, "left") - quadratic_correction(
            met, y, x, "left"
        ) - met.apply(np.cross(x, y))
        worst_tf = max(worst_tf, float(np.max(np.abs(tf))))
        met_resid = float(quadratic_correction(met, z, x, "left") @ y) + float(
            quadratic_correction(met, z, y, "left") @ x
        )
        worst_met = max(worst_met, abs(met_resid))
        kos = koszul_numeric(lambda p: inertia, x, y, z, base, 1e-5)
        alg = float(quadratic_correction(met, x, y, "left") @ z)
        worst_kos = max(worst_kos, abs(kos - alg))
    elapsed = time.perf_counter() - start
    ok = worst_tf < 1e-9 and worst_met < 1e-6 and worst_kos < 1e-6 and elapsed < 5.0
    report(
        "geometry-identities", ok,
        f"torsion {worst_tf:.2e} (<1e-9), metricity {worst_met:.2e} (<1e-6), "
        f"koszul {worst_kos:.2e} (<1e-6), runtime {elapsed:.2f}s (<5s)",
    )


# ---------------------------------------------------------------------------
# 2. Linear-space reduction
# ---------------------------------------------------------------------------

def test_linear_reduction_matches_textbook_pid():
    mass = np.diag([2.0, 3.0, 1.5])
    met = InertiaMetric.constant(mass, "bi", algebra="rn")
    gains = GainSet(kp=150.0, kd=8.0, ki=10.0)
    delta = np.array([0.01, -0.02, 0.005])

    def ref(t):
        xr = np.array([0.5 * math.sin(t), 0.5 * math.cos(0.5 * t), 0.05 * t * t])
        vr = np.array([0.5 * math.cos(t), -0.25 * math.sin(0.5 * t), 0.1 * t])
        ar = np.array([-0.5 * math.sin(t), -0.125 * math.cos(0.5 * t), 0.1])
        return xr, vr, ar

    def rhs_geometric(t, y):
        x, v, zi = y[:3], y[3:6], y[6:]
        xr, vr, ar = ref(t)
        err = ErrorState(x - xr, AlgebraElement(v - vr, "left"),
                         AlgebraElement(vr, "left"), "left")
        ctrl = ControllerState(AlgebraElement(zi, "left"))
        f_u, dzi = pid_full_step(err, ctrl, gains, met, mass @ ar)
        return np.concatenate([v, np.linalg.solve(mass, f_u + delta), dzi])

    def rhs_textbook(t, y):
        x, v, ei = y[:3], y[3:6], y[6:]
        xr, vr, ar = ref(t)
        e, de = x - xr, v - vr
        f_u = -mass @ (gains.kp * e + gains.kd * de + gains.ki * ei - ar)
        return np.concatenate([v, np.linalg.solve(mass, f_u + delta), e])

    y_a = np.concatenate([[0.3, -0.2, 0.1], np.zeros(3), np.zeros(3)])
    y_b = y_a.copy()
    worst = 0.0
    h = 1e-3
    for k in range(10000):
        t = k * h
        y_a = rk4_step(rhs_geometric, t, y_a, h)
        y_b = rk4_step(rhs_textbook, t, y_b, h)
        worst = max(worst, float(np.max(np.abs(y_a - y_b))))
    report(
        "linear-reduction", worst < 1e-9,
        f"state-for-state deviation over 10 s: {worst:.2e} (<1e-9)",
    )


# ---------------------------------------------------------------------------
# 3. Constant-disturbance rejection equilibrium
# ---------------------------------------------------------------------------

def test_disturbance_rejection_equilibrium():
    result, wall = get_run("so3_disturbance_rejection")
    zi = np.array([
        result.column("integrator_1")[-1],
        result.column("integrator_2")[-1],
        result.column("integrator_3")[-1],
    ])
    target = np.array([0.02, -0.01, 0.015]) / 2.0 / 60.0  # inertia^-1 delta / kI
    err = float(np.linalg.norm(zi - target))
    ok = err < 1e-6 and wall < 10.0
    report(
        "disturbance-rejection", ok,
        f"|zeta_I - I^-1 delta / kI| = {err:.2e} (<1e-6), runtime {wall:.1f}s (<10s)",
    )


# ---------------------------------------------------------------------------
# 4. Quadrotor benchmark
# ---------------------------------------------------------------------------

def test_quadrotor_attitude_scenario():
    result, wall = get_run("quad_attitude")
    tail = monitor(result, "acceptance_error_tail")
    sat = monitor(result, "acceptance_saturation_seen")
    ok = tail.passed and sat.passed and wall < 30.0
    report(
        "quadrotor-attitude", ok,
        f"{tail.detail}; {sat.detail}; runtime {wall:.1f}s (<30s)",
    )


# ---------------------------------------------------------------------------
# 5. Cart-pendulum benchmark
# ---------------------------------------------------------------------------

def test_ipc_scenario():
    result, wall = get_run("ipc_stabilize")
    tilt = monitor(result, "acceptance_error_tail")
    vel = monitor(result, "acceptance_cart_velocity")
    ok = tilt.passed and vel.passed and wall < 10.0
    report(
        "ipc-stabilize", ok,
        f"{tilt.detail}; {vel.detail}; runtime {wall:.1f}s (<10s)",
    )


# ---------------------------------------------------------------------------
# 6. Rolling hoop benchmark (three reference types)
# ---------------------------------------------------------------------------

def test_hoop_scenarios():
    total = 0.0
    details = []
    ok = True
    for name in ("hoop_fixed_point", "hoop_linear_velocity", "hoop_sinusoid_velocity"):
        result, wall = get_run(name)
        total += wall
        tail = monitor(result, "acceptance_error_tail")
        roll = monitor(result, "acceptance_rolling")
        ok &= tail.passed and roll.passed
        details.append(f"{name}: err {tail.detail.split(':')[1].strip()}")
    params = HoopParams(hoop_mass=1.0, hoop_inertia=0.021, radius=0.18,
                        cart_mass=3.28, cart_inertia=0.035, cart_offset=0.14,
                        incline=0.0)
    beta_max = math.degrees(params.max_incline())
    ok &= abs(beta_max - 36.0) < 1.0 and total < 30.0
    report(
        "rolling-hoop", ok,
        "; ".join(details) + f"; beta_max {beta_max:.2f} deg (36 +- 1); "
        f"runtime {total:.1f}s (<30s)",
    )


# ---------------------------------------------------------------------------
# 7. Rolling sphere benchmark (three reference types)
# ---------------------------------------------------------------------------

def test_sphere_scenarios():
    total = 0.0
    details = []
    ok = True
    for name in ("sphere_sinusoid", "sphere_circle", "sphere_fixed_point"):
        result, wall = get_run(name)
        total += wall
        tail = monitor(result, "acceptance_error_tail")
        noslip = monitor(result, "acceptance_noslip")
        ok &= tail.passed and noslip.passed
        details.append(f"{name}: err {tail.detail.split(':')[1].strip()}")
    ok &= total < 60.0
    report(
        "rolling-sphere", ok,
        "; ".join(details) + f"; no-slip within 1e-8; runtime {total:.1f}s (<60s)",
    )


# ---------------------------------------------------------------------------
# 8. Spherical pendulum benchmark
# ---------------------------------------------------------------------------

def test_pendulum_scenario():
    result, _ = get_run("pendulum_upright")
    tail = monitor(result, "acceptance_error_tail")
    spin = monitor(result, "acceptance_spin")
    exp_tail = monitor(result, "acceptance_exp_tail")
    ok = tail.passed and spin.passed and exp_tail.passed
    report(
        "spherical-pendulum", ok,
        f"{tail.detail}; {spin.detail}; {exp_tail.detail}",
    )


# ---------------------------------------------------------------------------
# 9. Certificate monitor
# ---------------------------------------------------------------------------

def test_lyapunov_monitor():
    result, _ = get_run("so3_disturbance_rejection")
    lyap = monitor(result, "lyapunov_decrease")
    verified = GainSet(kp=160.0, kd=8.0, ki=60.0, kappa=1.2)
    violated = GainSet(kp=160.0, kd=8.0, ki=520.0, kappa=1.0)  # above kd^3/mu
    q_ok = float(np.linalg.eigvalsh(q_matrix(verified, mu=1.0))[0])
    q_bad = float(np.linalg.eigvalsh(q_matrix(violated, mu=1.0))[0])
    bounds = gain_bounds(mu=1.0, lam=1.0, kappa=1.2, kd=8.0, ki=60.0)
    gains_verified = 60.0 < bounds.ki_max and 160.0 > bounds.kp_min
    ok = lyap.passed and lyap.enforced and q_ok > 0.0 and q_bad <= 0.0 and gains_verified
    report(
        "lyapunov-monitor", ok,
        f"verified-gain run: {lyap.detail}; min eig(Q) verified {q_ok:.3g} (>0), "
        f"violated-kI {q_bad:.3g} (<=0)",
    )


# ---------------------------------------------------------------------------
# 10. Integration convergence under step halving
# ---------------------------------------------------------------------------

def test_integration_convergence():
    ok = True
    details = []
    for name in PAPER_SUITE + ("so3_disturbance_rejection",):
        base, _ = get_run(name)
        halved, _ = get_run(name, halved=True)
        diff = abs(base.final_error() - halved.final_error())
        ok &= diff < 1e-6
        details.append(f"{name}: {diff:.1e}")
    report(
        "integration-convergence", ok,
        "terminal-error change under h/2: " + ", ".join(details) + " (<1e-6 each)",
    )
