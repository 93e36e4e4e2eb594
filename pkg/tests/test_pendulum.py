"""Spherical-pendulum plant and constrained-PID tests."""

import math

import numpy as np
import pytest

from geopid.geometry import ConstraintDistribution, InertiaMetric
from geopid.integrate import rk4_step
from geopid.lie import AlgebraElement, exp_so3, project_rotation, rotation_defect
from geopid.pid import GainSet, pid_constrained_step
from geopid.systems.pendulum import (
    PendulumParams,
    UprightController,
    constraint_moment,
    dynamics,
    energy,
    tilt_gradient,
    tilt_potential,
)

E3 = np.array([0.0, 0.0, 1.0])
NOMINAL = PendulumParams(mass=1.0, rod_length=1.0, gravity=1.0,
                         inertia=np.array([1.0, 1.0, 1.0]))
RNG = np.random.default_rng(3210)


class TestPlant:
    def test_upright_equilibrium(self):
        _, domega = dynamics(np.eye(3), np.zeros(3), np.zeros(3), NOMINAL)
        assert np.allclose(domega, 0.0)

    def test_hanging_equilibrium(self):
        r = exp_so3([np.pi, 0.0, 0.0])
        _, domega = dynamics(r, np.zeros(3), np.zeros(3), NOMINAL)
        assert np.allclose(domega, 0.0, atol=1e-15)

    def test_constraint_moment_value(self):
        inertia = np.array([1.0, 2.0, 3.0])
        got = constraint_moment(np.array([1.0, 1.0, 0.0]), inertia)
        assert np.allclose(got, [0.0, 0.0, 1.0])

    def test_spin_rate_exactly_zero(self):
        p = PendulumParams(mass=1.5, rod_length=1.5, gravity=1.0,
                           inertia=np.array([1.5, 1.5, 1.5]))
        x = np.concatenate([exp_so3([2.8, 0.4, 0.0]).ravel(), [0.3, -0.2, 0.0]])

        def rhs(t, y):
            dr, dw = dynamics(y[:9].reshape(3, 3), y[9:], np.zeros(3), p)
            return np.concatenate([dr.ravel(), dw])

        for _ in range(5000):
            x = rk4_step(rhs, 0.0, x, 1e-3)
            if rotation_defect(x[:9].reshape(3, 3)) > 1e-9:
                x[:9] = project_rotation(x[:9].reshape(3, 3)).ravel()
        assert x[11] == 0.0  # bitwise zero

    def test_energy_conserved_unforced(self):
        x = np.concatenate([exp_so3([2.0, 0.5, 0.0]).ravel(), [0.3, -0.2, 0.0]])
        e0 = energy(x[:9].reshape(3, 3), x[9:], NOMINAL)

        def rhs(t, y):
            dr, dw = dynamics(y[:9].reshape(3, 3), y[9:], np.zeros(3), NOMINAL)
            return np.concatenate([dr.ravel(), dw])

        for _ in range(10000):
            x = rk4_step(rhs, 0.0, x, 1e-3)
            if rotation_defect(x[:9].reshape(3, 3)) > 1e-9:
                x[:9] = project_rotation(x[:9].reshape(3, 3)).ravel()
        e1 = energy(x[:9].reshape(3, 3), x[9:], NOMINAL)
        assert abs(e1 - e0) / abs(e0) < 1e-5


class TestGradient:
    def test_single_axis_value(self):
        for theta in (0.2, 1.0, 2.5):
            r = exp_so3([theta, 0.0, 0.0])
            assert np.allclose(tilt_gradient(r), [math.sin(theta), 0.0, 0.0], atol=1e-12)
            assert tilt_potential(r) == pytest.approx(1.0 - math.cos(theta))

    def test_upright_zero(self):
        assert np.allclose(tilt_gradient(np.eye(3)), 0.0)
        assert tilt_potential(np.eye(3)) == pytest.approx(0.0)


class TestController:
    def test_upright_depends_only_on_rates(self):
        ctl = UprightController(NOMINAL, GainSet(kp=16, kd=8, ki=1))
        ctl.omega_i = np.array([0.2, -0.1, 0.0])
        omega = np.array([0.4, 0.3, 0.0])
        tau, dv = ctl.torque(np.eye(3), omega)
        assert np.allclose(dv, 0.0)
        assert np.allclose(tau, [-(8 * 0.4 + 1 * 0.2), -(8 * 0.3 - 1 * 0.1), 0.0])
        assert tau[2] == 0.0

    def test_matches_generic_constrained_step(self):
        gains = GainSet(kp=16, kd=8, ki=1)
        ctl = UprightController(NOMINAL, gains)
        dist = ConstraintDistribution.from_constraint_projector(np.outer(E3, E3))
        met = InertiaMetric.constant(np.diag(NOMINAL.inertia), "left")
        for _ in range(25):
            r = exp_so3(np.concatenate([RNG.normal(size=2), [0.0]]))
            omega = np.concatenate([RNG.normal(size=2), [0.0]])
            ctl.omega_i = np.concatenate([RNG.normal(size=2), [0.0]])
            tau, _ = ctl.torque(r, omega)
            generic_tau, generic_dvi = pid_constrained_step(
                AlgebraElement(omega, "left"),
                AlgebraElement(ctl.omega_i, "left"),
                gains, met, dist, tilt_gradient(r),
            )
            assert np.allclose(tau, generic_tau, atol=1e-12)
            # verbatim two-component integrator equals the projected covariant one
            dv = tilt_gradient(r)
            verbatim = np.array([dv[0] / NOMINAL.inertia[0], dv[1] / NOMINAL.inertia[1], 0.0])
            assert np.allclose(generic_dvi, verbatim, atol=1e-12)

    def test_integrator_plain_derivative(self):
        ctl = UprightController(NOMINAL, GainSet(kp=16, kd=8, ki=1))
        r = exp_so3([0.7, 0.0, 0.0])
        ctl.advance(r, 0.01)
        assert ctl.omega_i[0] == pytest.approx(0.01 * math.sin(0.7), rel=1e-12)
        assert ctl.omega_i[1] == pytest.approx(0.0, abs=1e-15)
        assert ctl.omega_i[2] == 0.0
