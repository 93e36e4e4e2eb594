"""Rolling-sphere plant and split-metric controller tests."""

import math

import numpy as np

from geopid.integrate import rk4_step
from geopid.lie import exp_so3, project_rotation, rotation_defect
from geopid.pid import GainSet
from geopid.systems.references import CurveReference
from geopid.systems.sphere import (
    SphereController,
    SphereModel,
    SphereParams,
    _rhs_fast,
    dynamics,
    energy,
)

RNG = np.random.default_rng(88)

BENCH = dict(shell_mass=1.0, shell_inertia=np.array([0.0213, 0.0205, 0.0228]),
             radius=0.18, cart_mass=3.28,
             cart_inertia=np.array([0.0353, 0.0378, 0.0368]), cart_offset=0.1)


def make_params(beta_deg=0.0, **over):
    kw = dict(BENCH, incline=math.radians(beta_deg))
    kw.update(over)
    return SphereParams(**kw)


def rand_state(position=(0.0, 0.0)):
    return np.concatenate([
        exp_so3(RNG.normal(size=3)).ravel(),
        [position[0], position[1], 0.18],
        exp_so3(RNG.normal(size=3)).ravel(),
        RNG.normal(size=3), RNG.normal(size=3),
    ])


class TestPlant:
    def test_flat_rest_is_equilibrium(self):
        model = SphereModel(make_params(0.0))
        x = np.concatenate([np.eye(3).ravel(), [0, 0, 0.18],
                            np.eye(3).ravel(), np.zeros(3), np.zeros(3)])
        dx = dynamics(model, x, np.zeros(3))
        assert np.max(np.abs(dx)) < 1e-14

    def test_cart_max_incline(self):
        got = math.degrees(make_params().max_incline())
        assert abs(got - 25.0) < 0.5  # benchmark quotes 25 degrees

    def test_free_sphere_rolls_downhill(self):
        model = SphereModel(make_params(20.0))
        x = np.concatenate([np.eye(3).ravel(), [0, 0, 0.18],
                            np.eye(3).ravel(), np.zeros(3), np.zeros(3)])
        for _ in range(200):
            x = rk4_step(lambda t, y: dynamics(model, y, np.zeros(3)), 0.0, x, 1e-3)
        # slope rises along +y, so the free sphere must drift to -y
        assert x[10] < 0.0
        assert abs(x[9]) < abs(x[10]) * 0.2

    def test_compiled_rhs_matches_reference(self):
        p = make_params(12.0)
        model = SphereModel(p)
        args = model.rhs_args()
        for _ in range(25):
            x = rand_state()
            tau = RNG.normal(size=3)
            assert np.max(np.abs(dynamics(model, x, tau) - _rhs_fast(x, tau, *args))) < 1e-13

    def test_energy_conserved_unforced_flat(self):
        model = SphereModel(make_params(0.0))
        args = model.rhs_args()
        x = np.concatenate([np.eye(3).ravel(), [0, 0, 0.18],
                            exp_so3([0.3, 0.2, 0.0]).ravel(),
                            [-0.1, -0.2, 0.5], [0.2, -0.1, 0.1]])
        e0 = energy(model, x)
        for _ in range(10000):
            x = rk4_step(lambda t, y: _rhs_fast(y, np.zeros(3), *args), 0.0, x, 1e-3)
            for lo, hi in ((0, 9), (12, 21)):
                block = x[lo:hi].reshape(3, 3)
                if rotation_defect(block) > 1e-9:
                    x[lo:hi] = project_rotation(block).ravel()
        assert abs(energy(model, x) - e0) / abs(e0) < 1e-5

    def test_no_slip_invariants_along_trajectory(self):
        model = SphereModel(make_params(15.0))
        args = model.rhs_args()
        x = np.concatenate([np.eye(3).ravel(), [0.5, -0.5, 0.18],
                            np.eye(3).ravel(), [0.3, -0.2, 0.1], [0.1, 0.2, -0.3]])
        worst = 0.0
        for _ in range(2000):
            x = rk4_step(lambda t, y: _rhs_fast(y, np.zeros(3), *args), 0.0, x, 1e-3)
            odot = model.p.radius * np.cross(x[21:24], [0.0, 0.0, 1.0])
            res = odot + model.p.radius * np.cross([0.0, 0.0, 1.0], x[21:24])
            worst = max(worst, float(np.max(np.abs(res))), abs(float(odot[2])),
                        abs(x[11] - model.p.radius))
        assert worst < 1e-8


class TestController:
    def _controller(self, ref_cfg=None, beta_deg=30.0, gains=None):
        ref = CurveReference.from_config(
            ref_cfg or {"kind": "constant", "offset": [0.0, 0.0]}, dim=2)
        return SphereController(
            make_params(beta_deg),
            gains or GainSet(kp=100.0, kd=60.0, ki=10.0),
            ref,
        )

    def test_converged_flat_state_needs_no_input(self):
        ctl = self._controller(beta_deg=0.0)
        x = np.concatenate([np.eye(3).ravel(), [0, 0, 0.18],
                            np.eye(3).ravel(), np.zeros(3), np.zeros(3)])
        tau, _ = ctl.torque(0.0, x)
        assert np.max(np.abs(tau)) < 1e-12

    def test_converged_state_cancels_only_gravity_shaping(self):
        ctl = self._controller(beta_deg=0.0)
        ri = exp_so3([0.4, -0.2, 0.3])
        x = np.concatenate([np.eye(3).ravel(), [0, 0, 0.18],
                            ri.ravel(), np.zeros(3), np.zeros(3)])
        tau, _ = ctl.torque(0.0, x)
        m = ctl.model
        i_couple_r = ri @ m.i_couple @ ri.T
        _, _, _, _, b, _ = m.spatial(np.eye(3), ri)
        shaping = (m.g / m.p.radius) * np.cross([0.0, 0.0, 1.0], i_couple_r @ [0.0, 0.0, 1.0])
        assert np.allclose(tau, -np.linalg.solve(b, shaping), atol=1e-12)

    def test_gradient_consistent_with_error_potential_rate(self):
        # <dV, omega_e> must equal the finite-difference rate of the error
        # potential under the rolling kinematics o_e' = -r e3 x omega_e
        p = make_params(0.0)
        r = p.radius
        for _ in range(50):
            o_e = np.array([RNG.normal(), RNG.normal(), 0.0])
            w_e = RNG.normal(size=3)
            dv = np.cross([0.0, 0.0, 1.0], o_e)
            value = float(o_e @ o_e) / (2.0 * r)
            eps = 1e-7
            o_p = o_e + eps * (-r * np.cross([0.0, 0.0, 1.0], w_e))
            v_p = float(o_p @ o_p) / (2.0 * r)
            fd = (v_p - value) / eps
            assert abs(fd - float(dv @ w_e)) < 1e-6

    def test_integrator_matches_mass_operator_solve(self):
        ctl = self._controller()
        x = rand_state(position=(1.0, -1.0))
        ctl.o_i = RNG.normal(size=3)
        rhs = ctl.integrator_rhs(0.0, x)
        doi = rhs(0.0, ctl.o_i)
        m = ctl.model
        r = x[0:9].reshape(3, 3)
        ri = x[12:21].reshape(3, 3)
        _, _, _, _, _, mass_op = m.spatial(r, ri)
        o_e, w_e, _, _ = ctl.errors(0.0, x)
        # reconstruct: mass_op @ doi + corrections = 3 * e3 x o_e
        i_b_r = r @ m.i_b @ r.T
        i_couple_r = ri @ m.i_couple @ ri.T
        wi = x[24:27]
        e3 = np.array([0.0, 0.0, 1.0])
        zi = ctl.o_i
        c_s = 0.5 * (-(m.i_trans @ np.cross(w_e, zi)) + np.cross(m.i_trans @ zi, w_e)
                     + np.cross(m.i_trans @ w_e, zi))
        c_a = 0.5 * (-(i_b_r @ np.cross(w_e, zi)) - np.cross(i_b_r @ zi, w_e)
                     - np.cross(i_b_r @ w_e, zi))
        e3zi = np.cross(e3, zi)
        c_v = 0.5 * (-(i_couple_r @ np.cross(wi, e3zi)) - np.cross(i_couple_r @ e3zi, wi)
                     - np.cross(i_couple_r @ wi, e3zi))
        lhs = mass_op @ doi + c_s + c_a + np.cross(e3, c_v)
        assert np.allclose(lhs, 3.0 * np.cross(e3, o_e), atol=1e-10)
