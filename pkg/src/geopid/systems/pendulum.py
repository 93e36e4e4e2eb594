"""Spherical pendulum on the rotation group with a no-spin constraint.

The spin about the pendulum axis is removed by a workless constraint
moment, so the third body-rate component stays identically zero and the
two-axis PID acts through the motion projector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..integrate import rk4_step
from ..lie import cross3, exp_so3, hat
from ..pid import GainSet, estimate_mu_lambda, lyapunov_value

E3 = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class PendulumParams:
    mass: float
    rod_length: float
    gravity: float
    inertia: np.ndarray  # diagonal entries

    @classmethod
    def from_dict(cls, d: dict) -> "PendulumParams":
        return cls(
            mass=float(d["mass_kg"]),
            rod_length=float(d["rod_length_m"]),
            gravity=float(d["gravity_m_s2"]),
            inertia=np.asarray(d["inertia_kgm2"], dtype=float),
        )


def dynamics(r: np.ndarray, omega: np.ndarray, tau: np.ndarray, p: PendulumParams):
    """Constrained body-rate dynamics; the spin acceleration is exactly zero."""
    inertia = p.inertia
    gyro = cross3(inertia * omega, omega)
    gravity = -p.mass * p.gravity * p.rod_length * cross3(E3, r.T @ E3)
    moment = gyro + gravity + tau
    moment[2] = 0.0  # motion projector: the spin channel carries no force
    domega = moment / inertia
    domega[2] = 0.0
    return r @ hat(omega), domega


def constraint_moment(omega: np.ndarray, inertia: np.ndarray) -> np.ndarray:
    """Workless spin-holding moment, -e3 e3^T (I w x w)."""
    gyro = cross3(inertia * omega, omega)
    return np.array([0.0, 0.0, -gyro[2]])


def energy(r: np.ndarray, omega: np.ndarray, p: PendulumParams) -> float:
    ke = 0.5 * float(omega @ (p.inertia * omega))
    pe = p.mass * p.gravity * p.rod_length * float(E3 @ r @ E3)
    return ke + pe


def tilt_potential(r: np.ndarray) -> float:
    """Polar error function 1 - e3 . R e3, zero at the upright pose."""
    return 1.0 - float(E3 @ r @ E3)


def tilt_gradient(r: np.ndarray) -> np.ndarray:
    """Covector of the tilt potential in the body algebra (spin entry zero)."""
    return cross3(r.T @ E3, E3)


class UprightController:
    """Two-axis PID holding the pendulum upright through the projector."""

    def __init__(self, params: PendulumParams, gains: GainSet):
        self.p = params
        self.gains = gains
        self.omega_i = np.zeros(3)
        self.windup_frozen = False

    def torque(self, r: np.ndarray, omega: np.ndarray):
        dv = tilt_gradient(r)
        g = self.gains
        inertia = self.p.inertia
        tau = np.zeros(3)
        for k in (0, 1):
            tau[k] = -(g.kp * dv[k] + g.kd * inertia[k] * omega[k]
                       + g.ki * inertia[k] * self.omega_i[k])
        return tau, dv

    def advance(self, r: np.ndarray, h: float):
        if self.windup_frozen:
            return
        dv = tilt_gradient(r)
        inertia = self.p.inertia

        def rhs(_t, oi):
            out = np.zeros(3)
            out[0] = dv[0] / inertia[0]
            out[1] = dv[1] / inertia[1]
            return out

        self.omega_i = rk4_step(rhs, 0.0, self.omega_i, h)


class PendulumRun:
    """Scenario execution context for the spherical pendulum."""

    name = "pendulum"
    rotation_blocks = ((0, 9),)
    antiwindup = False

    columns = [
        "r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32", "r33",
        "omega_1_rad_s", "omega_2_rad_s", "omega_3_rad_s",
        "V_error", "grad_1", "grad_2", "integrator_1", "integrator_2",
        "tau_1_nm", "tau_2_nm", "spin_abs",
    ]

    def __init__(self, sc: dict):
        self.p_true = PendulumParams.from_dict(sc["params_true"])
        self.p_nom = PendulumParams.from_dict(sc["params_nominal"])
        g = sc["gains"]
        self.gains = GainSet(kp=g["kp"], kd=g["kd"], ki=g["kI"], kappa=g.get("kappa"))
        self.controller = UprightController(self.p_nom, self.gains)
        dist = sc.get("disturbance", {"kind": "none"})
        if dist["kind"] == "none":
            self.dist = np.zeros(3)
        else:
            self.dist = np.asarray(dist["covector"], dtype=float)
            self.dist[2] = 0.0
        self.initial = sc["initial"]
        self._mu_lam = None

    def initial_state(self):
        axis = np.asarray(self.initial["tilt_axis"], dtype=float)
        norm = np.linalg.norm(axis)
        axis = axis / norm if norm > 0 else axis
        r0 = exp_so3(axis * math.radians(float(self.initial["tilt_angle_deg"])))
        omega0 = np.asarray(self.initial["omega_rad_s"], dtype=float)
        return np.concatenate([r0.ravel(), omega0])

    def plant_rhs(self, t, x, u):
        r = x[:9].reshape(3, 3)
        dr, domega = dynamics(r, x[9:12], u + self.dist, self.p_true)
        return np.concatenate([dr.ravel(), domega])

    def control_tick(self, t, x):
        r = x[:9].reshape(3, 3)
        tau, dv = self.controller.torque(r, x[9:12])
        data = {
            "V": tilt_potential(r),
            "dv": dv,
            "omega_i": self.controller.omega_i.copy(),
            "tau": tau,
        }
        return tau, False, data

    def advance_controller(self, t, x, h):
        self.controller.advance(x[:9].reshape(3, 3), h)

    def row(self, t, x, data):
        return np.concatenate([
            x[:12],
            [data["V"], data["dv"][0], data["dv"][1],
             data["omega_i"][0], data["omega_i"][1],
             data["tau"][0], data["tau"][1], abs(x[11])],
        ])

    def error_metric(self, t, x):
        return tilt_potential(x[:9].reshape(3, 3))

    def mu_lambda(self):
        if self._mu_lam is None:
            self._mu_lam = estimate_mu_lambda(
                "s2_polar", metric=np.diag(self.p_nom.inertia)
            )
        return self._mu_lam

    def lyapunov_sample(self, t, x):
        r = x[:9].reshape(3, 3)
        dv = tilt_gradient(r)
        mu, _ = self.mu_lambda()
        return lyapunov_value(
            potential=tilt_potential(r),
            eta_e=dv / self.p_nom.inertia,
            v_s=x[9:12],
            v_i=self.controller.omega_i,
            metric_s=np.diag(self.p_nom.inertia),
            gains=self.gains, mu=mu,
        )

    def constraint_defects(self, t, x, x0):
        return {"spin": abs(x[11])}

RUN_CLASS = PendulumRun
