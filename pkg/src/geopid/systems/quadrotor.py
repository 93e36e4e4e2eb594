"""Attitude-tracking quadrotor: rigid-body rotation driven by four rotors
through a thrust/drag mixing matrix with speed saturation, plus the
geometric PID attitude tracker with anti-windup.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..geometry import InertiaMetric
from ..integrate import rk4_step
from ..lie import cross3, exp_so3, hat, vee
from ..pid import GainSet, estimate_mu_lambda, lyapunov_value
from .references import So3Reference

E3 = np.array([0.0, 0.0, 1.0])
GRAVITY = 9.81


@dataclass(frozen=True)
class QuadrotorParams:
    mass: float
    inertia: np.ndarray  # diagonal entries, kg m^2
    arm_length: float
    lift_coeff: float  # N / rpm^2
    drag_coeff: float  # N m / rpm^2
    motor_min: float  # rpm
    motor_max: float  # rpm
    motor_efficiency: np.ndarray

    def __post_init__(self):
        if self.motor_min >= self.motor_max:
            raise ValueError("motor_min must be below motor_max")
        for name in ("mass", "arm_length", "lift_coeff", "drag_coeff"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        object.__setattr__(self, "inertia", np.asarray(self.inertia, dtype=float))
        object.__setattr__(
            self, "motor_efficiency", np.asarray(self.motor_efficiency, dtype=float)
        )

    @classmethod
    def from_dict(cls, d: dict) -> "QuadrotorParams":
        return cls(
            mass=float(d["mass_kg"]),
            inertia=np.asarray(d["inertia_kgm2"], dtype=float),
            arm_length=float(d["arm_length_m"]),
            lift_coeff=float(d["lift_coeff_n_rpm2"]),
            drag_coeff=float(d["drag_coeff_nm_rpm2"]),
            motor_min=float(d["motor_min_rpm"]),
            motor_max=float(d["motor_max_rpm"]),
            motor_efficiency=np.asarray(d.get("motor_efficiency", [1.0] * 4), dtype=float),
        )

    def inertia_matrix(self) -> np.ndarray:
        return np.diag(self.inertia)

    def mixing_matrix(self) -> np.ndarray:
        """Stacked thrust/moment map: [f; tau] = A @ speeds^2."""
        cl, cd, l = self.lift_coeff, self.drag_coeff, self.arm_length
        return np.array(
            [
                [cl, cl, cl, cl],
                [0.0, l * cl, -l * cl, 0.0],
                [-l * cl, 0.0, l * cl, 0.0],
                [-cd, cd, -cd, cd],
            ]
        )


def dynamics(r: np.ndarray, omega: np.ndarray, tau: np.ndarray,
             delta_t: np.ndarray, params: QuadrotorParams):
    """Body-frame rigid rotation: dR = R hat(w), I dw = (I w) x w + I dT + tau."""
    inertia = params.inertia
    dr = r @ hat(omega)
    domega = (cross3(inertia * omega, omega) + tau) / inertia + delta_t
    return dr, domega


def allocation(f_u: float, tau: np.ndarray, params: QuadrotorParams):
    """Invert the mixing map and clip to the motor envelope.

    Returns (speeds_rpm, saturated).  Negative squared speeds are clamped
    to the lower envelope and flagged, as is any clip at either limit.
    """
    a = params.mixing_matrix()
    sq = np.linalg.solve(a, np.concatenate([[f_u], tau]))
    lo, hi = params.motor_min**2, params.motor_max**2
    saturated = bool(np.any(sq < lo) or np.any(sq > hi))
    sq = np.clip(sq, lo, hi)
    return np.sqrt(sq), saturated


def moments_from_speeds(speeds: np.ndarray, params: QuadrotorParams):
    """Forward thrust/moment map, including per-motor efficiency factors."""
    sq = params.motor_efficiency * np.asarray(speeds, dtype=float) ** 2
    out = params.mixing_matrix() @ sq
    return float(out[0]), out[1:]


class AttitudeController:
    """Geometric PID attitude tracker.

    morse_weighting selects the plain or inertia-conjugated error gradient;
    integrator "body" advances the covariant integrator along the measured
    body rate (the form the benchmark uses), "error" along the velocity
    error (the generic fully-actuated form).
    """

    def __init__(self, params: QuadrotorParams, gains: GainSet,
                 reference: So3Reference, morse_weighting: str = "inertia",
                 integrator: str = "body"):
        if integrator not in ("body", "error"):
            raise ValueError("integrator must be 'body' or 'error'")
        self.p = params
        self.gains = gains
        self.reference = reference
        self.weighting = morse_weighting
        self.integrator = integrator
        self.inertia = params.inertia_matrix()
        self.metric = InertiaMetric.constant(self.inertia, "left")
        self.omega_i = np.zeros(3)
        self.windup_frozen = False

    def error_terms(self, t: float, r: np.ndarray, omega: np.ndarray):
        r_ref = self.reference.value(t)
        zeta_r = self.reference.velocity(t)
        e = r_ref.T @ r
        eta_r = e.T @ zeta_r
        omega_e = omega - eta_r
        return e, eta_r, omega_e, zeta_r

    def grad(self, e: np.ndarray):
        value = float(np.trace(np.eye(3) - e))
        skew = e - e.T
        if self.weighting == "plain":
            return value, vee(skew, tol=np.inf)
        weighted = self.inertia @ skew @ self.inertia / np.linalg.det(self.inertia)
        return value, vee(weighted, tol=np.inf)

    def feedforward(self, t: float, e, eta_r, omega_e):
        """Reference covector: I deta_r + the three bilinear connection terms."""
        inertia = self.inertia
        d_eta_r = cross3(eta_r, omega_e) + e.T @ self.reference.acceleration(t)
        out = inertia @ d_eta_r
        for xi, eta in ((omega_e, eta_r), (eta_r, omega_e), (eta_r, eta_r)):
            out = out + 0.5 * (
                inertia @ cross3(xi, eta)
                - cross3(inertia @ eta, xi)
                - cross3(inertia @ xi, eta)
            )
        return out

    def torque(self, t: float, r: np.ndarray, omega: np.ndarray):
        e, eta_r, omega_e, _ = self.error_terms(t, r, omega)
        value, eta_e = self.grad(e)
        f_ref = self.feedforward(t, e, eta_r, omega_e)
        g = self.gains
        tau = -self.inertia @ (g.kp * eta_e + g.kd * omega_e + g.ki * self.omega_i) + f_ref
        return tau, {"V": value, "eta_e": eta_e, "omega_e": omega_e}

    def integrator_rhs(self, t: float, r: np.ndarray, omega: np.ndarray):
        """Covariant integrator derivative with the tick state frozen."""
        e, _, omega_e, _ = self.error_terms(t, r, omega)
        _, eta_e = self.grad(e)
        direction = omega if self.integrator == "body" else omega_e
        inertia = self.inertia

        inv_diag = self.p.inertia

        def rhs(_t, zi):
            corr = 0.5 * (
                inertia @ cross3(direction, zi)
                - (cross3(inertia @ zi, direction) + cross3(inertia @ direction, zi))
            )
            return eta_e - corr / inv_diag

        return rhs

    def advance(self, t: float, r: np.ndarray, omega: np.ndarray, h: float):
        if self.windup_frozen:
            return
        self.omega_i = rk4_step(self.integrator_rhs(t, r, omega), t, self.omega_i, h)


class QuadrotorRun:
    """One scenario execution context for the attitude benchmark."""

    name = "quadrotor"
    rotation_blocks = ((0, 9),)
    antiwindup = True

    def __init__(self, sc: dict):
        self.p_true = QuadrotorParams.from_dict(sc["params_true"])
        self.p_nom = QuadrotorParams.from_dict(sc["params_nominal"])
        g = sc["gains"]
        self.gains = GainSet(kp=g["kp"], kd=g["kd"], ki=g["kI"],
                             kc=g.get("kc", 0.0), kcd=g.get("kcd", 0.0),
                             kappa=g.get("kappa"))
        ctl = sc.get("controller", {})
        self.actuation = ctl.get("actuation", "motors")
        self.thrust_command = float(ctl.get("thrust_command_n", 1.3 * GRAVITY))
        self.reference = So3Reference.from_config(sc["reference"])
        self.controller = AttitudeController(
            self.p_nom, self.gains, self.reference,
            morse_weighting=ctl.get("morse_weighting", "inertia"),
            integrator=ctl.get("integrator", "body"),
        )
        dist = sc.get("disturbance", {"kind": "none"})
        if dist["kind"] == "none":
            self.delta_cov = np.zeros(3)
        elif "com_offset_m" in dist:
            # constant unmodeled moment from a center-of-mass offset
            xbar = np.asarray(dist["com_offset_m"], dtype=float)
            self.delta_cov = -GRAVITY * np.cross(xbar, E3)
        else:
            self.delta_cov = np.asarray(dist["covector"], dtype=float)
        self.delta_t = self.delta_cov / self.p_true.inertia
        self.initial = sc["initial"]
        self._mu_lam: Optional[tuple] = None

    # -- engine interface --

    @property
    def columns(self):
        return (
            ["r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32", "r33",
             "omega_1_rad_s", "omega_2_rad_s", "omega_3_rad_s",
             "V_error", "eta_e_1", "eta_e_2", "eta_e_3",
             "omega_e_1_rad_s", "omega_e_2_rad_s", "omega_e_3_rad_s",
             "integrator_1", "integrator_2", "integrator_3",
             "tau_1_nm", "tau_2_nm", "tau_3_nm",
             "motor_1_rpm", "motor_2_rpm", "motor_3_rpm", "motor_4_rpm",
             "saturated"]
        )

    def initial_state(self) -> np.ndarray:
        axis = np.asarray(self.initial["attitude_axis"], dtype=float)
        norm = np.linalg.norm(axis)
        axis = axis / norm if norm > 0 else axis
        r0 = exp_so3(axis * float(self.initial["attitude_angle_rad"]))
        return np.concatenate([r0.ravel(), np.asarray(self.initial["omega_rad_s"], float)])

    def plant_rhs(self, t, x, u):
        r = x[:9].reshape(3, 3)
        omega = x[9:12]
        dr, domega = dynamics(r, omega, u, self.delta_t, self.p_true)
        return np.concatenate([dr.ravel(), domega])

    def control_tick(self, t, x):
        r = x[:9].reshape(3, 3)
        omega = x[9:12]
        tau_cmd, info = self.controller.torque(t, r, omega)
        if self.actuation == "direct":
            speeds = np.zeros(4)
            saturated = False
            tau_applied = tau_cmd
        else:
            speeds, saturated = allocation(self.thrust_command, tau_cmd, self.p_nom)
            _, tau_applied = moments_from_speeds(speeds, self.p_true)
        self.controller.windup_frozen = saturated
        data = dict(info)
        data.update(
            tau=tau_applied, speeds=speeds, saturated=saturated,
            omega_i=self.controller.omega_i.copy(),
        )
        return tau_applied, saturated, data

    def advance_controller(self, t, x, h):
        self.controller.advance(t, x[:9].reshape(3, 3), x[9:12], h)

    def row(self, t, x, data):
        return np.concatenate([
            x[:12],
            [data["V"]], data["eta_e"], data["omega_e"], data["omega_i"],
            data["tau"], data["speeds"], [1.0 if data["saturated"] else 0.0],
        ])

    def error_metric(self, t, x) -> float:
        e, _, _, _ = self.controller.error_terms(t, x[:9].reshape(3, 3), x[9:12])
        return float(np.trace(np.eye(3) - e))

    def mu_lambda(self):
        if self._mu_lam is None:
            self._mu_lam = estimate_mu_lambda("so3_trace", metric=self.controller.inertia)
        return self._mu_lam

    def lyapunov_sample(self, t, x):
        r = x[:9].reshape(3, 3)
        omega = x[9:12]
        e, _, omega_e, _ = self.controller.error_terms(t, r, omega)
        value = float(np.trace(np.eye(3) - e))
        grad = np.linalg.solve(self.controller.inertia, vee(e - e.T, tol=np.inf))
        mu, _ = self.mu_lambda()
        return lyapunov_value(
            potential=value, eta_e=grad, v_s=omega_e, v_i=self.controller.omega_i,
            metric_s=self.controller.inertia, gains=self.gains, mu=mu,
        )

    def constraint_defects(self, t, x, x0):
        return {}

RUN_CLASS = QuadrotorRun
