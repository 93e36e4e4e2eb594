"""Hoop rolling without slip on an incline, driven by an internal
cart/pendulum appendage.  The controller regularizes the error dynamics
back into mechanical form (injecting the quadratic-velocity connection
term), shapes the appendage potential, and applies the output PID.  It
never sees the incline angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..integrate import rk4_step
from ..pid import GainSet, lyapunov_value
from .references import CurveReference

GRAVITY = 9.81


@dataclass(frozen=True)
class HoopParams:
    hoop_mass: float
    hoop_inertia: float
    radius: float
    cart_mass: float
    cart_inertia: float
    cart_offset: float  # distance from hoop center to appendage mass
    incline: float  # rad; ignored by the controller

    @classmethod
    def from_dict(cls, d: dict) -> "HoopParams":
        return cls(
            hoop_mass=float(d["hoop_mass_kg"]),
            hoop_inertia=float(d["hoop_inertia_kgm2"]),
            radius=float(d["radius_m"]),
            cart_mass=float(d["cart_mass_kg"]),
            cart_inertia=float(d["cart_inertia_kgm2"]),
            cart_offset=float(d["cart_offset_m"]),
            incline=math.radians(float(d.get("incline_deg", 0.0))),
        )

    @property
    def total_mass(self) -> float:
        return self.hoop_mass + self.cart_mass

    @property
    def appendage_inertia(self) -> float:
        """Appendage inertia about the hoop center."""
        return self.cart_inertia + self.cart_mass * self.cart_offset**2

    def max_incline(self) -> float:
        """Largest incline with an appendage equilibrium: asin(m_a l / (M r))."""
        ratio = self.cart_mass * self.cart_offset / (self.total_mass * self.radius)
        if ratio >= 1.0:
            return math.pi / 2.0
        return math.asin(ratio)

    def rolling_inertia(self, theta_a: float) -> float:
        ma, r, ell = self.cart_mass, self.radius, self.cart_offset
        return (
            self.hoop_inertia
            + self.total_mass * r**2
            - (ma * r * ell * math.cos(theta_a)) ** 2 / self.appendage_inertia
        )

    def input_coupling(self, theta_a: float) -> float:
        """Shared-input factor B(theta_a) on the appendage channel."""
        ma, r, ell = self.cart_mass, self.radius, self.cart_offset
        d = self.appendage_inertia
        lever = ma * r * ell * math.cos(theta_a)
        denom = d - lever
        if abs(denom) < 1e-12:
            raise ZeroDivisionError("appendage input coupling is singular")
        return lever / d - self.rolling_inertia(theta_a) / denom


def dynamics(state: np.ndarray, tau_u: float, p: HoopParams, g: float = GRAVITY) -> np.ndarray:
    """State derivative of (theta, o, omega, theta_a, omega_a)."""
    _, _, omega, theta_a, omega_a = state
    ma, r, ell = p.cart_mass, p.radius, p.cart_offset
    d = p.appendage_inertia
    it = p.rolling_inertia(theta_a)
    ca, sa = math.cos(theta_a), math.sin(theta_a)
    tau_g = (
        r * p.total_mass * g * math.sin(p.incline)
        - (ma**2 * r * ell**2 * g / d) * ca * math.sin(theta_a + p.incline)
    )
    tau_ga = (ma * r * ell * ca / d) * tau_g - it * (
        ma * g * ell * math.sin(theta_a + p.incline) / d
    )
    domega = (-ma * r * ell * sa * omega_a**2 + tau_g + tau_u) / it
    domega_a = (
        -(ma**2 * r**2 * ell**2 / d) * sa * ca * omega_a**2
        + tau_ga
        + p.input_coupling(theta_a) * tau_u
    ) / it
    return np.array([omega, -r * omega, domega, omega_a, domega_a])


def energy(state: np.ndarray, p: HoopParams, g: float = GRAVITY) -> float:
    """Mechanical energy of the unforced hoop + appendage on the incline."""
    _, o, omega, theta_a, omega_a = state
    r, ell = p.radius, p.cart_offset
    odot = -r * omega
    pa_dot = np.array([odot + ell * omega_a * math.cos(theta_a),
                       ell * omega_a * math.sin(theta_a)])
    ke = 0.5 * (
        p.hoop_mass * odot**2
        + p.hoop_inertia * omega**2
        + p.cart_mass * float(pa_dot @ pa_dot)
        + p.cart_inertia * omega_a**2
    )
    e_up = np.array([math.sin(p.incline), math.cos(p.incline)])
    p_hoop = np.array([o, r])
    p_app = p_hoop + np.array([ell * math.sin(theta_a), -ell * math.cos(theta_a)])
    pe = g * (p.hoop_mass * float(p_hoop @ e_up) + p.cart_mass * float(p_app @ e_up))
    return ke + pe


def regularizer(theta_a: float, omega_a: float, omega_e: float,
                p: HoopParams, g: float = GRAVITY) -> float:
    """Connection-injecting plus potential-shaping input component."""
    ma, r, ell = p.cart_mass, p.radius, p.cart_offset
    d = p.appendage_inertia
    s2 = math.sin(2.0 * theta_a)
    return (
        -(ma**2 * r**2 * ell**2 * s2 / (2.0 * d)) * omega_a * omega_e
        + ma**2 * r * ell**2 * g * s2 / (2.0 * d)
    )


class HoopController:
    """Output PID for the hoop center with feedback regularization."""

    def __init__(self, params: HoopParams, gains: GainSet, reference: CurveReference):
        self.p = params
        self.gains = gains
        self.reference = reference
        self.o_i = 0.0
        self.windup_frozen = False

    def errors(self, t: float, state: np.ndarray):
        _, o, omega, _, _ = state
        o_ref = float(self.reference.value(t)[0])
        w_ref = -float(self.reference.velocity(t)[0]) / self.p.radius
        return o - o_ref, omega - w_ref

    def torque(self, t: float, state: np.ndarray):
        theta_a, omega_a = state[3], state[4]
        o_e, omega_e = self.errors(t, state)
        eta_e = -o_e
        g = self.gains
        it = self.p.rolling_inertia(theta_a)
        tau = regularizer(theta_a, omega_a, omega_e, self.p)
        tau += -it * (
            g.kp * eta_e + g.kd * omega_e + g.ki * self.o_i
            + g.kc * omega_a / self.p.input_coupling(theta_a)
        )
        return tau, {"o_e": o_e, "omega_e": omega_e, "eta_e": eta_e}

    def advance(self, t: float, state: np.ndarray, h: float):
        if self.windup_frozen:
            return
        theta_a, omega_a = state[3], state[4]
        o_e, _ = self.errors(t, state)
        d = self.p.appendage_inertia
        ma, r, ell = self.p.cart_mass, self.p.radius, self.p.cart_offset
        gamma = (ma**2 * r**2 * ell**2 * math.sin(2.0 * theta_a)) / (
            2.0 * d * self.p.rolling_inertia(theta_a)
        )

        def rhs(_t, oi):
            return np.array([-o_e - gamma * omega_a * oi[0]])

        self.o_i = float(rk4_step(rhs, t, np.array([self.o_i]), h)[0])


class HoopRun:
    """Scenario execution context for the rolling hoop."""

    name = "hoop"
    rotation_blocks = ()
    antiwindup = False

    columns = [
        "theta_rad", "position_m", "omega_rad_s", "theta_a_rad", "omega_a_rad_s",
        "position_error_m", "omega_e_rad_s", "integrator", "tau_u_nm",
        "rolling_defect_m",
    ]

    def __init__(self, sc: dict):
        self.p_true = HoopParams.from_dict(sc["params_true"])
        self.p_nom = HoopParams.from_dict(sc["params_nominal"])
        g = sc["gains"]
        self.gains = GainSet(kp=g["kp"], kd=g["kd"], ki=g["kI"],
                             kc=g.get("kc", 0.0), kappa=g.get("kappa"))
        self.reference = CurveReference.from_config(sc["reference"], dim=1)
        self.controller = HoopController(self.p_nom, self.gains, self.reference)
        dist = sc.get("disturbance", {"kind": "none"})
        self.dist = 0.0 if dist["kind"] == "none" else float(dist["covector"][0])
        self.initial = sc["initial"]
        self._x0 = None
        self._mu_lam = None

    def initial_state(self):
        x0 = np.array([
            float(self.initial["theta_rad"]),
            float(self.initial["position_m"]),
            float(self.initial["omega_rad_s"]),
            float(self.initial["theta_a_rad"]),
            float(self.initial["omega_a_rad_s"]),
        ])
        self._x0 = x0.copy()
        return x0

    def plant_rhs(self, t, x, u):
        return dynamics(x, u[0] + self.dist, self.p_true)

    def control_tick(self, t, x):
        tau, info = self.controller.torque(t, x)
        info["o_i"] = self.controller.o_i
        info["tau"] = tau
        return np.array([tau]), False, info

    def advance_controller(self, t, x, h):
        self.controller.advance(t, x, h)

    def row(self, t, x, data):
        defect = (x[1] - self._x0[1]) + self.p_true.radius * (x[0] - self._x0[0])
        return np.array([
            x[0], x[1], x[2], x[3], x[4],
            data["o_e"], data["omega_e"], data["o_i"], data["tau"], defect,
        ])

    def error_metric(self, t, x):
        o_e, _ = self.controller.errors(t, x)
        return abs(o_e)

    def mu_lambda(self):
        if self._mu_lam is None:
            thetas = np.linspace(0.0, 2.0 * math.pi, 721)
            imin = min(self.p_nom.rolling_inertia(t) for t in thetas)
            mu = self.p_nom.radius / imin
            self._mu_lam = (mu, mu)
        return self._mu_lam

    def lyapunov_sample(self, t, x):
        o_e, omega_e = self.controller.errors(t, x)
        it = self.p_nom.rolling_inertia(x[3])
        mu, _ = self.mu_lambda()
        return lyapunov_value(
            potential=o_e**2 / (2.0 * self.p_nom.radius),
            eta_e=np.array([-o_e / it]),
            v_s=np.array([omega_e]),
            v_i=np.array([self.controller.o_i]),
            metric_s=np.array([[it]]),
            gains=self.gains, mu=mu,
            v_a=np.array([x[4]]),
            metric_a=np.array([[self.p_nom.appendage_inertia]]),
        )

    def constraint_defects(self, t, x, x0):
        return {
            "rolling": abs((x[1] - x0[1]) + self.p_true.radius * (x[0] - x0[0]))
        }

RUN_CLASS = HoopRun
