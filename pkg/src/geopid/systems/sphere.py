"""Sphere rolling without slip on an incline of unknown inclination,
driven by an internal cart.  The shell and cart are modeled as coupled
rigid bodies; eliminating the interaction moments leaves a sphere equation
with an effective mass operator and a cart equation forced by the shell's
angular acceleration.

The tracking controller stacks three metric channels (shell rotation,
translation-induced singular metric, cart-coupling metric), applies the
covariant integrator through the combined operator, and shapes gravity
with the surface normal only, leaving the true slope to the integral
action.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is available in CI images
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not (args and callable(args[0])) else args[0]

from ..integrate import rk4_step
from ..lie import exp_so3, hat
from ..pid import GainSet, lyapunov_value
from .references import CurveReference

E3 = np.array([0.0, 0.0, 1.0])
E3_HAT = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
GRAVITY = 9.81


def _cross(a, b):
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


@dataclass(frozen=True)
class SphereParams:
    shell_mass: float
    shell_inertia: np.ndarray  # 3 diagonal entries
    radius: float
    cart_mass: float
    cart_inertia: np.ndarray
    cart_offset: float
    incline: float  # rad

    @classmethod
    def from_dict(cls, d: dict) -> "SphereParams":
        return cls(
            shell_mass=float(d["shell_mass_kg"]),
            shell_inertia=np.asarray(d["shell_inertia_kgm2"], dtype=float),
            radius=float(d["radius_m"]),
            cart_mass=float(d["cart_mass_kg"]),
            cart_inertia=np.asarray(d["cart_inertia_kgm2"], dtype=float),
            cart_offset=float(d["cart_offset_m"]),
            incline=math.radians(float(d["incline_deg"])),
        )

    def max_incline(self) -> float:
        ratio = self.cart_mass * self.cart_offset / (
            (self.shell_mass + self.cart_mass) * self.radius
        )
        return math.pi / 2.0 if ratio >= 1.0 else math.asin(ratio)


class SphereModel:
    """Precomputed tensors for one parameter set (true plant or nominal)."""

    def __init__(self, p: SphereParams, g: float = GRAVITY):
        self.p = p
        self.g = g
        m_total = p.shell_mass + p.cart_mass
        self.i_b = np.diag(p.shell_inertia)
        self.i_trans = m_total * p.radius**2 * np.diag([1.0, 1.0, 0.0])
        self.i_cart = np.diag(p.cart_inertia) + p.cart_mass * p.cart_offset**2 * np.diag(
            [1.0, 1.0, 0.0]
        )
        self.i_cart_inv = np.linalg.inv(self.i_cart)
        self.i_couple = (
            -(p.radius**2) * p.cart_mass**2 * p.cart_offset**2
            * (E3_HAT @ self.i_cart_inv @ E3_HAT)
        )
        self.m_total = m_total
        self.lever = p.cart_mass * p.radius * p.cart_offset
        self.e_up = np.array([0.0, math.sin(p.incline), math.cos(p.incline)])

    def rhs_args(self) -> tuple:
        """Constant argument pack for the compiled right-hand side."""
        p = self.p
        return (
            self.i_b, self.i_trans, self.i_cart, self.i_cart_inv, self.i_couple,
            self.lever, p.cart_mass * self.g * p.cart_offset, p.radius,
            p.radius * self.m_total * self.g, self.g / p.radius, self.e_up,
        )

    # -- state-dependent tensors --

    def spatial(self, r: np.ndarray, ri: np.ndarray):
        i_b_r = r @ self.i_b @ r.T
        i_cart_r = ri @ self.i_cart @ ri.T
        i_couple_r = ri @ self.i_couple @ ri.T
        coupling = self.lever * (E3_HAT @ ri @ E3_HAT @ self.i_cart_inv @ ri.T)
        b = coupling + np.eye(3)
        mass_op = i_b_r + self.i_trans + E3_HAT @ i_couple_r @ E3_HAT
        return i_b_r, i_cart_r, i_couple_r, coupling, b, mass_op

    def velocity_moment(self, ri, wi, coupling, i_cart_r):
        """Cart-velocity quadratic forcing on the shell channel."""
        first = coupling @ _cross(wi, i_cart_r @ wi)
        second = self.lever * _cross(E3, _cross(wi, _cross(wi, ri @ E3)))
        return first + second

    def gravity_moment(self, i_couple_r, e_dir):
        p = self.p
        return (
            -p.radius * self.m_total * self.g * _cross(E3, e_dir)
            + (self.g / p.radius) * _cross(E3, i_couple_r @ e_dir)
        )


def dynamics(model: SphereModel, x: np.ndarray, tau_u: np.ndarray) -> np.ndarray:
    """State derivative of (R, o, R_i, w, w_i) under the shared input."""
    r = x[0:9].reshape(3, 3)
    ri = x[12:21].reshape(3, 3)
    w = x[21:24]
    wi = x[24:27]
    i_b_r, i_cart_r, i_couple_r, coupling, b, mass_op = model.spatial(r, ri)
    tau_v = model.velocity_moment(ri, wi, coupling, i_cart_r)
    tau_g = model.gravity_moment(i_couple_r, model.e_up)
    rhs_shell = _cross(i_b_r @ w, w) + b @ tau_u + tau_v + tau_g
    wdot = np.linalg.solve(mass_op, rhs_shell)
    ri_e3 = ri @ E3
    rhs_cart = (
        _cross(i_cart_r @ wi, wi)
        - model.lever * _cross(ri_e3, _cross(E3, wdot))
        + model.p.cart_mass * model.g * model.p.cart_offset * _cross(ri_e3, model.e_up)
        - tau_u
    )
    widot = np.linalg.solve(i_cart_r, rhs_cart)
    dr = hat(w) @ r
    do = model.p.radius * _cross(w, E3)
    dri = hat(wi) @ ri
    return np.concatenate([dr.ravel(), do, dri.ravel(), wdot, widot])


@njit(cache=True)
def _rhs_fast(x, tau_u, i_b, i_trans, i_cart, i_cart_inv, i_couple,
              lever, mgl, radius, m_total_rg, g_over_r, e_up):
    """Compiled twin of `dynamics`; kept in exact algebraic lockstep with it."""
    r = np.ascontiguousarray(x[0:9]).reshape(3, 3)
    ri = np.ascontiguousarray(x[12:21]).reshape(3, 3)
    w = x[21:24]
    wi = x[24:27]
    e3 = np.zeros(3)
    e3[2] = 1.0
    e3_hat = np.zeros((3, 3))
    e3_hat[0, 1] = -1.0
    e3_hat[1, 0] = 1.0

    i_b_r = r @ i_b @ r.T
    i_cart_r = ri @ i_cart @ ri.T
    i_couple_r = ri @ i_couple @ ri.T
    coupling = lever * (e3_hat @ ri @ e3_hat @ i_cart_inv @ ri.T)
    b = coupling + np.eye(3)
    mass_op = i_b_r + i_trans + e3_hat @ i_couple_r @ e3_hat

    def cross(a, c):
        out = np.empty(3)
        out[0] = a[1] * c[2] - a[2] * c[1]
        out[1] = a[2] * c[0] - a[0] * c[2]
        out[2] = a[0] * c[1] - a[1] * c[0]
        return out

    ri_e3 = ri @ e3
    tau_v = coupling @ cross(wi, i_cart_r @ wi) + lever * cross(
        e3, cross(wi, cross(wi, ri_e3))
    )
    tau_g = -m_total_rg * cross(e3, e_up) + g_over_r * cross(e3, i_couple_r @ e_up)
    rhs_shell = cross(i_b_r @ w, w) + b @ tau_u + tau_v + tau_g
    wdot = np.linalg.solve(mass_op, rhs_shell)
    rhs_cart = (
        cross(i_cart_r @ wi, wi)
        - lever * cross(ri_e3, cross(e3, wdot))
        + mgl * cross(ri_e3, e_up)
        - tau_u
    )
    widot = np.linalg.solve(i_cart_r, rhs_cart)

    out = np.empty(27)
    # dR = hat(w) R, dRi = hat(wi) Ri
    for i in range(3):
        out[0 + i] = -w[2] * r[1, i] + w[1] * r[2, i]
        out[3 + i] = w[2] * r[0, i] - w[0] * r[2, i]
        out[6 + i] = -w[1] * r[0, i] + w[0] * r[1, i]
        out[12 + i] = -wi[2] * ri[1, i] + wi[1] * ri[2, i]
        out[15 + i] = wi[2] * ri[0, i] - wi[0] * ri[2, i]
        out[18 + i] = -wi[1] * ri[0, i] + wi[0] * ri[1, i]
    do = radius * cross(w, e3)
    for i in range(3):
        out[9 + i] = do[i]
        out[21 + i] = wdot[i]
        out[24 + i] = widot[i]
    return out


def energy(model: SphereModel, x: np.ndarray) -> float:
    """Mechanical energy of shell plus cart (conservative-case oracle)."""
    p = model.p
    r = x[0:9].reshape(3, 3)
    o = x[9:12]
    ri = x[12:21].reshape(3, 3)
    w = x[21:24]
    wi = x[24:27]
    odot = p.radius * _cross(w, E3)
    oi = o - p.cart_offset * (ri @ E3)
    oidot = odot - p.cart_offset * _cross(wi, ri @ E3)
    body_w = r.T @ w
    body_wi = ri.T @ wi
    ke = 0.5 * (
        p.shell_mass * float(odot @ odot)
        + float(body_w @ (p.shell_inertia * body_w))
        + p.cart_mass * float(oidot @ oidot)
        + float(body_wi @ (p.cart_inertia * body_wi))
    )
    pe = model.g * (p.shell_mass * float(o @ model.e_up)
                    + p.cart_mass * float(oi @ model.e_up))
    return ke + pe


def _corr_right_invariant(i_mat, xi, eta):
    """Spatial quadratic correction, right-invariant metric."""
    return 0.5 * (
        -(i_mat @ _cross(xi, eta)) + _cross(i_mat @ eta, xi) + _cross(i_mat @ xi, eta)
    )


def _corr_left_invariant(i_mat, xi, eta):
    """Spatial quadratic correction, left-invariant metric (frozen tensor)."""
    return 0.5 * (
        -(i_mat @ _cross(xi, eta)) - _cross(i_mat @ eta, xi) - _cross(i_mat @ xi, eta)
    )


class SphereController:
    """Center-tracking PID over the stacked metric channels."""

    def __init__(self, params: SphereParams, gains: GainSet,
                 reference: CurveReference, g: float = GRAVITY):
        self.model = SphereModel(params, g)
        self.gains = gains
        self.reference = reference
        self.o_i = np.zeros(3)
        self.windup_frozen = False

    def errors(self, t: float, x: np.ndarray):
        p = self.model.p
        oref = self.reference.value(t)
        vref = self.reference.velocity(t)
        aref = self.reference.acceleration(t)
        o_e = np.array([x[9] - oref[0], x[10] - oref[1], 0.0])
        w_ref = _cross(E3, np.array([vref[0], vref[1], 0.0])) / p.radius
        wdot_ref = _cross(E3, np.array([aref[0], aref[1], 0.0])) / p.radius
        w_e = x[21:24] - w_ref
        return o_e, w_e, w_ref, wdot_ref

    def torque(self, t: float, x: np.ndarray):
        m = self.model
        p = m.p
        g = self.gains
        r = x[0:9].reshape(3, 3)
        ri = x[12:21].reshape(3, 3)
        wi = x[24:27]
        o_e, w_e, w_ref, wdot_ref = self.errors(t, x)
        i_b_r, i_cart_r, i_couple_r, coupling, b, mass_op = m.spatial(r, ri)

        dv = _cross(E3, o_e)  # shell-channel differential of the error potential
        e3_we = _cross(E3, w_e)

        tau_alpha = m.velocity_moment(ri, wi, coupling, i_cart_r)
        tau_couple = -0.5 * _cross(
            E3,
            i_couple_r @ _cross(wi, e3_we)
            + _cross(i_couple_r @ wi, e3_we)
            + _cross(i_couple_r @ e3_we, wi),
        )
        tau_ref = (
            mass_op @ wdot_ref
            - _cross(i_b_r @ w_ref, w_e)
            - _cross(i_b_r @ w_e, w_ref)
            - _cross(i_b_r @ w_ref, w_ref)
        )
        shaping = (m.g / p.radius) * _cross(E3, i_couple_r @ E3)

        bracket = tau_alpha + tau_couple + _cross(m.i_trans @ w_e, w_e) - tau_ref + shaping
        bracket = bracket + 2.0 * g.kp * dv + (i_b_r + m.i_trans) @ (
            g.kd * w_e + g.ki * self.o_i
        )
        bracket = bracket + _cross(
            E3,
            g.kp * o_e
            + i_couple_r @ (g.kd * e3_we + g.ki * _cross(E3, self.o_i)),
        )
        tau_u = -np.linalg.solve(b, bracket) + g.kcd * (i_cart_r @ wi)
        return tau_u, {"o_e": o_e, "w_e": w_e}

    def integrator_rhs(self, t: float, x: np.ndarray):
        m = self.model
        r = x[0:9].reshape(3, 3)
        ri = x[12:21].reshape(3, 3)
        wi = x[24:27]
        o_e, w_e, _, _ = self.errors(t, x)
        i_b_r, _, i_couple_r, _, _, mass_op = m.spatial(r, ri)
        grad_stack = 3.0 * _cross(E3, o_e)

        def rhs(_t, oi):
            corr = _corr_right_invariant(m.i_trans, w_e, oi)
            corr = corr + _corr_left_invariant(i_b_r, w_e, oi)
            corr = corr + _cross(
                E3, _corr_left_invariant(i_couple_r, wi, _cross(E3, oi))
            )
            return np.linalg.solve(mass_op, grad_stack - corr)

        return rhs

    def advance(self, t: float, x: np.ndarray, h: float):
        if self.windup_frozen:
            return
        self.o_i = rk4_step(self.integrator_rhs(t, x), t, self.o_i, h)


class SphereRun:
    """Scenario execution context for the rolling sphere."""

    name = "sphere"
    rotation_blocks = ((0, 9), (12, 21))
    antiwindup = False

    columns = (
        ["r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32", "r33",
         "o_x_m", "o_y_m", "o_z_m",
         "ri11", "ri12", "ri13", "ri21", "ri22", "ri23", "ri31", "ri32", "ri33",
         "omega_1_rad_s", "omega_2_rad_s", "omega_3_rad_s",
         "omega_i_1_rad_s", "omega_i_2_rad_s", "omega_i_3_rad_s",
         "error_x_m", "error_y_m", "error_norm_m",
         "omega_e_1_rad_s", "omega_e_2_rad_s", "omega_e_3_rad_s",
         "integrator_1", "integrator_2", "integrator_3",
         "tau_1_nm", "tau_2_nm", "tau_3_nm",
         "noslip_defect", "height_defect_m"]
    )

    def __init__(self, sc: dict):
        self.p_true = SphereParams.from_dict(sc["params_true"])
        self.p_nom = SphereParams.from_dict(sc["params_nominal"])
        g = sc["gains"]
        self.gains = GainSet(kp=g["kp"], kd=g["kd"], ki=g["kI"],
                             kcd=g.get("kcd", 0.0), kappa=g.get("kappa"))
        self.reference = CurveReference.from_config(sc["reference"], dim=2)
        self.controller = SphereController(self.p_nom, self.gains, self.reference)
        self.model_true = SphereModel(self.p_true)
        dist = sc.get("disturbance", {"kind": "none"})
        if dist["kind"] == "none":
            self.dist = np.zeros(3)
        else:
            self.dist = np.asarray(dist["covector"], dtype=float)
        self.initial = sc["initial"]
        self._rhs_args = self.model_true.rhs_args()

    def initial_state(self):
        ini = self.initial
        axis = np.asarray(ini.get("attitude_axis", [0.0, 0.0, 1.0]), dtype=float)
        angle = float(ini.get("attitude_angle_rad", 0.0))
        r0 = exp_so3(axis / max(np.linalg.norm(axis), 1e-12) * angle)
        cart_axis = np.asarray(ini.get("cart_attitude_axis", [0.0, 0.0, 1.0]), dtype=float)
        cart_angle = float(ini.get("cart_attitude_angle_rad", 0.0))
        ri0 = exp_so3(cart_axis / max(np.linalg.norm(cart_axis), 1e-12) * cart_angle)
        o0 = np.asarray(ini["position_m"], dtype=float)
        if o0.shape == (2,):
            o0 = np.array([o0[0], o0[1], self.p_true.radius])
        return np.concatenate([
            r0.ravel(), o0, ri0.ravel(),
            np.asarray(ini["omega_rad_s"], dtype=float),
            np.asarray(ini["cart_omega_rad_s"], dtype=float),
        ])

    def plant_rhs(self, t, x, u):
        return _rhs_fast(x, u + self.dist, *self._rhs_args)

    def control_tick(self, t, x):
        tau, info = self.controller.torque(t, x)
        info["o_i"] = self.controller.o_i.copy()
        info["tau"] = tau
        return tau, False, info

    def advance_controller(self, t, x, h):
        self.controller.advance(t, x, h)

    def row(self, t, x, data):
        o_e, w_e = data["o_e"], data["w_e"]
        odot = self.p_true.radius * _cross(x[21:24], E3)
        noslip = float(np.linalg.norm(
            odot + self.p_true.radius * _cross(E3, x[21:24])
        )) + abs(float(odot @ E3))
        height = abs(x[11] - self.p_true.radius)
        return np.concatenate([
            x[0:27],
            [o_e[0], o_e[1], float(np.hypot(o_e[0], o_e[1]))],
            w_e, data["o_i"], data["tau"], [noslip, height],
        ])

    def error_metric(self, t, x):
        o_e, _, _, _ = self.controller.errors(t, x)
        return float(np.hypot(o_e[0], o_e[1]))

    def mu_lambda(self):
        # Quadratic output potential against the combined mass operator;
        # evaluated with both bodies at identity attitude.
        m = self.controller.model
        _, _, _, _, _, mass_op = m.spatial(np.eye(3), np.eye(3))
        planar = mass_op[:2, :2]
        mu = self.p_nom.radius * float(1.0 / np.linalg.eigvalsh(planar)[0])
        return mu, mu

    def lyapunov_sample(self, t, x):
        m = self.controller.model
        r = x[0:9].reshape(3, 3)
        ri = x[12:21].reshape(3, 3)
        o_e, w_e, _, _ = self.controller.errors(t, x)
        _, i_cart_r, _, _, _, mass_op = m.spatial(r, ri)
        dv = _cross(E3, o_e)
        eta = np.linalg.solve(mass_op, dv)
        mu, _ = self.mu_lambda()
        cart_pe = m.p.cart_mass * m.g * m.p.cart_offset * (
            1.0 + float((ri @ E3) @ m.e_up)
        )
        return lyapunov_value(
            potential=float(o_e @ o_e) / (2.0 * m.p.radius),
            eta_e=eta, v_s=w_e, v_i=self.controller.o_i, metric_s=mass_op,
            gains=self.gains, mu=mu,
            v_a=x[24:27], metric_a=i_cart_r, actuator_potential=cart_pe,
        )

    def constraint_defects(self, t, x, x0):
        return {"height": abs(x[11] - self.p_true.radius)}

RUN_CLASS = SphereRun
