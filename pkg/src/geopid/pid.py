"""Geometric PID control: error systems, Morse-function gradients, gain
conditions, the three controller families, and the Lyapunov certificate
used as a runtime monitor.

The controller families:

* fully actuated configuration tracking (`pid_full_step`),
* underactuated interconnected output tracking (`pid_underactuated_step`),
* constrained output tracking through covector projections
  (`pid_constrained_step`).

All control outputs are covectors (generalized forces); integrator states
are algebra vectors advanced by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import InertiaMetric, ConstraintDistribution, quadratic_correction
from .lie import (
    Ad,
    AlgebraElement,
    ChiralityMismatch,
    CircleAngle,
    Rotation,
    TWO_PI,
    exp_so3,
    hat,
    vee,
)


# ---------------------------------------------------------------------------
# Gains
# ---------------------------------------------------------------------------

@dataclass
class GainSet:
    """PID gains plus the analysis constants used by the gain conditions.

    kc damps the actuator subsystem in the underactuated family, kcd is the
    cart-damping variant used by specific plants.  kappa is the free
    Lyapunov-shaping constant, constrained to 0 < kappa < 2/mu whenever mu
    is known (equivalently delta = |kappa*mu - 1| < 1).
    """

    kp: float
    kd: float
    ki: float
    kc: float = 0.0
    kcd: float = 0.0
    kappa: Optional[float] = None
    mu: Optional[float] = None
    lam: Optional[float] = None
    verified: bool = False

    def __post_init__(self):
        for name in ("kp", "kd", "ki"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("kc", "kcd"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.kappa is not None and self.mu is not None:
            if not 0.0 < self.kappa < 2.0 / self.mu:
                raise ValueError("kappa must lie in (0, 2/mu)")

    def delta(self) -> float:
        if self.kappa is None or self.mu is None:
            raise ValueError("kappa and mu are required")
        return abs(self.kappa * self.mu - 1.0)


@dataclass(frozen=True)
class GainBounds:
    ki_max: float
    kp_min: float
    k1: float
    k2: float
    kp_curvature: float  # the 2*kappa*kd^2 floor
    delta: float


def gain_bounds(mu: float, lam: float, kappa: float, kd: float, ki: float) -> GainBounds:
    """Stability-condition bounds: the admissible ki ceiling and kp floor.

    ki_max = kd^3 (1 - delta^2) / mu with delta = |kappa*mu - 1|; the kp
    floor is the max of the two radicand expressions and 2*kappa*kd^2,
    evaluated at the candidate ki.
    """
    if mu <= 0.0 or lam <= 0.0 or kd <= 0.0 or ki <= 0.0:
        raise ValueError("mu, lam, kd and ki must be positive")
    if not 0.0 < kappa < 2.0 / mu:
        raise ValueError(f"kappa={kappa!r} outside the admissible interval (0, {2.0 / mu:g})")
    delta = abs(kappa * mu - 1.0)
    ki_max = kd**3 * (1.0 - delta**2) / mu
    k1 = (ki / (2.0 * kd)) * (math.sqrt(1.0 + 16.0 * lam * kappa**2 * kd**2 / ki) - 1.0)
    k2 = (lam * ki**2 / (2.0 * kd**4)) * (
        1.0
        + math.sqrt(
            1.0
            + 4.0 * kd**3 * (ki**2 + 4.0 * kappa * kd**3 * (1.0 + kappa * kd**3))
            / (lam * ki**3)
        )
    )
    kp_curvature = 2.0 * kappa * kd**2
    return GainBounds(
        ki_max=ki_max,
        kp_min=max(k1, k2, kp_curvature),
        k1=k1,
        k2=k2,
        kp_curvature=kp_curvature,
        delta=delta,
    )


# ---------------------------------------------------------------------------
# Error system construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorState:
    """Configuration error, trivialized velocity error, and the transported
    reference velocity, all in a single chirality."""

    config_error: object  # Rotation | CircleAngle | np.ndarray
    zeta_e: AlgebraElement
    eta_r: AlgebraElement
    chirality: str


@dataclass
class ControllerState:
    """Covariant integrator state plus the anti-windup freeze flag."""

    zeta_i: AlgebraElement
    windup_frozen: bool = False


def build_error(g, g_r, zeta: AlgebraElement, zeta_r: AlgebraElement, chirality: str) -> ErrorState:
    """Group tracking error and its trivialized velocity error.

    left:  E = g_r^-1 g,  zeta_e = zeta - Ad_{E^-1} zeta_r
    right: E = g g_r^-1,  zeta_e = zeta - Ad_{E} zeta_r
    """
    if zeta.chirality != chirality or zeta_r.chirality != chirality:
        raise ChiralityMismatch("velocity chirality does not match the requested error type")
    if isinstance(g, Rotation):
        e = g_r.inverse().compose(g) if chirality == "left" else g.compose(g_r.inverse())
        transport = e.inverse() if chirality == "left" else e
        eta_r = Ad(transport, zeta_r)
    elif isinstance(g, CircleAngle):
        e = CircleAngle(g.theta - g_r.theta)
        eta_r = zeta_r
    else:
        e = np.asarray(g, dtype=float) - np.asarray(g_r, dtype=float)
        eta_r = zeta_r
    return ErrorState(config_error=e, zeta_e=zeta - eta_r, eta_r=eta_r, chirality=chirality)


def morse_grad_so3(E, weighting: str = "plain", inertia: Optional[np.ndarray] = None):
    """Error value and gradient of the trace error function on SO(3).

    Returns (V, eta) with V = trace(I - E).  "plain" uses the unweighted
    gradient vee(E - E^T); "inertia" uses the inertia-conjugated form
    I (E - E^T) I / det(I), which equals I^-1 applied to the plain one.
    """
    m = E.m if isinstance(E, Rotation) else np.asarray(E, dtype=float)
    value = float(np.trace(np.eye(3) - m))
    skew = m - m.T
    if weighting == "plain":
        return value, vee(skew, tol=np.inf)
    if weighting == "inertia":
        if inertia is None:
            raise ValueError("inertia weighting requires the inertia matrix")
        inertia = np.asarray(inertia, dtype=float)
        weighted = inertia @ skew @ inertia / np.linalg.det(inertia)
        return value, vee(weighted, tol=np.inf)
    raise ValueError(f"unknown weighting {weighting!r}")


def morse_value_grad(config_error, metric: Optional[InertiaMetric] = None,
                     weighting: str = "plain"):
    """Dispatch the configuration-error potential by group type.

    SO(3): trace error.  Circle: 1 - cos.  R^n: quadratic |E|^2 / 2.
    """
    if isinstance(config_error, Rotation):
        inertia = metric.matrix if (metric is not None and weighting == "inertia") else None
        return morse_grad_so3(config_error, weighting=weighting, inertia=inertia)
    if isinstance(config_error, CircleAngle):
        # wrap to (-pi, pi] so the gradient points the short way around
        t = config_error.theta
        if t > np.pi:
            t -= TWO_PI
        return 1.0 - math.cos(t), np.array([math.sin(t)])
    e = np.asarray(config_error, dtype=float)
    return 0.5 * float(e @ e), e.copy()


def feedforward(err: ErrorState, metric: InertiaMetric, d_eta_r: AlgebraElement) -> np.ndarray:
    """Reference feedforward covector of the closed-loop error dynamics.

    Three connection terms assembled from the bilinear corrections; the
    lone directional-derivative content is the total rate of the
    transported reference velocity, supplied by the caller as d_eta_r.
    """
    ze, er = err.zeta_e.value, err.eta_r.value
    chir = err.chirality
    out = metric.apply(d_eta_r.value)
    out = out + quadratic_correction(metric, ze, er, chir)
    out = out + quadratic_correction(metric, er, ze, chir)
    out = out + quadratic_correction(metric, er, er, chir)
    return out


# ---------------------------------------------------------------------------
# Controller families
# ---------------------------------------------------------------------------

def pid_full_step(
    err: ErrorState,
    ctrl: ControllerState,
    gains: GainSet,
    metric: InertiaMetric,
    f_r: np.ndarray,
    weighting: str = "plain",
):
    """Fully actuated PID: control covector and integrator derivative.

    control = -I (kp eta_e + kd zeta_e + ki zeta_i) + f_r, and zeta_i obeys
    the covariant integrator I*nabla_{zeta_e} zeta_i = I eta_e, solved for
    the plain time derivative of zeta_i.
    """
    _, eta_e = morse_value_grad(err.config_error, metric, weighting)
    ze = err.zeta_e.value
    zi = ctrl.zeta_i.value
    control = -metric.apply(gains.kp * eta_e + gains.kd * ze + gains.ki * zi) + f_r
    if ctrl.windup_frozen:
        dzi = np.zeros_like(zi)
    else:
        corr = quadratic_correction(metric, ze, zi, err.chirality)
        dzi = eta_e - metric.solve(corr)
    return control, dzi


def pid_underactuated_step(
    eta_e: np.ndarray,
    v_s: np.ndarray,
    v_a: np.ndarray,
    ctrl: ControllerState,
    gains: GainSet,
    metric_s: np.ndarray,
    b_inv: np.ndarray,
    metric_a: np.ndarray,
    integrator_correction: Optional[np.ndarray] = None,
):
    """Underactuated interconnected PID on the output channel.

    tau_u = -I_s (kp eta_e + kd v_s + ki v_i) - kc B^-1 I_a v_a, with the
    output-metric covariant integrator I_s nabla_{v_s} v_i = I_s eta_e.
    integrator_correction is the caller-evaluated connection term (vector
    form) so plants with configuration-dependent output metrics can supply
    the correct differentiation direction; None means zero.
    """
    eta_e = np.atleast_1d(np.asarray(eta_e, dtype=float))
    v_s = np.atleast_1d(np.asarray(v_s, dtype=float))
    v_a = np.atleast_1d(np.asarray(v_a, dtype=float))
    v_i = ctrl.zeta_i.value
    m_s = np.atleast_2d(np.asarray(metric_s, dtype=float))
    m_a = np.atleast_2d(np.asarray(metric_a, dtype=float))
    b_inv = np.atleast_2d(np.asarray(b_inv, dtype=float))
    tau = -(m_s @ (gains.kp * eta_e + gains.kd * v_s + gains.ki * v_i))
    tau = tau - gains.kc * (b_inv @ (m_a @ v_a))
    if ctrl.windup_frozen:
        dv_i = np.zeros_like(v_i)
    else:
        dv_i = eta_e.copy()
        if integrator_correction is not None:
            dv_i = dv_i - np.atleast_1d(np.asarray(integrator_correction, dtype=float))
    return tau, dv_i


def pid_constrained_step(
    gdot: AlgebraElement,
    v_i: AlgebraElement,
    gains: GainSet,
    metric: InertiaMetric,
    dist: ConstraintDistribution,
    dv_potential: np.ndarray,
):
    """Constrained PID through the motion projector.

    control = -P (kp dV + kd I gdot + ki I v_i); the integrator keeps the
    covariant form including the projector-derivative term, which for a
    constant projector folds into projecting out the connection correction.
    """
    dv = np.asarray(dv_potential, dtype=float)
    momentum = metric.apply(gdot.value)
    control = -(dist.p_motion @ (gains.kp * dv + gains.kd * momentum
                                 + gains.ki * metric.apply(v_i.value)))
    corr = quadratic_correction(metric, gdot.value, v_i.value, gdot.chirality)
    dvi = metric.solve(dist.p_motion @ (dv - corr))
    return control, dvi


# ---------------------------------------------------------------------------
# Lyapunov certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LyapunovSample:
    """One monitor sample: certificate value, error-coordinate norms, and
    the minimum eigenvalue of the decrease-rate matrix."""

    w: float
    z_norms: tuple
    q_min_eig: float
    zdot_bound_ok: bool = True


def q_matrix(gains: GainSet, mu: float, kappa: Optional[float] = None) -> np.ndarray:
    """Decrease-rate matrix whose positive definiteness certifies the gains."""
    kp, kd, ki = gains.kp, gains.kd, gains.ki
    kappa = kappa if kappa is not None else (gains.kappa or 1.0 / mu)
    delta = abs(kappa * mu - 1.0)
    return np.array(
        [
            [ki**2 / kd, 0.0, -delta * ki],
            [0.0, (ki / kd**2) * (kp - 2.0 * kappa * kd**2), 0.0],
            [-delta * ki, 0.0, kd - mu * ki / kd**2],
        ]
    )


def lyapunov_value(
    potential: float,
    eta_e: np.ndarray,
    v_s: np.ndarray,
    v_i: np.ndarray,
    metric_s: np.ndarray,
    gains: GainSet,
    mu: float,
    kappa: Optional[float] = None,
    v_a: Optional[np.ndarray] = None,
    metric_a: Optional[np.ndarray] = None,
    actuator_potential: float = 0.0,
) -> LyapunovSample:
    """Evaluate the certificate function W and the error-coordinate norms.

    Coefficients: alpha = ki/kd^2, beta = ki/kd, sigma = 2 kappa ki,
    gamma = ki (ki + kp kd) / kd^2.  The actuator terms are included when
    v_a / metric_a are given.
    """
    kp, kd, ki = gains.kp, gains.kd, gains.ki
    kappa = kappa if kappa is not None else (gains.kappa or 1.0 / mu)
    alpha = ki / kd**2
    beta = ki / kd
    sigma = 2.0 * kappa * ki
    gamma = ki * (ki + kp * kd) / kd**2

    eta_e = np.atleast_1d(np.asarray(eta_e, dtype=float))
    v_s = np.atleast_1d(np.asarray(v_s, dtype=float))
    v_i = np.atleast_1d(np.asarray(v_i, dtype=float))
    m_s = np.atleast_2d(np.asarray(metric_s, dtype=float))

    def ip(a, b):
        return float(a @ m_s @ b)

    w = (
        kp * potential
        + 0.5 * ip(v_s, v_s)
        + 0.5 * gamma * ip(v_i, v_i)
        + alpha * ip(eta_e, v_s)
        + beta * ip(v_i, v_s)
        + sigma * ip(v_i, eta_e)
        + actuator_potential
    )
    za = 0.0
    if v_a is not None and metric_a is not None:
        v_a = np.atleast_1d(np.asarray(v_a, dtype=float))
        m_a = np.atleast_2d(np.asarray(metric_a, dtype=float))
        w += 0.5 * float(v_a @ m_a @ v_a)
        za = math.sqrt(max(float(v_a @ m_a @ v_a), 0.0))
    z = (
        math.sqrt(max(ip(v_i, v_i), 0.0)),
        math.sqrt(max(ip(eta_e, eta_e), 0.0)),
        math.sqrt(max(ip(v_s, v_s), 0.0)),
        za,
    )
    qeig = float(np.linalg.eigvalsh(q_matrix(gains, mu, kappa))[0])
    return LyapunovSample(w=w, z_norms=z, q_min_eig=qeig)


# ---------------------------------------------------------------------------
# Numerical estimation of the analysis constants mu and lambda
# ---------------------------------------------------------------------------

def _metric_operator_norm(a: np.ndarray, metric: np.ndarray) -> float:
    """Operator norm of A with respect to the metric inner product."""
    w, v = np.linalg.eigh(metric)
    root = v @ np.diag(np.sqrt(w)) @ v.T
    inv_root = v @ np.diag(1.0 / np.sqrt(w)) @ v.T
    return float(np.linalg.norm(root @ a @ inv_root, 2))


def _so3_grid(n_axes: int = 48, n_angles: int = 40):
    """Deterministic quasi-uniform axis/angle grid over the rotation group."""
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    axes = []
    for k in range(n_axes):
        z = 1.0 - 2.0 * (k + 0.5) / n_axes
        r = math.sqrt(max(1.0 - z * z, 0.0))
        phi = TWO_PI * k / golden
        axes.append(np.array([r * math.cos(phi), r * math.sin(phi), z]))
    angles = np.concatenate([[1e-3, 1e-2], np.linspace(0.05, math.pi - 1e-3, n_angles)])
    return axes, angles


_MU_LAM_CACHE: dict = {}


def estimate_mu_lambda(kind: str, metric=None, region=None, offset: float = 0.0):
    """Grid estimates of the Hessian bound mu and gradient/value ratio lam.

    Results are memoized per (kind, metric, region, offset); the grids are
    deterministic so repeated calls are free.

    kind "so3_trace": V = trace(I - E) with gradient I^-1 vee(E - E^T).
    kind "s2_polar": V = 1 - e3 . R e3 with mu taken as the gradient bound.
    kind "s1_cos":  V = 1 - cos(x + offset) on a circle metric over region.
    kind "rn_quadratic": V = |e|^2 / 2 against a constant metric
    (closed form: mu = lam = largest metric-weighted curvature).
    """
    if metric is None or isinstance(metric, np.ndarray):
        key = (kind,
               None if metric is None else np.asarray(metric, dtype=float).tobytes(),
               region, offset)
        if key in _MU_LAM_CACHE:
            return _MU_LAM_CACHE[key]
    else:
        key = None
    result = _estimate_mu_lambda(kind, metric, region, offset)
    if key is not None:
        _MU_LAM_CACHE[key] = result
    return result


def _estimate_mu_lambda(kind, metric, region, offset):
    if kind == "so3_trace":
        m = np.eye(3) if metric is None else np.asarray(metric, dtype=float)
        m_inv = np.linalg.inv(m)
        axes, angles = _so3_grid()
        mu = 0.0
        lam = 0.0
        eps = 1e-5
        for axis in axes:
            for ang in angles:
                e = exp_so3(ang * axis)
                dv = vee(e - e.T, tol=np.inf)
                value = float(np.trace(np.eye(3) - e))
                if value > 1e-10:
                    lam = max(lam, float(dv @ m_inv @ dv) / (2.0 * value))
                grad = m_inv @ dv
                cols = []
                for k in range(3):
                    u = np.zeros(3)
                    u[k] = 1.0
                    ep = e @ exp_so3(eps * u)
                    em = e @ exp_so3(-eps * u)
                    gp = m_inv @ vee(ep - ep.T, tol=np.inf)
                    gm = m_inv @ vee(em - em.T, tol=np.inf)
                    d_grad = (gp - gm) / (2.0 * eps)
                    corr = quadratic_correction(
                        InertiaMetric.constant(m, "left"), u, grad, "left"
                    )
                    cols.append(d_grad + m_inv @ corr)
                mu = max(mu, _metric_operator_norm(np.column_stack(cols), m))
        return mu, lam
    if kind == "s2_polar":
        m = np.eye(3) if metric is None else np.asarray(metric, dtype=float)
        m_inv = np.linalg.inv(m)
        mu = 0.0
        lam = 0.0
        e3 = np.array([0.0, 0.0, 1.0])
        for phi in np.concatenate([[1e-3], np.linspace(0.02, math.pi - 1e-3, 400)]):
            r = exp_so3(np.array([phi, 0.0, 0.0]))
            dv = np.cross(r.T @ e3, e3)
            value = 1.0 - float(e3 @ r @ e3)
            norm = math.sqrt(float(dv @ m_inv @ dv))
            mu = max(mu, norm)
            if value > 1e-10:
                lam = max(lam, float(dv @ m_inv @ dv) / (2.0 * value))
        return mu, lam
    if kind == "s1_cos":
        lo, hi = region if region is not None else (-math.pi + 1e-3, math.pi - 1e-3)
        xs = np.linspace(lo, hi, 2001)
        mu = 0.0
        lam = 0.0
        eps = 1e-6
        for x in xs:
            ival = metric.value_at(x)
            eta = math.sin(x + offset) / ival
            detadx = (
                math.sin(x + eps + offset) / metric.value_at(x + eps)
                - math.sin(x - eps + offset) / metric.value_at(x - eps)
            ) / (2.0 * eps)
            gamma = metric.slope_at(x) / (2.0 * ival)
            mu = max(mu, abs(detadx + gamma * eta))
            value = 1.0 - math.cos(x + offset)
            if value > 1e-10:
                lam = max(lam, ival * eta * eta / (2.0 * value))
        return mu, lam
    if kind == "rn_quadratic":
        m = np.atleast_2d(np.asarray(metric, dtype=float))
        w, v = np.linalg.eigh(m)
        inv_root = v @ np.diag(1.0 / np.sqrt(w)) @ v.T
        top = float(np.linalg.norm(inv_root @ inv_root, 2))
        return top, top
    raise ValueError(f"unknown oracle kind {kind!r}")
