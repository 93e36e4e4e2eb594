"""Metric machinery: invariant connections, a finite-difference Koszul
oracle, circle Christoffel symbols, and constraint projections/forces.

Conventions used throughout:

* `connection_invariant` returns the force-valued (covector) derivative
  I*nabla_xi(eta); divide by the inertia via `InertiaMetric.solve` when the
  vector version is needed.  Returning the covector keeps the same code
  path valid for singular (positive semi-definite) metrics.
* The directional-derivative term d_eta(xi) is always caller-supplied:
  zero when xi, eta are frozen state values, the time derivative when the
  caller differentiates along a trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .lie import (
    AlgebraElement,
    ChiralityMismatch,
    CircleAngle,
    Rotation,
    ad_star,
    exp_so3,
)

PROJECTOR_TOL = 1e-12
CONSTRAINT_TOL = 1e-6


class MetricKindError(ValueError):
    """Operation applied to the wrong kind of inertia metric."""


class ConstraintViolation(ValueError):
    """State velocity violates the constraint distribution beyond tolerance."""


# ---------------------------------------------------------------------------
# Inertia metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InertiaMetric:
    """Kinetic-energy metric.

    kind "constant": a symmetric positive (semi-)definite matrix with an
    invariance class in {left, right, bi, none}.  kind "circle": a scalar
    field I(theta) > 0 with its derivative dI(theta).
    """

    kind: str
    matrix: Optional[np.ndarray] = None
    scalar: Optional[Callable[[float], float]] = None
    dscalar: Optional[Callable[[float], float]] = None
    invariance: str = "none"
    algebra: str = "so3"  # "so3" or "rn" (abelian); circle metrics are abelian

    def __post_init__(self):
        if self.kind not in ("constant", "circle"):
            raise MetricKindError(f"unknown metric kind {self.kind!r}")
        if self.invariance not in ("left", "right", "bi", "none"):
            raise ValueError(f"unknown invariance class {self.invariance!r}")
        if self.algebra not in ("so3", "rn"):
            raise ValueError(f"unknown algebra tag {self.algebra!r}")
        if self.kind == "constant":
            m = np.asarray(self.matrix, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError("constant metric needs a square matrix")
            if np.max(np.abs(m - m.T)) > 1e-12:
                raise ValueError("inertia matrix must be symmetric")
            if np.min(np.linalg.eigvalsh(m)) < -1e-12:
                raise ValueError("inertia matrix must be positive semi-definite")
            if m.shape != (3, 3) and self.algebra == "so3":
                raise ValueError("so3 metrics must be 3x3; tag others algebra='rn'")
            object.__setattr__(self, "matrix", m)
        else:
            if self.scalar is None or self.dscalar is None:
                raise ValueError("circle metric needs scalar and dscalar callables")
            object.__setattr__(self, "algebra", "rn")

    @classmethod
    def constant(cls, matrix, invariance: str, algebra: str = "so3") -> "InertiaMetric":
        return cls(kind="constant", matrix=matrix, invariance=invariance, algebra=algebra)

    @classmethod
    def circle(cls, scalar, dscalar) -> "InertiaMetric":
        return cls(kind="circle", scalar=scalar, dscalar=dscalar, invariance="none")

    # -- linear algebra helpers (constant kind) --

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def solve(self, m: np.ndarray) -> np.ndarray:
        """Inverse metric applied to a covector.

        For semi-definite metrics this inverts the regular block only
        (pseudo-inverse); components in the kernel must not be loaded.
        """
        eigs = np.linalg.eigvalsh(self.matrix)
        if eigs[0] > 1e-12 * max(1.0, eigs[-1]):
            return np.linalg.solve(self.matrix, m)
        return np.linalg.pinv(self.matrix, rcond=1e-10) @ m

    def pairing(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(u @ self.matrix @ v)

    def value_at(self, theta: float) -> float:
        if self.kind != "circle":
            raise MetricKindError("scalar evaluation requires a circle metric")
        val = float(self.scalar(theta))
        if val <= 0.0:
            raise ValueError(f"circle inertia must stay positive, got {val!r}")
        return val

    def slope_at(self, theta: float) -> float:
        if self.kind != "circle":
            raise MetricKindError("scalar evaluation requires a circle metric")
        return float(self.dscalar(theta))


def christoffel_circle(metric: InertiaMetric, theta: float) -> float:
    """Single Christoffel symbol of a circle metric: dI/dtheta / (2 I)."""
    return metric.slope_at(theta) / (2.0 * metric.value_at(theta))


# ---------------------------------------------------------------------------
# Invariant connections
# ---------------------------------------------------------------------------

def quadratic_correction(metric: InertiaMetric, xi, eta, chirality: str) -> np.ndarray:
    """Bilinear (velocity-quadratic) part of I*nabla_xi(eta) as a covector.

    Sign bookkeeping: the bracket term enters with + for left (body)
    velocities and - for right (spatial) velocities; the dual-bracket
    correction enters with - for left-invariant metrics and + for
    right-invariant metrics, and vanishes for bi-invariant ones.
    """
    if metric.kind != "constant":
        raise MetricKindError("quadratic_correction expects a constant metric")
    if metric.invariance == "none":
        raise MetricKindError("connection formulas need an invariance class")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if metric.algebra == "rn":  # abelian: no bracket, no dual-bracket terms
        return np.zeros_like(eta)
    s = 1.0 if chirality == "left" else -1.0
    bracket = np.cross(xi, eta)
    term = 0.5 * s * metric.apply(bracket)
    if metric.invariance == "bi":
        return term
    dual = ad_star(xi, metric.apply(eta)) + ad_star(eta, metric.apply(xi))
    if metric.invariance == "left":
        return term - 0.5 * dual
    return term + 0.5 * dual


def connection_invariant(
    metric: InertiaMetric,
    xi: AlgebraElement,
    eta: AlgebraElement,
    d_eta_xi: Optional[AlgebraElement] = None,
) -> np.ndarray:
    """I*nabla_xi(eta) for an invariant metric, returned as a covector.

    d_eta_xi is the caller-supplied directional derivative of eta along xi
    (None means zero: frozen state values).
    """
    if xi.chirality != eta.chirality:
        raise ChiralityMismatch("connection arguments must share chirality")
    d = np.zeros_like(eta.value) if d_eta_xi is None else d_eta_xi.value
    return metric.apply(d) + quadratic_correction(
        metric, xi.value, eta.value, xi.chirality
    )


def circle_covariant(
    metric: InertiaMetric,
    theta,
    zeta: float,
    eta: float,
    d_eta_zeta: float = 0.0,
) -> float:
    """nabla_zeta(eta) on the circle: d_eta(zeta) + Gamma(theta) zeta eta."""
    t = theta.theta if isinstance(theta, CircleAngle) else float(theta)
    return d_eta_zeta + christoffel_circle(metric, t) * zeta * eta


# ---------------------------------------------------------------------------
# Koszul finite-difference oracle
# ---------------------------------------------------------------------------

def _flow(point, coeff, t: float, chirality: str):
    """Flow of a constant-coefficient invariant field through `point`."""
    if isinstance(point, Rotation):
        step = exp_so3(np.asarray(coeff, dtype=float) * t)
        m = point.m @ step if chirality == "left" else step @ point.m
        return Rotation(m)
    if isinstance(point, CircleAngle):
        return CircleAngle(point.theta + float(coeff[0]) * t)
    return np.asarray(point, dtype=float) + np.asarray(coeff, dtype=float) * t


def _pairing_at(metric_field, point, u, v) -> float:
    m = metric_field(point)
    if np.ndim(m) == 0:
        return float(m) * float(u[0]) * float(v[0])
    return float(np.asarray(u) @ np.asarray(m) @ np.asarray(v))


def koszul_numeric(
    metric_field,
    x,
    y,
    z,
    base_point,
    step: float,
    chirality: str = "left",
) -> float:
    """Six-term Koszul evaluation of <I*nabla_X Y, Z> at `base_point`.

    metric_field maps a group point to the metric coefficient matrix (or a
    scalar on the circle) in the chosen trivialization; x, y, z are the
    constant coefficients of invariant test fields in that trivialization.
    The Lie-derivative terms are central finite differences along field
    flows, so this serves as an independent oracle for the closed-form
    connections.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))

    def lie_derivative(w, u, v):
        fwd = _pairing_at(metric_field, _flow(base_point, w, step, chirality), u, v)
        bwd = _pairing_at(metric_field, _flow(base_point, w, -step, chirality), u, v)
        return (fwd - bwd) / (2.0 * step)

    def bracket(u, v):
        if u.shape == (3,):
            b = np.cross(u, v)
        else:
            b = np.zeros_like(u)
        # Right-invariant fields bracket with a flipped sign.
        return b if chirality == "left" else -b

    pair = lambda u, v: _pairing_at(metric_field, base_point, u, v)
    return 0.5 * (
        lie_derivative(x, y, z)
        + lie_derivative(y, z, x)
        - lie_derivative(z, x, y)
        - pair(x, bracket(y, z))
        + pair(y, bracket(z, x))
        + pair(z, bracket(x, y))
    )


# ---------------------------------------------------------------------------
# Constraint distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintDistribution:
    """Complementary projector pair splitting covectors into motion and
    constraint components."""

    p_motion: np.ndarray
    p_constraint: np.ndarray
    rank: int

    def __post_init__(self):
        pm = np.asarray(self.p_motion, dtype=float)
        pc = np.asarray(self.p_constraint, dtype=float)
        object.__setattr__(self, "p_motion", pm)
        object.__setattr__(self, "p_constraint", pc)
        eye = np.eye(pm.shape[0])
        if np.max(np.abs(pm + pc - eye)) > PROJECTOR_TOL:
            raise ValueError("projectors must sum to the identity")
        for p in (pm, pc):
            if np.max(np.abs(p @ p - p)) > PROJECTOR_TOL:
                raise ValueError("projector is not idempotent within tolerance")
        if int(round(np.trace(pm))) != self.rank:
            raise ValueError("projector rank does not match declared rank")

    @classmethod
    def from_constraint_projector(cls, p_constraint) -> "ConstraintDistribution":
        pc = np.asarray(p_constraint, dtype=float)
        pm = np.eye(pc.shape[0]) - pc
        return cls(pm, pc, rank=int(round(np.trace(pm))))


def _check_admissible(dist: ConstraintDistribution, metric: InertiaMetric, velocity):
    momentum = metric.apply(velocity)
    residual = float(np.max(np.abs(dist.p_constraint @ momentum)))
    if residual > CONSTRAINT_TOL:
        raise ConstraintViolation(
            f"velocity violates the constraint by {residual:g}"
        )


def constraint_force(
    dist: ConstraintDistribution,
    metric: InertiaMetric,
    velocity: AlgebraElement,
    gamma: np.ndarray,
    nabla_p_term: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Reaction covector enforcing the constraint along the current motion.

    nabla_p_term is the covariant derivative of the constraint projector
    applied to the momentum; None means the projector is constant, in which
    case the term reduces to -P_c(quadratic correction of the velocity).
    """
    v = velocity.value
    _check_admissible(dist, metric, v)
    if nabla_p_term is None:
        corr = quadratic_correction(metric, v, v, velocity.chirality)
        nabla_p_term = -(dist.p_constraint @ corr)
    gamma = np.asarray(gamma, dtype=float)
    return -np.asarray(nabla_p_term) - dist.p_constraint @ gamma


def constrained_rhs(
    dist: ConstraintDistribution,
    metric: InertiaMetric,
    velocity: AlgebraElement,
    gamma: np.ndarray,
) -> AlgebraElement:
    """Admissible acceleration of the constrained system (vector form).

    The projected structure guarantees that the constraint component of the
    momentum stays zero under exact integration.
    """
    v = velocity.value
    _check_admissible(dist, metric, v)
    corr = quadratic_correction(metric, v, v, velocity.chirality)
    accel_cov = dist.p_motion @ (np.asarray(gamma, dtype=float) - corr)
    return AlgebraElement(metric.solve(accel_cov), velocity.chirality)
