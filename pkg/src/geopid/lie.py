"""Small-dimension Lie group / Lie algebra primitives.

Configuration spaces handled here: the circle, SO(3), SE(3) and flat R^n.
Rotations are plain 3x3 numpy arrays wherever speed matters; the thin
`Rotation` / `CircleAngle` / `SE3Pose` wrappers validate invariants at API
boundaries.  Algebra vectors carry a chirality tag (left/body vs
right/spatial trivialization) and refuse mixed arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

ROTATION_TOL = 1e-9
SKEW_TOL = 1e-9


class ChiralityMismatch(ValueError):
    """Raised when left- and right-trivialized quantities are mixed."""


class MalformedAlgebraElement(ValueError):
    """Raised when a matrix fails to be a valid algebra representation."""


# ---------------------------------------------------------------------------
# so(3) <-> R^3
# ---------------------------------------------------------------------------

def hat(v) -> np.ndarray:
    """Map a 3-vector to its skew-symmetric matrix, hat(v) @ u == cross(v, u)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def cross3(a, b) -> np.ndarray:
    """Cross product of two 3-vectors (no broadcasting; hot-path variant)."""
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def vee(m, tol: float = SKEW_TOL) -> np.ndarray:
    """Inverse of `hat`.  Rejects matrices that are not skew within `tol`."""
    m = np.asarray(m, dtype=float)
    if np.max(np.abs(m + m.T)) > tol:
        raise MalformedAlgebraElement(
            f"matrix is not skew-symmetric within {tol:g}"
        )
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def exp_so3(v) -> np.ndarray:
    """Rodrigues exponential: rotation by ||v|| about v/||v||."""
    v = np.asarray(v, dtype=float)
    theta = float(np.linalg.norm(v))
    k = hat(v)
    if theta < 1e-8:
        # 2nd-order series; exact enough below the branch point.
        return np.eye(3) + k + 0.5 * (k @ k)
    return (
        np.eye(3)
        + (np.sin(theta) / theta) * k
        + ((1.0 - np.cos(theta)) / theta**2) * (k @ k)
    )


def log_so3(r) -> np.ndarray:
    """Rotation-matrix logarithm with ||result|| <= pi.

    At trace(R) = -1 the axis sign is fixed deterministically from the
    largest diagonal entry so that tests near the antipode are repeatable.
    """
    r = np.asarray(r, dtype=float)
    cos_theta = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    if theta < 1e-8:
        return vee((r - r.T) / 2.0, tol=np.inf)
    if np.pi - theta < 1e-6:
        # Half-turn branch: R = 2 a a^T - I up to O(pi - theta).
        diag = np.diag(r)
        i = int(np.argmax(diag))
        axis = np.empty(3)
        axis[i] = np.sqrt(max((diag[i] + 1.0) / 2.0, 0.0))
        for j in range(3):
            if j != i:
                axis[j] = (r[i, j] + r[j, i]) / (4.0 * axis[i])
        axis /= np.linalg.norm(axis)
        return theta * axis
    return (theta / (2.0 * np.sin(theta))) * vee(r - r.T, tol=np.inf)


def project_rotation(r) -> np.ndarray:
    """Closest rotation in the polar/SVD sense; used for drift renormalization."""
    u, _, vt = np.linalg.svd(np.asarray(r, dtype=float))
    out = u @ vt
    if np.linalg.det(out) < 0.0:
        u[:, -1] = -u[:, -1]
        out = u @ vt
    return out


def rotation_defect(r) -> float:
    """Max-abs deviation of R^T R from the identity."""
    r = np.asarray(r, dtype=float)
    return float(np.max(np.abs(r.T @ r - np.eye(3))))


# ---------------------------------------------------------------------------
# Typed wrappers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Rotation:
    """Validated rotation matrix (orthonormal, det +1, within ROTATION_TOL)."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        object.__setattr__(self, "m", m)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise ValueError("rotation must be a finite 3x3 matrix")
        if rotation_defect(m) > ROTATION_TOL:
            raise ValueError("matrix is not orthonormal within tolerance")
        if abs(np.linalg.det(m) - 1.0) > ROTATION_TOL:
            raise ValueError("matrix determinant is not +1 within tolerance")

    @classmethod
    def exp(cls, v) -> "Rotation":
        return cls(exp_so3(v))

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.eye(3))

    def inverse(self) -> "Rotation":
        return Rotation(self.m.T)

    def compose(self, other: "Rotation") -> "Rotation":
        return Rotation(self.m @ other.m)

    def log(self) -> np.ndarray:
        return log_so3(self.m)


@dataclass(frozen=True)
class CircleAngle:
    """Angle on the circle, reduced to [0, 2*pi) on construction."""

    theta: float

    def __post_init__(self):
        t = float(self.theta) % TWO_PI
        if not np.isfinite(t):
            raise ValueError("angle must be finite")
        object.__setattr__(self, "theta", t)

    def inverse(self) -> "CircleAngle":
        return CircleAngle(-self.theta)

    def compose(self, other: "CircleAngle") -> "CircleAngle":
        return CircleAngle(self.theta + other.theta)


@dataclass(frozen=True)
class SE3Pose:
    """Rigid-body pose (position o, attitude R)."""

    o: np.ndarray
    R: Rotation

    def __post_init__(self):
        o = np.asarray(self.o, dtype=float)
        if o.shape != (3,) or not np.all(np.isfinite(o)):
            raise ValueError("position must be a finite 3-vector")
        object.__setattr__(self, "o", o)

    @classmethod
    def identity(cls) -> "SE3Pose":
        return cls(np.zeros(3), Rotation.identity())

    def compose(self, other: "SE3Pose") -> "SE3Pose":
        return SE3Pose(self.o + self.R.m @ other.o, self.R.compose(other.R))

    def inverse(self) -> "SE3Pose":
        rt = self.R.inverse()
        return SE3Pose(-(rt.m @ self.o), rt)


@dataclass(frozen=True)
class AlgebraElement:
    """Lie-algebra vector with an immutable chirality tag.

    value shape (1,) for the circle / R, (3,) for so(3) / R^3, (6,) for
    se(3) as (linear, angular).  Arithmetic with mismatched chirality raises.
    """

    value: np.ndarray
    chirality: str

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.value, dtype=float))
        if not np.all(np.isfinite(v)):
            raise ValueError("algebra element must be finite")
        if self.chirality not in ("left", "right"):
            raise ValueError("chirality must be 'left' or 'right'")
        object.__setattr__(self, "value", v)

    def _check(self, other: "AlgebraElement"):
        if self.chirality != other.chirality:
            raise ChiralityMismatch(
                f"cannot mix {self.chirality!r} and {other.chirality!r} elements"
            )
        if self.value.shape != other.value.shape:
            raise ValueError("algebra dimensions do not match")

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check(other)
        return AlgebraElement(self.value + other.value, self.chirality)

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check(other)
        return AlgebraElement(self.value - other.value, self.chirality)

    def __neg__(self) -> "AlgebraElement":
        return AlgebraElement(-self.value, self.chirality)

    def __mul__(self, scalar: float) -> "AlgebraElement":
        return AlgebraElement(self.value * float(scalar), self.chirality)

    __rmul__ = __mul__

    @property
    def dim(self) -> int:
        return self.value.shape[0]


# ---------------------------------------------------------------------------
# Adjoint action and bracket
# ---------------------------------------------------------------------------

def Ad(g, eta: AlgebraElement) -> AlgebraElement:
    """Adjoint action of a group element on an algebra element.

    The chirality tag is carried through unchanged; the caller decides in
    which trivialization the result is interpreted.
    """
    v = eta.value
    if isinstance(g, Rotation):
        if v.shape != (3,):
            raise ValueError("so(3) adjoint expects a 3-vector")
        return AlgebraElement(g.m @ v, eta.chirality)
    if isinstance(g, CircleAngle):
        if v.shape != (1,):
            raise ValueError("circle adjoint expects a 1-vector")
        return eta
    if isinstance(g, SE3Pose):
        if v.shape != (6,):
            raise ValueError("se(3) adjoint expects a 6-vector (linear, angular)")
        lin, ang = v[:3], v[3:]
        r = g.R.m
        out = np.concatenate([r @ lin + np.cross(g.o, r @ ang), r @ ang])
        return AlgebraElement(out, eta.chirality)
    arr = np.asarray(g, dtype=float)
    if arr.shape == v.shape:  # abelian R^n
        return eta
    raise ValueError(f"unsupported group element {type(g)!r}")


def ad(xi: AlgebraElement, eta: AlgebraElement) -> AlgebraElement:
    """Algebra bracket ad_xi(eta) = [xi, eta]; zero on abelian groups."""
    xi._check(eta)
    v, w = xi.value, eta.value
    if v.shape == (3,):
        return AlgebraElement(np.cross(v, w), xi.chirality)
    if v.shape == (6,):
        lv, av = v[:3], v[3:]
        lw, aw = w[:3], w[3:]
        return AlgebraElement(
            np.concatenate([np.cross(av, lw) - np.cross(aw, lv), np.cross(av, aw)]),
            xi.chirality,
        )
    return AlgebraElement(np.zeros_like(v), xi.chirality)


def ad_star(xi, m):
    """Dual of the bracket on so(3): <ad*_xi m, eta> = <m, [xi, eta]>.

    Realized componentwise as m x xi; zero for 1-dimensional (abelian)
    algebras.  Raw-vector variant used by the geometry layer.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if xi.shape == (3,):
        return np.cross(m, xi)
    return np.zeros_like(m)
