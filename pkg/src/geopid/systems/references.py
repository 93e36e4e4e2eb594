"""Reference trajectory closures.

References are supplied analytically as (value, velocity, acceleration)
closures so controllers never differentiate numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lie import exp_so3


@dataclass(frozen=True)
class So3Reference:
    """Attitude reference with constant left-trivialized rate.

    kind "constant": fixed attitude.  kind "exp_curve": R0 * exp(t * rate * axis).
    """

    kind: str
    r0: np.ndarray
    axis: np.ndarray
    rate: float

    @classmethod
    def from_config(cls, cfg: dict) -> "So3Reference":
        kind = cfg["kind"]
        axis = np.asarray(cfg.get("axis", [1.0, 0.0, 0.0]), dtype=float)
        norm = np.linalg.norm(axis)
        axis = axis / norm if norm > 0 else axis
        r0_axis = np.asarray(cfg.get("initial_axis", [1.0, 0.0, 0.0]), dtype=float)
        r0 = exp_so3(r0_axis * float(cfg.get("initial_angle_rad", 0.0)))
        return cls(kind=kind, r0=r0, axis=axis, rate=float(cfg.get("rate_rad_s", 0.0)))

    def value(self, t: float) -> np.ndarray:
        if self.kind == "constant":
            return self.r0
        return self.r0 @ exp_so3(self.axis * (self.rate * t))

    def velocity(self, t: float) -> np.ndarray:
        if self.kind == "constant":
            return np.zeros(3)
        return self.rate * self.axis

    def acceleration(self, t: float) -> np.ndarray:
        return np.zeros(3)


@dataclass(frozen=True)
class CurveReference:
    """Scalar or planar position reference.

    kind "constant": fixed target.  kind "sinusoid": offset + drift * t +
    amp * sin(freq * t + phase), componentwise.  kind "waypoint": piecewise
    linear through (times_s, values); velocity is piecewise constant.
    """

    kind: str
    dim: int
    offset: np.ndarray
    drift: np.ndarray
    amp: np.ndarray
    freq: np.ndarray
    phase: np.ndarray
    times: np.ndarray
    points: np.ndarray

    @classmethod
    def from_config(cls, cfg: dict, dim: int) -> "CurveReference":
        kind = cfg["kind"]

        def vec(key, default=0.0):
            raw = cfg.get(key, default)
            arr = np.atleast_1d(np.asarray(raw, dtype=float))
            if arr.shape == (1,) and dim > 1:
                arr = np.full(dim, arr[0])
            if arr.shape != (dim,):
                raise ValueError(f"reference key {key!r} must have dimension {dim}")
            return arr

        times = np.asarray(cfg.get("times_s", [0.0]), dtype=float)
        points = np.asarray(cfg.get("values", [[0.0] * dim]), dtype=float).reshape(-1, dim)
        return cls(
            kind=kind,
            dim=dim,
            offset=vec("offset"),
            drift=vec("drift_per_s"),
            amp=vec("amplitude"),
            freq=vec("freq_rad_s"),
            phase=vec("phase_rad"),
            times=times,
            points=points,
        )

    def value(self, t: float) -> np.ndarray:
        if self.kind == "constant":
            return self.offset.copy()
        if self.kind == "sinusoid":
            return self.offset + self.drift * t + self.amp * np.sin(self.freq * t + self.phase)
        return self._waypoint(t)[0]

    def velocity(self, t: float) -> np.ndarray:
        if self.kind == "constant":
            return np.zeros(self.dim)
        if self.kind == "sinusoid":
            return self.drift + self.amp * self.freq * np.cos(self.freq * t + self.phase)
        return self._waypoint(t)[1]

    def acceleration(self, t: float) -> np.ndarray:
        if self.kind == "sinusoid":
            return -self.amp * self.freq**2 * np.sin(self.freq * t + self.phase)
        return np.zeros(self.dim)

    def _waypoint(self, t: float):
        times, pts = self.times, self.points
        if t <= times[0]:
            return pts[0].copy(), np.zeros(self.dim)
        if t >= times[-1]:
            return pts[-1].copy(), np.zeros(self.dim)
        i = int(np.searchsorted(times, t, side="right")) - 1
        dt = times[i + 1] - times[i]
        frac = (t - times[i]) / dt
        vel = (pts[i + 1] - pts[i]) / dt
        return pts[i] + frac * (pts[i + 1] - pts[i]), vel
