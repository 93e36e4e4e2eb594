"""Fixed-step integration helpers shared by the engine and controllers."""

from __future__ import annotations

import numpy as np


def rk4_step(rhs, t: float, y: np.ndarray, h: float) -> np.ndarray:
    """Classical 4-stage Runge-Kutta step with inputs held constant.

    `rhs(t, y)` must be side-effect free; non-finite derivatives raise so
    the caller can abort with a diagnostic instead of silently diverging.
    """
    if h <= 0.0:
        raise ValueError("step size must be positive")
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    out = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite state after integration step")
    return out
