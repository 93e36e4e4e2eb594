"""Fixed-step scenario execution: plant at the fast rate, controller with
zero-order hold at the slow rate, invariant monitors at control ticks,
and deterministic CSV/report persistence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .integrate import rk4_step
from .lie import project_rotation, rotation_defect
from .systems import SYSTEM_MODULES
from .systems.cartpole import ControllerSingularity


class MonitorHardFailure(RuntimeError):
    """Non-finite state or controller singularity; carries the step index."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (plant step {step})")
        self.step = step


@dataclass(frozen=True)
class SimConfig:
    h_plant: float
    h_control: float
    t_final: float
    renorm_threshold: float = 1e-9

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        return cls(
            h_plant=float(d["h_plant_s"]),
            h_control=float(d["h_control_s"]),
            t_final=float(d["t_final_s"]),
            renorm_threshold=float(d.get("renorm_threshold", 1e-9)),
        )

    @property
    def steps_per_tick(self) -> int:
        return int(round(self.h_control / self.h_plant))

    @property
    def n_ticks(self) -> int:
        return int(round(self.t_final / self.h_control))


@dataclass
class MonitorResult:
    name: str
    passed: bool
    enforced: bool
    worst_margin: float
    t_worst: float
    detail: str = ""


@dataclass
class RunResult:
    label: str
    system: str
    columns: list
    trace: np.ndarray
    monitors: list
    error_metric: np.ndarray  # per-row live tracking-error metric
    times: np.ndarray

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.monitors if m.enforced)

    def final_error(self) -> float:
        return float(self.error_metric[-1])

    def column(self, name: str) -> np.ndarray:
        return self.trace[:, self.columns.index(name)]


def build_run(sc: dict):
    module = SYSTEM_MODULES[sc["system"]]
    try:
        return module.RUN_CLASS(sc)
    except (ValueError, KeyError) as exc:
        from .scenario import ScenarioError

        raise ScenarioError(f"scenario rejected by {sc['system']!r}: {exc}") from exc


class _LyapunovTracker:
    """Tracks certificate monotonicity at control ticks.

    Samples are taken every `stride` ticks (default: about every 20 ms of
    simulated time) so fast control rates do not pay an eigenvalue solve
    per millisecond.
    """

    def __init__(self, cfg: dict, h_control: float):
        self.residual_z = float(cfg.get("residual_z", 0.05))
        self.slack = float(cfg.get("slack", 1e-9))
        self.min_fraction = float(cfg.get("min_fraction", 0.99))
        self.enforce = bool(cfg.get("enforce", False))
        default_stride = max(1, int(round(0.02 / h_control)))
        self.stride = int(cfg.get("sample_stride", default_stride))
        self.prev_w: Optional[float] = None
        self.prev_z = 0.0
        self.prev_t = 0.0
        self.outside = 0
        self.violations = 0
        self.worst = 0.0
        self.t_worst = 0.0
        self.q_min_eig = math.inf
        self.min_w = math.inf

    def update(self, t: float, sample):
        z = float(np.linalg.norm(sample.z_norms))
        self.q_min_eig = min(self.q_min_eig, sample.q_min_eig)
        self.min_w = min(self.min_w, sample.w)
        if self.prev_w is not None and self.prev_z > self.residual_z:
            self.outside += 1
            rise = sample.w - self.prev_w
            tol = self.slack * max(1.0, abs(self.prev_w))
            if rise > tol:
                self.violations += 1
                if rise > self.worst:
                    self.worst = rise
                    self.t_worst = t
        self.prev_w = sample.w
        self.prev_z = z
        self.prev_t = t

    def result(self) -> MonitorResult:
        fraction = 1.0 if self.outside == 0 else 1.0 - self.violations / self.outside
        passed = fraction >= self.min_fraction
        return MonitorResult(
            name="lyapunov_decrease",
            passed=passed,
            enforced=self.enforce,
            worst_margin=fraction - self.min_fraction,
            t_worst=self.t_worst,
            detail=(
                f"non-increasing at {fraction:.4f} of {self.outside} ticks outside "
                f"z={self.residual_z:g}; min eig(Q)={self.q_min_eig:.3e}; "
                f"min W={self.min_w:.3e}"
            ),
        )


def run_scenario(sc: dict, decimate: int = 1) -> RunResult:
    """Execute one validated scenario deterministically.

    The plant advances at h_plant with the control held between ticks; the
    controller state advances once per tick with the sampled plant state
    frozen.  Raises MonitorHardFailure on non-finite state.
    """
    cfg = SimConfig.from_dict(sc["sim"])
    run = build_run(sc)
    monitors_cfg = sc.get("monitors", {})
    x = run.initial_state().astype(float).copy()
    x0 = x.copy()

    n_sub = cfg.steps_per_tick
    n_ticks = cfg.n_ticks
    n_steps = n_sub * n_ticks
    decimate = max(1, int(decimate))

    columns = ["t_s"] + list(run.columns)
    kept = [i for i in range(n_steps + 1) if i % decimate == 0 or i == n_steps]
    trace = np.empty((len(kept), len(columns)))
    err = np.empty(len(kept))
    times = np.empty(len(kept))

    ortho_tol = float(monitors_cfg.get("orthonormality", {}).get("tol", 1e-6))
    constraint_tol = float(monitors_cfg.get("constraints", {}).get("tol", 1e-8))
    lyap = _LyapunovTracker(monitors_cfg.get("lyapunov", {}), cfg.h_control)

    worst_ortho = (0.0, 0.0)
    worst_constraint = {}

    out_i = 0

    def record(step_idx: int, t: float, data: dict):
        nonlocal out_i
        if step_idx % decimate == 0 or step_idx == n_steps:
            trace[out_i, 0] = t
            trace[out_i, 1:] = run.row(t, x, data)
            err[out_i] = run.error_metric(t, x)
            times[out_i] = t
            out_i += 1

    step_idx = 0
    data = {}
    try:
        for k in range(n_ticks):
            t_k = k * cfg.h_control
            u, saturated, data = run.control_tick(t_k, x)
            if k % lyap.stride == 0:
                sample = run.lyapunov_sample(t_k, x)
                if sample is not None:
                    lyap.update(t_k, sample)
            for name, value in run.constraint_defects(t_k, x, x0).items():
                prev = worst_constraint.get(name, (0.0, 0.0))
                if value > prev[0]:
                    worst_constraint[name] = (value, t_k)
                else:
                    worst_constraint.setdefault(name, prev)
            if k == 0:
                record(0, 0.0, data)
            run.advance_controller(t_k, x, cfg.h_control)
            for j in range(n_sub):
                t = t_k + j * cfg.h_plant
                x = rk4_step(lambda tt, xx: run.plant_rhs(tt, xx, u), t, x, cfg.h_plant)
                for lo, hi in run.rotation_blocks:
                    block = x[lo:hi].reshape(3, 3)
                    defect = rotation_defect(block)
                    if defect > worst_ortho[0]:
                        worst_ortho = (defect, t + cfg.h_plant)
                    if defect > cfg.renorm_threshold:
                        x[lo:hi] = project_rotation(block).ravel()
                step_idx += 1
                record(step_idx, t + cfg.h_plant, data)
    except (FloatingPointError, ControllerSingularity) as exc:
        raise MonitorHardFailure(str(exc), step_idx) from exc

    t_end = cfg.t_final
    sample = run.lyapunov_sample(t_end, x)
    if sample is not None:
        lyap.update(t_end, sample)
    for name, value in run.constraint_defects(t_end, x, x0).items():
        prev = worst_constraint.get(name, (0.0, 0.0))
        if value > prev[0]:
            worst_constraint[name] = (value, t_end)

    results = [
        MonitorResult(
            name="orthonormality",
            passed=worst_ortho[0] <= ortho_tol,
            enforced=bool(run.rotation_blocks),
            worst_margin=ortho_tol - worst_ortho[0],
            t_worst=worst_ortho[1],
            detail=f"worst defect {worst_ortho[0]:.3e} (tol {ortho_tol:g})",
        ),
        lyap.result(),
    ]
    for name, (value, t_w) in sorted(worst_constraint.items()):
        results.append(
            MonitorResult(
                name=f"constraint_{name}",
                passed=value <= constraint_tol,
                enforced=True,
                worst_margin=constraint_tol - value,
                t_worst=t_w,
                detail=f"worst defect {value:.3e} (tol {constraint_tol:g})",
            )
        )

    result = RunResult(
        label=sc.get("label", sc["system"]),
        system=sc["system"],
        columns=columns,
        trace=trace[:out_i],
        monitors=results,
        error_metric=err[:out_i],
        times=times[:out_i],
    )
    result.monitors.extend(_acceptance_checks(result, monitors_cfg.get("acceptance", {})))
    return result


def _tail_slice(times: np.ndarray, fraction: float) -> np.ndarray:
    t_cut = times[-1] * (1.0 - fraction)
    return times >= t_cut


def _acceptance_checks(result: RunResult, cfg: dict):
    checks = []
    if not cfg:
        return checks
    fraction = float(cfg.get("tail_fraction", 0.2))
    tail = _tail_slice(result.times, fraction)

    if "error_tail_max" in cfg:
        tol = float(cfg["error_tail_max"])
        worst = float(np.max(result.error_metric[tail]))
        t_w = float(result.times[tail][int(np.argmax(result.error_metric[tail]))])
        checks.append(MonitorResult(
            name="acceptance_error_tail",
            passed=worst < tol,
            enforced=True,
            worst_margin=tol - worst,
            t_worst=t_w,
            detail=f"max tracking error over last {fraction:.0%}: {worst:.3e} (tol {tol:g})",
        ))
    if cfg.get("require_saturation"):
        sat = result.column("saturated")
        hit = bool(np.any(sat > 0.5))
        t_w = float(result.times[int(np.argmax(sat > 0.5))]) if hit else 0.0
        checks.append(MonitorResult(
            name="acceptance_saturation_seen",
            passed=hit,
            enforced=True,
            worst_margin=1.0 if hit else -1.0,
            t_worst=t_w,
            detail="anti-windup engaged at least once" if hit else "saturation never engaged",
        ))
    if "cart_velocity_max" in cfg:
        tol = float(cfg["cart_velocity_max"])
        v = np.abs(result.column("v_m_s"))
        worst = float(np.max(v))
        checks.append(MonitorResult(
            name="acceptance_cart_velocity",
            passed=worst < tol,
            enforced=True,
            worst_margin=tol - worst,
            t_worst=float(result.times[int(np.argmax(v))]),
            detail=f"max |cart velocity| {worst:.3f} (tol {tol:g})",
        ))
    if "spin_tol" in cfg:
        tol = float(cfg["spin_tol"])
        spin = result.column("spin_abs")
        worst = float(np.max(spin))
        checks.append(MonitorResult(
            name="acceptance_spin",
            passed=worst <= tol,
            enforced=True,
            worst_margin=tol - worst,
            t_worst=float(result.times[int(np.argmax(spin))]),
            detail=f"max |spin rate| {worst:.3e} (tol {tol:g})",
        ))
    if cfg.get("require_exp_tail"):
        tail20 = _tail_slice(result.times, 0.2)
        v = result.error_metric[tail20]
        t = result.times[tail20]
        good = v > 0
        slope = 0.0
        if np.count_nonzero(good) > 10:
            slope = float(np.polyfit(t[good], np.log(v[good]), 1)[0])
        checks.append(MonitorResult(
            name="acceptance_exp_tail",
            passed=slope < 0.0,
            enforced=True,
            worst_margin=-slope,
            t_worst=float(t[0]) if len(t) else 0.0,
            detail=f"log-error tail slope {slope:.3e} 1/s",
        ))
    if "rolling_tol" in cfg:
        tol = float(cfg["rolling_tol"])
        d = result.column("rolling_defect_m")
        worst = float(np.max(np.abs(d)))
        checks.append(MonitorResult(
            name="acceptance_rolling",
            passed=worst <= tol,
            enforced=True,
            worst_margin=tol - worst,
            t_worst=float(result.times[int(np.argmax(np.abs(d)))]),
            detail=f"max rolling defect {worst:.3e} (tol {tol:g})",
        ))
    if "noslip_tol" in cfg:
        tol = float(cfg["noslip_tol"])
        d = np.abs(result.column("noslip_defect")) + np.abs(result.column("height_defect_m"))
        worst = float(np.max(d))
        checks.append(MonitorResult(
            name="acceptance_noslip",
            passed=worst <= tol,
            enforced=True,
            worst_margin=tol - worst,
            t_worst=float(result.times[int(np.argmax(d))]),
            detail=f"max no-slip defect {worst:.3e} (tol {tol:g})",
        ))
    return checks


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def write_trace_csv(path, result: RunResult) -> None:
    """CSV with a header row; floats carry 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(",".join(result.columns) + "\n")
        for row in result.trace:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def write_monitor_report(path, result: RunResult) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"scenario: {result.label}",
        f"system: {result.system}",
        f"final_tracking_error: {result.final_error():.6e}",
        "",
        f"{'monitor':<28} {'status':<8} {'enforced':<9} {'worst_margin':<14} {'t_worst_s':<10} detail",
    ]
    for m in result.monitors:
        lines.append(
            f"{m.name:<28} {'pass' if m.passed else 'FAIL':<8} "
            f"{'yes' if m.enforced else 'no':<9} {m.worst_margin:<14.6e} "
            f"{m.t_worst:<10.3f} {m.detail}"
        )
    lines.append("")
    lines.append(f"overall: {'pass' if result.passed else 'FAIL'}")
    path.write_text("\n".join(lines) + "\n")
