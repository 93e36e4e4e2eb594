"""Scenario files: strict schema validation, parameter-mismatch expansion,
and dotted-path overrides.

Scenario files are YAML trees with units spelled in key names.  Unknown
keys are rejected with their full path so typos never silently change a
run.  `params_true` may either list every parameter explicitly or give
`scale_all` to derive the true plant from the nominal one by a common
multiplicative mismatch factor (inertial/geometric parameters only).
"""

from __future__ import annotations

import copy
from pathlib import Path

import yaml


class ScenarioError(ValueError):
    """Scenario file or override failed validation."""


# -- leaf validators --------------------------------------------------------

def _f(required=False):
    return {"_leaf": "float", "_required": required}


def _b(required=False):
    return {"_leaf": "bool", "_required": required}


def _s(choices=None, required=False):
    return {"_leaf": "str", "_choices": choices, "_required": required}


def _vec(n=None, required=False):
    return {"_leaf": "vec", "_n": n, "_required": required}


def _list_vec(required=False):
    return {"_leaf": "list_vec", "_required": required}


_SIM = {
    "h_plant_s": _f(required=True),
    "h_control_s": _f(required=True),
    "t_final_s": _f(required=True),
    "renorm_threshold": _f(),
}

_GAINS = {
    "kp": _f(required=True),
    "kd": _f(required=True),
    "kI": _f(required=True),
    "kc": _f(),
    "kcd": _f(),
    "kcp": _f(),  # parsed for compatibility; warned about where unused
    "kappa": _f(),
}

_MONITORS = {
    "lyapunov": {
        "enforce": _b(),
        "residual_z": _f(),
        "slack": _f(),
        "min_fraction": _f(),
        "sample_stride": _f(),
    },
    "orthonormality": {"tol": _f()},
    "constraints": {"tol": _f()},
    "acceptance": {
        "error_tail_max": _f(),
        "tail_fraction": _f(),
        "require_saturation": _b(),
        "cart_velocity_max": _f(),
        "spin_tol": _f(),
        "require_exp_tail": _b(),
        "rolling_tol": _f(),
        "noslip_tol": _f(),
    },
}

_CURVE_REFERENCE = {
    "kind": _s(choices=("constant", "sinusoid", "waypoint"), required=True),
    "offset": _vec(),
    "drift_per_s": _vec(),
    "amplitude": _vec(),
    "freq_rad_s": _vec(),
    "phase_rad": _vec(),
    "times_s": _vec(),
    "values": _list_vec(),
}

_QUAD_PARAMS = {
    "mass_kg": _f(required=True),
    "inertia_kgm2": _vec(3, required=True),
    "arm_length_m": _f(required=True),
    "lift_coeff_n_rpm2": _f(required=True),
    "drag_coeff_nm_rpm2": _f(required=True),
    "motor_min_rpm": _f(required=True),
    "motor_max_rpm": _f(required=True),
}

_IPC_PARAMS = {
    "cart_mass_kg": _f(required=True),
    "pend_mass_kg": _f(required=True),
    "pend_length_m": _f(required=True),
    "pivot_inertia_kgm2": _f(required=True),
    "incline_deg": _f(required=True),
}

_HOOP_PARAMS = {
    "hoop_mass_kg": _f(required=True),
    "hoop_inertia_kgm2": _f(required=True),
    "radius_m": _f(required=True),
    "cart_mass_kg": _f(required=True),
    "cart_inertia_kgm2": _f(required=True),
    "cart_offset_m": _f(required=True),
    "incline_deg": _f(),
}

_SPHERE_PARAMS = {
    "shell_mass_kg": _f(required=True),
    "shell_inertia_kgm2": _vec(3, required=True),
    "radius_m": _f(required=True),
    "cart_mass_kg": _f(required=True),
    "cart_inertia_kgm2": _vec(3, required=True),
    "cart_offset_m": _f(required=True),
    "incline_deg": _f(required=True),
}

_PENDULUM_PARAMS = {
    "mass_kg": _f(required=True),
    "rod_length_m": _f(required=True),
    "gravity_m_s2": _f(required=True),
    "inertia_kgm2": _vec(3, required=True),
}


def _with_scale(params: dict) -> dict:
    out = dict(params)
    out["scale_all"] = _f()
    for key in list(out):
        if key != "scale_all" and out[key].get("_leaf"):
            out[key] = dict(out[key], _required=False)
    return out


_SYSTEM_SCHEMAS = {
    "quadrotor": {
        "params_nominal": _QUAD_PARAMS,
        "params_true": _with_scale({**_QUAD_PARAMS, "motor_efficiency": _vec(4)}),
        "reference": {
            "kind": _s(choices=("constant", "exp_curve"), required=True),
            "axis": _vec(3),
            "rate_rad_s": _f(),
            "initial_axis": _vec(3),
            "initial_angle_rad": _f(),
        },
        "initial": {
            "attitude_axis": _vec(3, required=True),
            "attitude_angle_rad": _f(required=True),
            "omega_rad_s": _vec(3, required=True),
        },
        "controller": {
            "morse_weighting": _s(choices=("plain", "inertia")),
            "integrator": _s(choices=("body", "error")),
            "actuation": _s(choices=("motors", "direct")),
            "thrust_command_n": _f(),
        },
        "disturbance_extra": {"com_offset_m": _vec(3)},
        "scalable": ("mass_kg", "inertia_kgm2"),
    },
    "ipc": {
        "params_nominal": _IPC_PARAMS,
        "params_true": _with_scale(_IPC_PARAMS),
        "reference": {"kind": _s(choices=("constant",), required=True), "offset": _vec()},
        "initial": {
            "theta_deg": _f(required=True),
            "omega_rad_s": _f(required=True),
            "x_m": _f(required=True),
            "v_m_s": _f(required=True),
        },
        "controller": {},
        "disturbance_extra": {},
        "scalable": ("cart_mass_kg", "pend_mass_kg", "pend_length_m", "pivot_inertia_kgm2"),
    },
    "hoop": {
        "params_nominal": _HOOP_PARAMS,
        "params_true": _with_scale(_HOOP_PARAMS),
        "reference": _CURVE_REFERENCE,
        "initial": {
            "theta_rad": _f(required=True),
            "position_m": _f(required=True),
            "omega_rad_s": _f(required=True),
            "theta_a_rad": _f(required=True),
            "omega_a_rad_s": _f(required=True),
        },
        "controller": {},
        "disturbance_extra": {},
        "scalable": ("hoop_mass_kg", "hoop_inertia_kgm2", "cart_mass_kg",
                     "cart_inertia_kgm2", "cart_offset_m"),
    },
    "sphere": {
        "params_nominal": _SPHERE_PARAMS,
        "params_true": _with_scale(_SPHERE_PARAMS),
        "reference": _CURVE_REFERENCE,
        "initial": {
            "position_m": _vec(),
            "omega_rad_s": _vec(3, required=True),
            "cart_omega_rad_s": _vec(3, required=True),
            "attitude_axis": _vec(3),
            "attitude_angle_rad": _f(),
            "cart_attitude_axis": _vec(3),
            "cart_attitude_angle_rad": _f(),
        },
        "controller": {},
        "disturbance_extra": {},
        "scalable": ("shell_mass_kg", "shell_inertia_kgm2", "cart_mass_kg",
                     "cart_inertia_kgm2", "cart_offset_m"),
    },
    "pendulum": {
        "params_nominal": _PENDULUM_PARAMS,
        "params_true": _with_scale(_PENDULUM_PARAMS),
        "reference": {"kind": _s(choices=("constant",), required=True)},
        "initial": {
            "tilt_axis": _vec(3, required=True),
            "tilt_angle_deg": _f(required=True),
            "omega_rad_s": _vec(3, required=True),
        },
        "controller": {},
        "disturbance_extra": {},
        "scalable": ("mass_kg", "rod_length_m", "inertia_kgm2"),
    },
}

SYSTEM_NAMES = tuple(_SYSTEM_SCHEMAS)


def _schema_for(system: str) -> dict:
    sys_schema = _SYSTEM_SCHEMAS[system]
    return {
        "label": _s(),
        "system": _s(choices=SYSTEM_NAMES, required=True),
        "sim": _SIM,
        "gains": _GAINS,
        "reference": sys_schema["reference"],
        "disturbance": {
            "kind": _s(choices=("none", "constant"), required=True),
            "covector": _vec(),
            **sys_schema["disturbance_extra"],
        },
        "initial": sys_schema["initial"],
        "controller": sys_schema["controller"],
        "monitors": _MONITORS,
        "params_nominal": sys_schema["params_nominal"],
        "params_true": sys_schema["params_true"],
    }


def _validate_leaf(value, spec, path):
    kind = spec["_leaf"]
    if kind == "float":
        if isinstance(value, str):
            try:
                value = float(value)  # YAML 1.1 reads unsigned exponents as strings
            except ValueError:
                raise ScenarioError(f"{path}: expected a number, got {value!r}") from None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ScenarioError(f"{path}: expected a boolean, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ScenarioError(f"{path}: expected a string, got {value!r}")
        choices = spec.get("_choices")
        if choices and value not in choices:
            raise ScenarioError(f"{path}: {value!r} not one of {choices}")
        return value
    if kind == "vec":
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = [value]
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ScenarioError(f"{path}: expected a list of numbers")
        n = spec.get("_n")
        if n is not None and len(value) != n:
            raise ScenarioError(f"{path}: expected {n} entries, got {len(value)}")
        return [float(v) for v in value]
    if kind == "list_vec":
        if not isinstance(value, list):
            raise ScenarioError(f"{path}: expected a list of points")
        return [
            _validate_leaf(v, {"_leaf": "vec"}, f"{path}[{i}]") for i, v in enumerate(value)
        ]
    raise AssertionError(kind)


def _validate_node(data, schema, path=""):
    if not isinstance(data, dict):
        raise ScenarioError(f"{path or 'scenario'}: expected a mapping")
    out = {}
    for key, value in data.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            raise ScenarioError(f"unknown scenario key: {here}")
        spec = schema[key]
        if "_leaf" in spec:
            out[key] = _validate_leaf(value, spec, here)
        else:
            out[key] = _validate_node(value, spec, here)
    for key, spec in schema.items():
        here = f"{path}.{key}" if path else key
        if "_leaf" in spec and spec.get("_required") and key not in out:
            raise ScenarioError(f"missing required scenario key: {here}")
    return out


def _expand_true_params(sc: dict) -> None:
    true = sc.get("params_true", {})
    if "scale_all" not in true:
        return
    scale = true.pop("scale_all")
    merged = {}
    scalable = _SYSTEM_SCHEMAS[sc["system"]]["scalable"]
    for key, value in sc["params_nominal"].items():
        if key in scalable:
            if isinstance(value, list):
                merged[key] = [v * scale for v in value]
            else:
                merged[key] = value * scale
        else:
            merged[key] = copy.deepcopy(value)
    merged.update(true)
    sc["params_true"] = merged


def validate_scenario(data: dict) -> dict:
    """Validate a raw scenario tree; returns the normalized deep copy."""
    if not isinstance(data, dict) or "system" not in data:
        raise ScenarioError("scenario must be a mapping with a 'system' key")
    system = data["system"]
    if system not in _SYSTEM_SCHEMAS:
        raise ScenarioError(f"unknown system {system!r}; choices: {SYSTEM_NAMES}")
    out = _validate_node(copy.deepcopy(data), _schema_for(system))
    for section in ("sim", "gains", "params_nominal", "params_true", "initial", "reference"):
        if section not in out:
            raise ScenarioError(f"missing required scenario section: {section}")
    _expand_true_params(out)
    h_p, h_c = out["sim"]["h_plant_s"], out["sim"]["h_control_s"]
    ratio = h_c / h_p
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ScenarioError("sim.h_control_s must be an integer multiple of sim.h_plant_s")
    t_ratio = out["sim"]["t_final_s"] / h_c
    if abs(t_ratio - round(t_ratio)) > 1e-6 or round(t_ratio) < 1:
        raise ScenarioError("sim.t_final_s must be an integer multiple of sim.h_control_s")
    return out


def load_scenario(path, overrides=()) -> dict:
    """Load + validate a scenario file, applying key=value overrides first."""
    raw = yaml.safe_load(Path(path).read_text())
    if raw is None:
        raise ScenarioError(f"{path}: empty scenario file")
    for item in overrides:
        apply_override(raw, item)
    return validate_scenario(raw)


def apply_override(raw: dict, item: str) -> None:
    """Apply one 'a.b.c=value' override; the path must already exist."""
    if "=" not in item:
        raise ScenarioError(f"override {item!r} is not of the form key.path=value")
    dotted, text = item.split("=", 1)
    keys = dotted.strip().split(".")
    node = raw
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise ScenarioError(f"override names a missing scenario key: {dotted}")
        node = node[key]
    leaf = keys[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise ScenarioError(f"override names a missing scenario key: {dotted}")
    node[leaf] = yaml.safe_load(text)
