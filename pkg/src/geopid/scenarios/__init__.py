"""Bundled benchmark scenarios."""

from importlib import resources
from pathlib import Path

PAPER_SUITE = (
    "quad_attitude",
    "ipc_stabilize",
    "hoop_fixed_point",
    "hoop_linear_velocity",
    "hoop_sinusoid_velocity",
    "sphere_sinusoid",
    "sphere_circle",
    "sphere_fixed_point",
    "pendulum_upright",
)

EXTRA = ("so3_disturbance_rejection",)


def scenario_path(name: str) -> Path:
    """Filesystem path of a bundled scenario by stem name."""
    with resources.as_file(resources.files(__package__) / f"{name}.yaml") as p:
        return Path(p)


def all_names():
    return PAPER_SUITE + EXTRA
