"""Bundled figure specifications."""

from importlib import resources
from pathlib import Path


def spec_path(name: str) -> Path:
    with resources.as_file(resources.files(__package__) / f"{name}.yaml") as p:
        return Path(p)
