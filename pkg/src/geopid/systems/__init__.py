"""Benchmark plants: attitude quadrotor, inverted pendulum on a cart,
rolling hoop, rolling sphere, spherical pendulum."""

from . import quadrotor, cartpole, hoop, sphere, pendulum

SYSTEM_MODULES = {
    "quadrotor": quadrotor,
    "ipc": cartpole,
    "hoop": hoop,
    "sphere": sphere,
    "pendulum": pendulum,
}

SYSTEM_NAMES = tuple(SYSTEM_MODULES)
