"""Run configuration: one flat JSON document, every key defaulted.

An empty config reproduces the default 41x41 pendulum landscape run.
Unknown keys are rejected so typos fail loudly (exit code 2 at the CLI).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from .empowerment import OptimizerOptions
from .pendulum import PendulumParams

__all__ = ["RunConfig", "load_config"]


@dataclass(frozen=True)
class RunConfig:
    # pendulum
    mass: float = 1.0
    length: float = 1.0
    gravity: float = 9.81
    friction: float = 0.05
    dt: float = 0.05
    max_torque: float = 2.0
    noise_std: tuple = (0.01, 0.05)
    # landscape grid
    angle_min: float = -math.pi
    angle_max: float = math.pi
    angle_count: int = 41
    velocity_min: float = -8.0
    velocity_max: float = 8.0
    velocity_count: int = 41
    # optimizer
    step_size: float = 0.05
    max_iter: int = 200
    grad_tol: float = 1e-4
    restarts: int = 4
    mc_samples: int = 32
    # oracle discretization
    oracle_actions: int = 64
    oracle_bins: int = 41
    oracle_action_range: float = 4.0
    # Arimoto bound-gap tolerance: the gap shrinks like O(1/iterations), so
    # this directly prices oracle runtime; 1e-3 nats resolves rank order
    oracle_tol: float = 1e-3
    oracle_max_iter: int = 10_000
    # io
    out_dir: str = "out"
    seed: int = 0

    def __post_init__(self):
        if self.angle_count < 2 or self.velocity_count < 2:
            raise ValueError("grid counts must be >= 2 per dimension")
        object.__setattr__(self, "noise_std", tuple(self.noise_std))

    def pendulum_params(self) -> PendulumParams:
        return PendulumParams(
            mass=self.mass,
            length=self.length,
            gravity=self.gravity,
            friction=self.friction,
            dt=self.dt,
            max_torque=self.max_torque,
            noise_std=self.noise_std,
        )

    def optimizer_options(self, seed=None) -> OptimizerOptions:
        return OptimizerOptions(
            step_size=self.step_size,
            max_iter=self.max_iter,
            grad_tol=self.grad_tol,
            restarts=self.restarts,
            mc_samples=self.mc_samples,
            seed=self.seed if seed is None else seed,
        )

    def angles(self) -> np.ndarray:
        return np.linspace(self.angle_min, self.angle_max, self.angle_count)

    def velocities(self) -> np.ndarray:
        return np.linspace(self.velocity_min, self.velocity_max, self.velocity_count)

    def grid_states(self):
        """Grid cells in output order: velocity-major, angle fastest."""
        return [
            np.array([a, v]) for v in self.velocities() for a in self.angles()
        ]


def load_config(path=None, overrides=None) -> RunConfig:
    """Build a RunConfig from an optional JSON file plus overrides."""
    data = {}
    if path is not None:
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**data)
