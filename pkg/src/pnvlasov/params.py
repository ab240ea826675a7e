"""Run-level physical and numerical parameters."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .kernels import SofteningPolicy
from .moments import GridSpec


@dataclass(frozen=True)
class QuadratureOrders:
    sphere_polar: int = 24
    radial: int = 48


@dataclass(frozen=True)
class PhysicalConfig:
    """Light speed, horizon, stepping and regularization controls.

    All quantities are in the dimensionless units of the model; c >= 1 is
    required (the expansion estimates hold uniformly only there).
    """

    c: float = 8.0
    horizon: float = 0.5
    dt: float = 1.0 / 64.0
    epsilon: float = 0.05
    grid: GridSpec = field(default_factory=lambda: GridSpec(1.4, 29))
    quad: QuadratureOrders = field(default_factory=QuadratureOrders)
    fp_tol: float = 1e-10
    fp_max_iter: int = 12

    def __post_init__(self):
        if self.c < 1.0:
            raise InvalidInputError(f"c = {self.c} violates c >= 1")
        if self.dt <= 0 or self.horizon <= 0:
            raise InvalidInputError("dt and horizon must be positive")
        if self.epsilon <= 0:
            raise InvalidInputError("softening epsilon must be positive")
        if self.fp_tol <= 0 or self.fp_max_iter < 1:
            raise InvalidInputError("bad fixed-point controls")

    @property
    def softening(self) -> SofteningPolicy:
        return SofteningPolicy(self.epsilon)

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def check_grid_covers(self, radius: float, retarded: bool = False) -> None:
        need = radius + (self.c * self.horizon if retarded else 0.0)
        if self.grid.extent < min(need, radius + 2 * self.grid.spacing):
            raise InvalidInputError(
                f"grid extent {self.grid.extent} does not cover radius {need}")
