"""Uniform symmetric momentum grids with trapezoid quadrature weights."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MomentumGrid:
    """Symmetric uniform grid on ``[-k_max, k_max]``.

    ``n_points`` must be odd so that 0 is a node and the grid is closed under
    ``k -> -k``.  Trapezoid weights sum to the interval length ``2*k_max``.
    """

    k_max: float
    n_points: int
    nodes: np.ndarray = field(repr=False, default=None)
    weights: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.k_max <= 0.0:
            raise ValueError("k_max must be positive")
        if self.n_points < 5 or self.n_points % 2 == 0:
            raise ValueError("n_points must be odd and >= 5")
        nodes = np.linspace(-self.k_max, self.k_max, self.n_points)
        weights = np.full(self.n_points, self.spacing)
        weights[0] *= 0.5
        weights[-1] *= 0.5
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def spacing(self) -> float:
        return 2.0 * self.k_max / (self.n_points - 1)

    def index_of(self, k: float) -> int:
        """Index of the node equal to ``k`` (must lie on the grid)."""
        idx = int(round((k + self.k_max) / self.spacing))
        if not (0 <= idx < self.n_points):
            raise ValueError(f"{k} outside grid")
        if abs(self.nodes[idx] - k) > 1e-9 * max(1.0, self.k_max):
            raise ValueError(f"{k} is not a grid node")
        return idx

    def refine(self) -> "MomentumGrid":
        """Grid with doubled resolution (same endpoints)."""
        return MomentumGrid(self.k_max, 2 * self.n_points - 1)

    def integrate(self, f_vals: np.ndarray):
        return np.tensordot(self.weights, np.asarray(f_vals), axes=(0, 0))
