"""Reference grids and sampled interface paths."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError
from .geometry import GeometryConfig


@dataclass(frozen=True)
class RefGrid:
    """Uniform grids on ``(0, ell_0)`` and ``(ell_0, L)`` plus a time grid.

    ``n_left`` and ``n_right`` count interior nodes; both endpoints of each
    subinterval are included in the node arrays, so ``ell_0`` is the last left
    node and the first right node.
    """

    L: float
    ell_0: float
    T: float
    n_left: int = 200
    n_right: int = 200
    n_time: int = 400

    def __post_init__(self):
        if min(self.n_left, self.n_right) < 1 or self.n_time < 1:
            raise ConfigError("grid sizes must be positive")
        if not (0 < self.ell_0 < self.L) or self.T <= 0:
            raise ConfigError("grid needs 0 < ell_0 < L and T > 0")

    @classmethod
    def from_geometry(cls, geometry: GeometryConfig, n_left=200, n_right=200, n_time=400):
        return cls(geometry.L, geometry.ell_0, geometry.T, int(n_left), int(n_right), int(n_time))

    def refined(self, factor=2, time_factor=None):
        tf = factor if time_factor is None else time_factor
        return RefGrid(
            self.L, self.ell_0, self.T,
            (self.n_left + 1) * factor - 1, (self.n_right + 1) * factor - 1, self.n_time * tf,
        )

    @property
    def h_left(self) -> float:
        return self.ell_0 / (self.n_left + 1)

    @property
    def h_right(self) -> float:
        return (self.L - self.ell_0) / (self.n_right + 1)

    @property
    def dt(self) -> float:
        return self.T / self.n_time

    @cached_property
    def xi_left(self) -> np.ndarray:
        return np.linspace(0.0, self.ell_0, self.n_left + 2)

    @cached_property
    def xi_right(self) -> np.ndarray:
        return np.linspace(self.ell_0, self.L, self.n_right + 2)

    @cached_property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_time + 1)

    def cell_times(self, theta: float) -> np.ndarray:
        t = self.times
        return (1 - theta) * t[:-1] + theta * t[1:]

    def window_mask(self, side: str, window) -> np.ndarray:
        """Nodes strictly inside an open window, on the given subgrid."""
        xi = self.xi_left if side == "left" else self.xi_right
        return (xi > window[0]) & (xi < window[1])


def path_derivative(ell, dt):
    """Second-order central differences, one-sided second order at the ends."""
    ell = np.asarray(ell, dtype=float)
    if ell.size < 3:
        return np.gradient(ell, dt) if ell.size > 1 else np.zeros_like(ell)
    return np.gradient(ell, dt, edge_order=2)


@dataclass(frozen=True)
class InterfacePath:
    """Interface positions and derivatives sampled on the time grid."""

    times: np.ndarray
    ell: np.ndarray
    ell_prime: np.ndarray

    @classmethod
    def from_values(cls, times, ell, ell_prime=None):
        times = np.asarray(times, dtype=float)
        ell = np.asarray(ell, dtype=float)
        if ell.shape != times.shape:
            raise ConfigError("interface path and time grid differ in length")
        if ell_prime is None:
            ell_prime = path_derivative(ell, times[1] - times[0])
        return cls(times, ell, np.asarray(ell_prime, dtype=float))

    @classmethod
    def constant(cls, grid: RefGrid, value=None):
        value = grid.ell_0 if value is None else value
        t = grid.times
        return cls(t, np.full_like(t, value), np.zeros_like(t))

    @classmethod
    def straight_line(cls, grid: RefGrid, ell_T: float):
        t = grid.times
        slope = (ell_T - grid.ell_0) / grid.T
        return cls(t, grid.ell_0 + slope * t, np.full_like(t, slope))

    def c1_distance(self, other: "InterfacePath") -> float:
        return float(np.max(np.abs(self.ell - other.ell)) + np.max(np.abs(self.ell_prime - other.ell_prime)))

    def c1_norm(self) -> float:
        return float(np.max(np.abs(self.ell)) + np.max(np.abs(self.ell_prime)))

    def cell_values(self, theta: float):
        """Interface position and slope on each time cell of the theta scheme."""
        ell = self.ell
        dt = np.diff(self.times)
        return (1 - theta) * ell[:-1] + theta * ell[1:], np.diff(ell) / dt
