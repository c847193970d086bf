"""Parameter sweeps shared by the fixture-fitting script and the test suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .coupled import LoopConfig, data_size, solve_control_problem, theta_regularity
from .geometry import GeometryConfig, Transform, transformed_coefficients
from .grid import InterfacePath, RefGrid
from .profiles import ProfileSpec, initial_data


def flagship_data(grid: RefGrid, h1: float = 1e-2, h1_right: float | None = None):
    """Nonnegative left bump and nonpositive right bump with the given H^1 norms."""
    right = h1 if h1_right is None else h1_right
    return initial_data(grid, ProfileSpec("bump", 1.0, h1_norm=h1), ProfileSpec("bump", -1.0, h1_norm=right))


@dataclass
class SweepPoint:
    amplitude: float
    data_size: float
    control_norm: float
    terminal_norm: float
    interface_error: float
    iterations: int
    theta_c0: float
    theta_holder: float

    @property
    def ratio(self) -> float:
        return self.control_norm / self.data_size


def control_bound_sweep(transform: Transform, grid: RefGrid, points, eps=1e-3, config: LoopConfig | None = None):
    """Coupled runs over ``(amplitude, ell_T)`` pairs; the right bump carries half the left H^1 norm."""
    out = []
    for a, ell_T in points:
        init = flagship_data(grid, a, 0.5 * a)
        traj, rep = solve_control_problem(transform, grid, init, ell_T, eps, config)
        c0, hol = theta_regularity(traj.theta, grid.dt)
        out.append(SweepPoint(float(a), data_size(grid, init, ell_T), traj.control_norm, traj.terminal_norm,
                              traj.interface_error, rep.iterations, c0, hol))
    return out


def sweep_points(ell_0, n=20, lo=1e-3, hi=3e-2, shift_lo=5e-3, shift_hi=3e-2):
    """Deterministic data sweep: H^1 amplitudes on a geometric ladder paired with
    interface shifts on an interleaved linear ladder of alternating sign."""
    amps = np.geomspace(lo, hi, n)
    shifts = np.linspace(shift_lo, shift_hi, n)[(np.arange(n) * 7) % n]
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    return [(float(a), float(ell_0 + s * d)) for a, d, s in zip(amps, shifts, signs)]


def coefficient_norms(transform: Transform, grid: RefGrid, path: InterfacePath):
    """``(||ell'||_{L^2(0,T)}, ||(b_l, b_r)||_{L^2(0,T; L^inf)})`` for one path."""
    geo: GeometryConfig = transform.geometry
    bl = transformed_coefficients(transform, path.ell, path.ell_prime, grid.xi_left, geo.d_l, grid.times).b
    br = transformed_coefficients(transform, path.ell, path.ell_prime, grid.xi_right, geo.d_r, grid.times).b
    sup = np.maximum(np.max(np.abs(bl), axis=1), np.max(np.abs(br), axis=1))
    k = np.sqrt(trapezoid(path.ell_prime**2, grid.times))
    b = np.sqrt(trapezoid(sup**2, grid.times))
    return float(k), float(b)


def random_paths(grid: RefGrid, geometry: GeometryConfig, rng: np.random.Generator, n: int, max_amp=0.08):
    """Smooth paths from ``ell_0`` built from a few random sine modes, kept inside the corridor."""
    lo, hi = geometry.corridor
    room = min(geometry.ell_0 - lo, hi - geometry.ell_0) * 0.9
    t = grid.times / grid.T
    paths = []
    for _ in range(n):
        c = rng.standard_normal(4) / np.arange(1, 5)
        shape = sum(ck * np.sin((k + 0.5) * np.pi * t) for k, ck in enumerate(c))
        amp = rng.uniform(0.0, min(max_amp, room))
        shape = amp * shape / max(np.max(np.abs(shape)), 1e-300)
        paths.append(InterfacePath.from_values(grid.times, geometry.ell_0 + shape))
    return paths
