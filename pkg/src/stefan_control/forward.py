"""Free-boundary simulation by fixed-point iteration on interface paths."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import PchipInterpolator

from .errors import CorridorEscapeError, DomainError, IterationError
from .geometry import Transform
from .grid import InterfacePath, RefGrid, path_derivative
from .parabolic import (
    ControlPair,
    FieldPair,
    ForwardSolution,
    assemble_coefficients,
    interface_from_fluxes,
    scheme_theta,
    solve_forward,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FixedPointConfig:
    tol_fp: float = 1e-9
    max_iters: int = 100
    rho: float = 1.0
    max_split_depth: int = 6
    scheme: str = "crank-nicolson"


@dataclass
class IterationRecord:
    iteration: int
    residual: float
    rho: float
    margin_low: float
    margin_high: float
    t0: float = 0.0
    depth: int = 0

    def line(self) -> str:
        return (
            f"iter={self.iteration} depth={self.depth} t0={self.t0:.6g} residual={self.residual:.6e} "
            f"rho={self.rho:.6g} margin_low={self.margin_low:.6e} margin_high={self.margin_high:.6e}"
        )


@dataclass
class SimulationResult:
    path: InterfacePath
    fields: FieldPair
    flux_l: np.ndarray
    flux_r: np.ndarray
    history: list = field(default_factory=list)
    segments: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.history)


def c1_distance(a, b, dt) -> float:
    """Discrete C^1 distance: max |a - b| plus max of the difference of derivatives."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) + np.max(np.abs(path_derivative(a - b, dt))))


def _segment_grid(grid: RefGrid, n_time: int) -> RefGrid:
    return RefGrid(grid.L, grid.ell_0, n_time * grid.dt, grid.n_left, grid.n_right, n_time)


def lambda_map(transform: Transform, grid: RefGrid, path: InterfacePath, controls: ControlPair | None,
               init, scheme="crank-nicolson", ell_start=None):
    """One application of the interface map.

    Freezes ``path`` in the coefficients, solves both phases and integrates the
    interface flux jump.  Returns ``(functional, forward_solution)``.
    """
    coeffs = assemble_coefficients(transform, grid, path, scheme)
    src = None if controls is None else controls.masked()
    sol = solve_forward(coeffs, src, init)
    start = path.ell[0] if ell_start is None else ell_start
    fun = interface_from_fluxes(sol.flux_l, sol.flux_r, start, grid.dt, path.times[0])
    return fun, sol


def _margins(transform, ell):
    lo, hi = transform.geometry.corridor
    return float(np.min(ell) - lo), float(hi - np.max(ell))


def _picard(transform, grid, init, controls, cfg: FixedPointConfig, ell_start, t0, depth, history):
    times = t0 + grid.times
    ell = np.full(grid.n_time + 1, ell_start)
    rho = cfg.rho
    prev = None
    for it in range(1, cfg.max_iters + 1):
        path = InterfacePath.from_values(times, ell)
        fun, sol = lambda_map(transform, grid, path, controls, init, cfg.scheme, ell_start)
        res = c1_distance(fun.ell, ell, grid.dt)
        lo, hi = _margins(transform, fun.ell)
        rec = IterationRecord(it, res, rho, lo, hi, t0, depth)
        history.append(rec)
        log.debug(rec.line())
        if res <= cfg.tol_fp:
            return path, sol
        if prev is not None and res > prev:
            rho *= 0.5
        prev = res
        lo_c, hi_c = transform.geometry.corridor
        new = (1 - rho) * ell + rho * fun.ell
        while np.any((new <= lo_c) | (new >= hi_c)):
            # damp toward the admissible part instead of failing on the first overshoot
            rho *= 0.5
            if rho < 1e-3:
                bad = np.flatnonzero((fun.ell <= lo_c) | (fun.ell >= hi_c))
                t_bad = float(times[bad[0]])
                raise CorridorEscapeError(f"interface leaves corridor at t={t_bad:.6g}", time=t_bad, iterate=it)
            new = (1 - rho) * ell + rho * fun.ell
        ell = new
    raise IterationError(
        f"fixed-point iteration did not reach tol {cfg.tol_fp:g} in {cfg.max_iters} iterations "
        f"(last residual {history[-1].residual:.3e})",
        history=[r.residual for r in history],
    )


def _simulate(transform, grid, init, controls, cfg, ell_start, t0, depth, history, segments):
    try:
        path, sol = _picard(transform, grid, init, controls, cfg, ell_start, t0, depth, history)
        segments.append((t0, grid.n_time))
        return path.ell, sol
    except (IterationError, CorridorEscapeError, DomainError) as exc:
        if depth >= cfg.max_split_depth or grid.n_time < 2:
            if isinstance(exc, DomainError):
                raise CorridorEscapeError(str(exc), time=t0) from exc
            raise
        log.info("splitting horizon at depth %d (t0=%.6g): %s", depth + 1, t0, exc)
    n1 = grid.n_time // 2
    n2 = grid.n_time - n1
    g1, g2 = _segment_grid(grid, n1), _segment_grid(grid, n2)
    c1 = c2 = None
    if controls is not None:
        c1 = ControlPair(controls.h_l[:n1], controls.h_r[:n1], controls.mask_l, controls.mask_r)
        c2 = ControlPair(controls.h_l[n1:], controls.h_r[n1:], controls.mask_l, controls.mask_r)
    ell1, s1 = _simulate(transform, g1, init, c1, cfg, ell_start, t0, depth + 1, history, segments)
    end = (s1.fields.p[-1], s1.fields.q[-1])
    ell2, s2 = _simulate(transform, g2, end, c2, cfg, ell1[-1], t0 + g1.T, depth + 1, history, segments)
    fields = FieldPair(np.concatenate([s1.fields.p, s2.fields.p[1:]]), np.concatenate([s1.fields.q, s2.fields.q[1:]]))
    sol = ForwardSolution(fields, np.concatenate([s1.flux_l, s2.flux_l]), np.concatenate([s1.flux_r, s2.flux_r]), s1.theta)
    return np.concatenate([ell1, ell2[1:]]), sol


def simulate_free_boundary(transform: Transform, grid: RefGrid, init, controls: ControlPair | None = None,
                           config: FixedPointConfig | None = None) -> SimulationResult:
    """Solve the free-boundary system on ``(0, T)`` by damped Picard iteration.

    On stall or corridor exit the horizon is bisected recursively and each
    segment is restarted from the end state of the previous one.
    """
    cfg = config or FixedPointConfig()
    scheme_theta(cfg.scheme)
    history: list[IterationRecord] = []
    segments: list = []
    ell, sol = _simulate(transform, grid, init, controls, cfg, grid.ell_0, 0.0, 0, history, segments)
    path = InterfacePath.from_values(grid.times, ell)
    return SimulationResult(path, sol.fields, sol.flux_l, sol.flux_r, history, segments)


def stefan_residual_series(path: InterfacePath, trace_l, trace_r) -> np.ndarray:
    """Pointwise ``ell' + d_l p_xi(ell_0) - d_r q_xi(ell_0)`` on the time grid."""
    return path.ell_prime + np.asarray(trace_l) - np.asarray(trace_r)


def stefan_residual(path: InterfacePath, trace_l, trace_r) -> float:
    """``max_t |ell' + d_l p_xi(ell_0) - d_r q_xi(ell_0)|``."""
    return float(np.max(np.abs(stefan_residual_series(path, trace_l, trace_r))))


@dataclass(frozen=True)
class PhysicalSolution:
    """Fields on the moving physical domain.

    Values are stored at the pulled-back reference nodes ``x = G^{-1}(xi,
    ell(t))``, so ``u[n, i] = p[n, i]`` exactly; ``x_left``/``x_right`` hold the
    physical node positions per time.
    """

    times: np.ndarray
    ell: np.ndarray
    x_left: np.ndarray
    x_right: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def evaluate(self, n: int, x):
        """Monotone (PCHIP) interpolation of ``u`` or ``v`` at physical points ``x``."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        left = x <= self.ell[n]
        out[left] = PchipInterpolator(self.x_left[n], self.u[n])(x[left])
        out[~left] = PchipInterpolator(self.x_right[n], self.v[n])(x[~left])
        return out

    def interface_values(self):
        return self.u[:, -1], self.v[:, 0]

    def energy(self):
        """``int_0^ell u^2 dx + int_ell^L v^2 dx`` per time (trapezoid on the physical nodes)."""
        return trapezoid(self.u**2, self.x_left, axis=1) + trapezoid(self.v**2, self.x_right, axis=1)


def to_physical(transform: Transform, grid: RefGrid, fields: FieldPair, path: InterfacePath) -> PhysicalSolution:
    ell = np.asarray(path.ell)
    yl = np.broadcast_to(ell[:, None], (ell.size, grid.n_left + 2))
    yr = np.broadcast_to(ell[:, None], (ell.size, grid.n_right + 2))
    xl = transform.invert(np.broadcast_to(grid.xi_left, yl.shape), yl)
    xr = transform.invert(np.broadcast_to(grid.xi_right, yr.shape), yr)
    return PhysicalSolution(np.asarray(path.times), ell, xl, xr, np.asarray(fields.p), np.asarray(fields.q))


def from_physical(transform: Transform, grid: RefGrid, x_left, u, x_right, v, path: InterfacePath) -> FieldPair:
    """Reference fields from physical samples, ``p(xi) = u(G^{-1}(xi, ell))`` per time."""
    ell = np.asarray(path.ell)
    p = np.empty((ell.size, grid.n_left + 2))
    q = np.empty((ell.size, grid.n_right + 2))
    for n, y in enumerate(ell):
        xl = transform.invert(grid.xi_left, np.full(grid.n_left + 2, y))
        xr = transform.invert(grid.xi_right, np.full(grid.n_right + 2, y))
        p[n] = PchipInterpolator(x_left[n], u[n])(xl)
        q[n] = PchipInterpolator(x_right[n], v[n])(xr)
    return FieldPair(p, q)


def physical_energy(transform: Transform, grid: RefGrid, fields: FieldPair, path: InterfacePath):
    """Per-time energy ``int p^2 / G_x dxi`` over both phases (change of variables of ``int u^2 dx``)."""
    ell = np.asarray(path.ell)
    out = np.zeros(ell.size)
    for xi, h, f in ((grid.xi_left, grid.h_left, fields.p), (grid.xi_right, grid.h_right, fields.q)):
        yy = np.broadcast_to(ell[:, None], (ell.size, xi.size))
        xx = transform.invert(np.broadcast_to(xi, yy.shape), yy)
        gx = transform.sample(xx, yy).gx
        out += h * np.sum(f[:, 1:-1] ** 2 / gx[:, 1:-1], axis=1)
    return out
