"""Coupled control of the free-boundary system and the related experiments."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .dual import LinearControlResult, OptimizerConfig, solve_linear_control
from .errors import ConfigError, CorridorEscapeError, IterationError
from .forward import FixedPointConfig, PhysicalSolution, c1_distance, simulate_free_boundary, stefan_residual, to_physical
from .geometry import Transform
from .grid import InterfacePath, RefGrid
from .parabolic import (
    ControlPair,
    FieldPair,
    assemble_coefficients,
    boundary_trace,
    space_inner,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LoopConfig:
    tol: float = 1e-6
    max_iters: int = 50
    rho: float = 1.0
    R: float | None = None
    delta: float | None = None
    scheme: str = "crank-nicolson"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def derivative_bound(self, ell_0, ell_T, T) -> float:
        return self.R if self.R is not None else 4 * abs(ell_0 - ell_T) / T + 1.0


@dataclass
class FixedPointReport:
    iterates: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    terminal_norms: list = field(default_factory=list)
    constraint_errors: list = field(default_factory=list)
    derivative_violations: list = field(default_factory=list)
    rhos: list = field(default_factory=list)
    converged: bool = False
    warnings: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.residuals)

    @property
    def monotone_tail(self) -> bool:
        r = self.residuals[-3:]
        return len(r) == 3 and r[0] > r[1] > r[2]

    def lines(self):
        return [
            f"iter={k + 1} residual={r:.6e} terminal_norm={tn:.6e} constraint_error={ce:.6e} rho={rho:.6g}"
            for k, (r, tn, ce, rho) in enumerate(zip(self.residuals, self.terminal_norms, self.constraint_errors, self.rhos))
        ]


@dataclass
class ControlledTrajectory:
    path: InterfacePath
    fields: FieldPair
    controls: ControlPair
    physical: PhysicalSolution | None
    stefan_residual: float
    terminal_norm: float
    interface_error: float
    control_norm: float
    theta: np.ndarray
    linear: LinearControlResult | None = None


def data_size(grid: RefGrid, init, ell_T) -> float:
    """``||(p0, q0)|| + |ell_0 - ell_T|`` with the discrete L^2 norm."""
    n = np.sqrt(space_inner(init[0], init[0], grid.h_left) + space_inner(init[1], init[1], grid.h_right))
    return float(n + abs(grid.ell_0 - ell_T))


def check_sign_hypotheses(init, tol=0.0):
    """Return warning messages when ``p0 >= 0`` or ``q0 <= 0`` fail."""
    out = []
    if np.min(init[0]) < -tol:
        out.append("initial left temperature has negative values (p0 >= 0 expected)")
    if np.max(init[1]) > tol:
        out.append("initial right temperature has positive values (q0 <= 0 expected)")
    return out


class CoupledController:
    """Interface map ``Lambda_eps`` and its damped fixed-point iteration."""

    def __init__(self, transform: Transform, grid: RefGrid, init, ell_T: float, eps: float,
                 config: LoopConfig | None = None):
        self.transform = transform
        self.geometry = transform.geometry
        self.grid = grid
        self.init = (np.asarray(init[0], dtype=float), np.asarray(init[1], dtype=float))
        self.ell_T = float(ell_T)
        self.eps = float(eps)
        self.config = config or LoopConfig()
        self.mask_l = grid.window_mask("left", self.geometry.omega_l)
        self.mask_r = grid.window_mask("right", self.geometry.omega_r)
        self.R = self.config.derivative_bound(grid.ell_0, ell_T, grid.T)

    def check_admissible(self, path: InterfacePath):
        self.transform.check_y(path.ell, path.times)
        over = float(np.max(np.abs(path.ell_prime)))
        return over <= self.R, over

    def lambda_eps(self, path: InterfacePath):
        """Controlled linear solve for the frozen ``path``; returns (interface, linear result)."""
        coeffs = assemble_coefficients(self.transform, self.grid, path, self.config.scheme)
        lin = solve_linear_control(coeffs, self.mask_l, self.mask_r, self.init, self.ell_T, self.eps,
                                   self.grid.ell_0, self.config.optimizer)
        return lin.interface, lin

    def solve(self, raise_on_failure=True):
        cfg = self.config
        g = self.grid
        report = FixedPointReport()
        report.warnings.extend(check_sign_hypotheses(self.init))
        size = data_size(g, self.init, self.ell_T)
        if cfg.delta is not None and size > cfg.delta:
            report.warnings.append(f"data size {size:.3e} exceeds configured smallness delta {cfg.delta:.3e}")
        for w in report.warnings:
            warnings.warn(w, stacklevel=2)
        path = InterfacePath.straight_line(g, self.ell_T)
        rho = cfg.rho
        lo_c, hi_c = self.geometry.corridor
        lin = None
        for it in range(1, cfg.max_iters + 1):
            ok, dmax = self.check_admissible(path)
            if not ok:
                report.derivative_violations.append((it, dmax))
            fun, lin = self.lambda_eps(path)
            res = c1_distance(fun.ell, path.ell, g.dt)
            report.iterates.append(path)
            report.residuals.append(res)
            report.terminal_norms.append(lin.terminal_norm)
            report.constraint_errors.append(lin.constraint_error)
            report.rhos.append(rho)
            log.info(report.lines()[-1])
            if res <= cfg.tol:
                report.converged = True
                break
            if it > 1 and res > report.residuals[-2]:
                rho *= 0.5
            new = (1 - rho) * path.ell + rho * fun.ell
            bad = np.flatnonzero((fun.ell <= lo_c) | (fun.ell >= hi_c))
            if bad.size and np.any((new <= lo_c) | (new >= hi_c)):
                t_bad = float(g.times[bad[0]])
                raise CorridorEscapeError(f"iterate {it} leaves corridor at t={t_bad:.6g}", time=t_bad, iterate=it)
            path = InterfacePath.from_values(g.times, new)
        if not report.converged:
            if raise_on_failure:
                raise IterationError(
                    f"coupled fixed point not reached in {cfg.max_iters} iterations "
                    f"(last residual {report.residuals[-1]:.3e})",
                    history=list(report.residuals),
                )
            log.warning("coupled fixed point not reached; returning last iterate")
        traj = self._trajectory(path, lin)
        return traj, report

    def _trajectory(self, path: InterfacePath, lin: LinearControlResult) -> ControlledTrajectory:
        g = self.grid
        geo = self.geometry
        fields = lin.solution.fields
        tl = boundary_trace(fields, "left", g, geo.d_l)
        tr = boundary_trace(fields, "right", g, geo.d_r)
        phys = to_physical(self.transform, g, fields, path)
        return ControlledTrajectory(
            path=path,
            fields=fields,
            controls=lin.controls,
            physical=phys,
            stefan_residual=stefan_residual(path, tl, tr),
            terminal_norm=lin.terminal_norm,
            interface_error=abs(path.ell[-1] - self.ell_T),
            control_norm=lin.control_norm,
            theta=tr - tl,
            linear=lin,
        )


def lambda_eps(transform: Transform, grid: RefGrid, path: InterfacePath, init, ell_T, eps,
               config: LoopConfig | None = None):
    return CoupledController(transform, grid, init, ell_T, eps, config).lambda_eps(path)


def solve_control_problem(transform: Transform, grid: RefGrid, init, ell_T, eps, config: LoopConfig | None = None,
                          raise_on_failure=True):
    return CoupledController(transform, grid, init, ell_T, eps, config).solve(raise_on_failure)


def theta_regularity(theta, dt, exponent=0.125, min_gap=2):
    """Discrete ``C^0`` norm and Holder quotient over pairs at least ``min_gap`` steps apart."""
    theta = np.asarray(theta, dtype=float)
    c0 = float(np.max(np.abs(theta)))
    n = theta.size
    best = 0.0
    for k in range(min_gap, n):
        diff = np.abs(theta[k:] - theta[:-k])
        best = max(best, float(np.max(diff)) / (k * dt) ** exponent)
    return c0, best


@dataclass
class EpsRung:
    eps: float
    ok: bool
    terminal_norm: float = np.nan
    control_norm: float = np.nan
    interface_error: float = np.nan
    iterations: int = 0
    path: InterfacePath | None = None
    error: str = ""


@dataclass
class EpsStudyReport:
    rungs: list
    distances: list

    @property
    def partial(self) -> bool:
        return not all(r.ok for r in self.rungs)

    @property
    def control_norm_spread(self) -> float:
        v = [r.control_norm for r in self.rungs if r.ok]
        if not v or max(v) == 0:
            return 1.0
        return float(max(v) / min(v)) if min(v) > 0 else np.inf

    @property
    def distances_decreasing(self) -> bool:
        d = self.distances
        return all(d[i + 1] <= d[i] for i in range(len(d) - 1))


def eps_limit_study(transform: Transform, grid: RefGrid, init, ell_T, eps_ladder, config: LoopConfig | None = None):
    """Coupled solves along a decreasing ladder of tolerances."""
    eps_ladder = [float(e) for e in eps_ladder]
    if any(b >= a for a, b in zip(eps_ladder, eps_ladder[1:])):
        raise ConfigError("eps ladder must be strictly decreasing")
    rungs = []
    for eps in eps_ladder:
        try:
            traj, rep = solve_control_problem(transform, grid, init, ell_T, eps, config)
            rungs.append(EpsRung(eps, True, traj.terminal_norm, traj.control_norm, traj.interface_error,
                                 rep.iterations, traj.path))
        except Exception as exc:  # noqa: BLE001 - a failed rung is reported, not fatal
            log.warning("eps rung %g failed: %s", eps, exc)
            rungs.append(EpsRung(eps, False, error=f"{type(exc).__name__}: {exc}"))
    dists = []
    for a, b in zip(rungs, rungs[1:]):
        if a.ok and b.ok:
            dists.append(c1_distance(a.path.ell, b.path.ell, grid.dt))
    return EpsStudyReport(rungs, dists)


@dataclass
class NegativeReport:
    q_min: float
    q_max: float
    terminal_norm: float
    floor: float
    floor_slowest: float
    floor_conservative: float
    ell_min: float
    ell_max: float
    sign_ok: bool
    trivial: bool
    path: InterfacePath | None = None

    @property
    def positive_ok(self) -> bool:
        return self.trivial or self.terminal_norm >= 0.5 * self.floor


def first_mode_amplitude(grid: RefGrid, q0) -> float:
    """``|<q0, e_1>|`` for the normalized first sine mode of the right phase."""
    width = grid.L - grid.ell_0
    e1 = np.sqrt(2.0 / width) * np.sin(np.pi * (grid.xi_right - grid.ell_0) / width)
    return float(abs(space_inner(q0, e1, grid.h_right)))


def negative_result_experiment(transform: Transform, grid: RefGrid, init, h_l=None,
                               fp_config: FixedPointConfig | None = None) -> NegativeReport:
    """Single left control against a cold right phase.

    The right control is forced to zero and backward Euler is used so the
    discrete maximum principle holds; the report checks ``q <= 0`` and that the
    right phase has not been driven to zero.
    """
    geo = transform.geometry
    q0 = np.asarray(init[1], dtype=float)
    if np.max(q0) > 0:
        raise ConfigError("negative-result experiment needs q0 <= 0")
    cfg = fp_config or FixedPointConfig(scheme="backward-euler")
    if cfg.scheme != "backward-euler":
        cfg = FixedPointConfig(cfg.tol_fp, cfg.max_iters, cfg.rho, cfg.max_split_depth, "backward-euler")
    mask_l = grid.window_mask("left", geo.omega_l)
    mask_r = grid.window_mask("right", geo.omega_r)
    hl = np.zeros((grid.n_time, grid.n_left + 2)) if h_l is None else np.asarray(h_l, dtype=float)
    controls = ControlPair(hl, np.zeros((grid.n_time, grid.n_right + 2)), mask_l, mask_r).masked()
    sim = simulate_free_boundary(transform, grid, init, controls, cfg)
    q = sim.fields.q
    ell = sim.path.ell
    if np.max(ell) >= geo.L:
        raise CorridorEscapeError("interface reached the outer boundary; experiment invalid")
    tn = float(np.sqrt(space_inner(q[-1], q[-1], grid.h_right)))
    amp = first_mode_amplitude(grid, q0)
    d = geo.d_r
    # first-mode rate integrated along the actual right-phase width; the
    # constant-width envelopes bracket it
    rate = trapezoid(d * np.pi**2 / (geo.L - ell) ** 2, sim.path.times)
    floor = np.exp(-rate) * amp
    floor_s = np.exp(-d * np.pi**2 * grid.T / (geo.L - ell.min()) ** 2) * amp
    floor_c = np.exp(-d * np.pi**2 * grid.T / (geo.L - ell.max()) ** 2) * amp
    trivial = not np.any(q0 != 0)
    return NegativeReport(float(q.min()), float(q.max()), tn, float(floor), float(floor_s), float(floor_c),
                          float(ell.min()), float(ell.max()), bool(q.max() <= 1e-12), trivial, sim.path)
