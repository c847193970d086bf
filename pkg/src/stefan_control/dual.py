"""Constrained approximate control of the flattened linear system for a frozen interface.

The controls are read off the minimizer of a convex dual functional over the
adjoint terminal data ``(phi_T, vphi_T)``:

    J = 1/2 ||phi - P phi||^2_{O_l} + 1/2 ||vphi - P vphi||^2_{O_r}
        + (eps/2) ||(phi_T, vphi_T)||
        - <p_0, phi(0)> - <q_0, vphi(0)> - (beta_l(phi) + beta_r(vphi)) M / 2

where ``P`` projects onto the augmented adjoint restricted to the control
window and ``M`` is the interface constraint defect.  Two evaluation routes
are provided: a matrix-free one built from PDE solves (``eval_J``,
``eval_J_gradient``) and an assembled one (``DualProblem.assembled``) used by
the optimizer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, DegenerateObservabilityError, OptimizationError
from .geometry import GeometryConfig, Transform
from .grid import InterfacePath, RefGrid
from .parabolic import (
    AdjointFieldPair,
    ControlPair,
    ForwardSolution,
    OperatorCoefficients,
    assemble_coefficients,
    interface_from_fluxes,
    solve_adjoint_augmented,
    solve_adjoint_terminal,
    solve_forward,
    space_inner,
    window_inner,
)

log = logging.getLogger(__name__)

WINDOW_TOL = 1e-12


@dataclass(frozen=True)
class TerminalData:
    """Adjoint terminal slices on the full nodal grids (zero Dirichlet ends)."""

    phi_T: np.ndarray
    vphi_T: np.ndarray

    def __post_init__(self):
        for name in ("phi_T", "vphi_T"):
            v = getattr(self, name)
            if v[0] != 0 or v[-1] != 0:
                raise ConfigError(f"{name} must vanish at the Dirichlet endpoints")

    @classmethod
    def zeros(cls, grid: RefGrid):
        return cls(np.zeros(grid.n_left + 2), np.zeros(grid.n_right + 2))

    @classmethod
    def from_vector(cls, x, grid: RefGrid):
        x = np.asarray(x, dtype=float)
        a = np.zeros(grid.n_left + 2)
        b = np.zeros(grid.n_right + 2)
        a[1:-1] = x[: grid.n_left]
        b[1:-1] = x[grid.n_left:]
        return cls(a, b)

    def to_vector(self):
        return np.concatenate([self.phi_T[1:-1], self.vphi_T[1:-1]])

    def norm(self, grid: RefGrid) -> float:
        return float(np.sqrt(space_inner(self.phi_T, self.phi_T, grid.h_left)
                             + space_inner(self.vphi_T, self.vphi_T, grid.h_right)))

    def inner(self, other: "TerminalData", grid: RefGrid) -> float:
        return float(space_inner(self.phi_T, other.phi_T, grid.h_left)
                     + space_inner(self.vphi_T, other.vphi_T, grid.h_right))

    def axpy(self, a: float, other: "TerminalData") -> "TerminalData":
        return TerminalData(self.phi_T + a * other.phi_T, self.vphi_T + a * other.vphi_T)

    def scaled(self, s: float) -> "TerminalData":
        return TerminalData(s * self.phi_T, s * self.vphi_T)


@dataclass(frozen=True)
class ProjectorContext:
    """Window-restricted augmented adjoint and its squared window norms."""

    grid: RefGrid
    mask_l: np.ndarray
    mask_r: np.ndarray
    psi: np.ndarray  # cell values, (n_time, n_left + 2)
    zeta: np.ndarray
    psi0: np.ndarray  # nodal slice at t = 0
    zeta0: np.ndarray
    norm2_l: float
    norm2_r: float

    @classmethod
    def from_augmented(cls, aug, grid: RefGrid, mask_l, mask_r):
        n2l = window_inner(aug.psi_cell, aug.psi_cell, mask_l, grid.h_left, grid.dt)
        n2r = window_inner(aug.zeta_cell, aug.zeta_cell, mask_r, grid.h_right, grid.dt)
        for side, n2 in (("left", n2l), ("right", n2r)):
            if not n2 > WINDOW_TOL:
                raise DegenerateObservabilityError(
                    f"augmented adjoint has vanishing {side} window norm ({n2:.3e})"
                )
        return cls(grid, mask_l, mask_r, aug.psi_cell, aug.zeta_cell, aug.psi[0], aug.zeta[0], n2l, n2r)

    def side(self, side: str):
        g = self.grid
        if side == "left":
            return self.psi, self.mask_l, g.h_left, self.norm2_l
        if side == "right":
            return self.zeta, self.mask_r, g.h_right, self.norm2_r
        raise ConfigError(f"side must be 'left' or 'right', got {side!r}")

    @property
    def window_norm_sum(self) -> float:
        return float(np.sqrt(self.norm2_l) + np.sqrt(self.norm2_r))


def compute_beta(field, ctx: ProjectorContext, side: str) -> float:
    """Windowed projection coefficient of a cell-valued field onto the augmented adjoint."""
    base, mask, h, n2 = ctx.side(side)
    if not n2 > WINDOW_TOL:
        raise DegenerateObservabilityError(f"vanishing {side} window norm")
    return window_inner(field, base, mask, h, ctx.grid.dt) / n2


def apply_projector(field, ctx: ProjectorContext, side: str):
    base = ctx.side(side)[0]
    return compute_beta(field, ctx, side) * base


@dataclass(frozen=True)
class ConstraintData:
    M_ell: float


def compute_constraint(ctx: ProjectorContext, init, ell_0: float, ell_T: float) -> ConstraintData:
    g = ctx.grid
    m = ell_T - ell_0 - space_inner(init[0], ctx.psi0, g.h_left) - space_inner(init[1], ctx.zeta0, g.h_right)
    return ConstraintData(float(m))


@dataclass(frozen=True)
class OptimizerConfig:
    tol_opt: float = 1e-8
    max_iters: int = 2000
    armijo: float = 1e-4
    restart_every: int | None = None
    smoothing_mu: float = 1e-8
    stall_window: int = 50


@dataclass
class OptimizationResult:
    td: TerminalData
    J: float
    grad_norm: float
    iterations: int
    converged: bool
    method: str
    trace: list = field(default_factory=list)

    def trace_lines(self):
        return [f"iter={i} J={j:.12e} gradnorm={gn:.6e} step={st:.6e}" for i, j, gn, st in self.trace]


@dataclass(frozen=True)
class AssembledDual:
    """Quadratic model ``1/2 y^T H y - c^T y + (eps/2) |y|`` in h-scaled coordinates."""

    H: np.ndarray
    c: np.ndarray
    scale: np.ndarray  # y = scale * (interior terminal vector)
    gram_l: np.ndarray
    gram_r: np.ndarray
    cross_l: np.ndarray
    cross_r: np.ndarray
    init_map_l: np.ndarray
    init_map_r: np.ndarray


class DualProblem:
    """Dual functional for one frozen interface path.

    Parameters
    ----------
    coeffs : OperatorCoefficients
    mask_l, mask_r : bool arrays over the full nodal grids (control windows)
    init : pair of nodal initial data ``(p0, q0)``
    ell_T : target interface position
    eps : terminal tolerance
    """

    def __init__(self, coeffs: OperatorCoefficients, mask_l, mask_r, init, ell_T, eps):
        if eps < 0:
            raise ConfigError("eps must be non-negative")
        self.coeffs = coeffs
        self.grid = coeffs.grid
        self.mask_l = np.asarray(mask_l, dtype=bool)
        self.mask_r = np.asarray(mask_r, dtype=bool)
        self.init = (np.asarray(init[0], dtype=float), np.asarray(init[1], dtype=float))
        self.ell_T = float(ell_T)
        self.eps = float(eps)
        self.aug = solve_adjoint_augmented(coeffs)
        self.ctx = ProjectorContext.from_augmented(self.aug, self.grid, self.mask_l, self.mask_r)
        self.constraint = compute_constraint(self.ctx, self.init, self.grid.ell_0, self.ell_T)

    # -- matrix-free route ---------------------------------------------

    def adjoint(self, td: TerminalData) -> AdjointFieldPair:
        return solve_adjoint_terminal(self.coeffs, (td.phi_T, td.vphi_T))

    def _residuals(self, adj: AdjointFieldPair):
        rl = adj.phi_cell - apply_projector(adj.phi_cell, self.ctx, "left")
        rr = adj.vphi_cell - apply_projector(adj.vphi_cell, self.ctx, "right")
        return rl, rr

    def quadratic_part(self, td: TerminalData) -> float:
        g = self.grid
        rl, rr = self._residuals(self.adjoint(td))
        return 0.5 * (window_inner(rl, rl, self.mask_l, g.h_left, g.dt)
                      + window_inner(rr, rr, self.mask_r, g.h_right, g.dt))

    def linear_part(self, td: TerminalData) -> float:
        g = self.grid
        adj = self.adjoint(td)
        m = self.constraint.M_ell
        return -(space_inner(self.init[0], adj.phi[0], g.h_left)
                 + space_inner(self.init[1], adj.vphi[0], g.h_right)
                 + (compute_beta(adj.phi_cell, self.ctx, "left")
                    + compute_beta(adj.vphi_cell, self.ctx, "right")) * m / 2)

    def eval_J(self, td: TerminalData, smoothing_mu: float = 0.0) -> float:
        norm = td.norm(self.grid)
        if smoothing_mu > 0:
            norm = np.sqrt(norm**2 + smoothing_mu**2)
        return self.quadratic_part(td) + self.linear_part(td) + 0.5 * self.eps * norm

    def linear_representer(self) -> TerminalData:
        """Terminal state driven from the initial data by the constraint part of the controls."""
        sol = solve_forward(self.coeffs, self._constraint_controls(), self.init)
        return TerminalData(sol.fields.p[-1], sol.fields.q[-1])

    def _constraint_controls(self) -> ControlPair:
        m = self.constraint.M_ell
        ctx = self.ctx
        return ControlPair(0.5 * m * ctx.psi / ctx.norm2_l, 0.5 * m * ctx.zeta / ctx.norm2_r,
                           self.mask_l, self.mask_r).masked()

    def eval_J_gradient(self, td: TerminalData, smoothing_mu: float = 0.0) -> TerminalData:
        """``L^2`` gradient from forward solves (the adjoint of the adjoint map)."""
        rl, rr = self._residuals(self.adjoint(td))
        zero = (np.zeros_like(self.init[0]), np.zeros_like(self.init[1]))
        w = solve_forward(self.coeffs, ControlPair(rl, rr, self.mask_l, self.mask_r).masked(), zero)
        z = self.linear_representer()
        grad = TerminalData(w.fields.p[-1], w.fields.q[-1]).axpy(-1.0, z)
        norm = td.norm(self.grid)
        if smoothing_mu > 0:
            norm = np.sqrt(norm**2 + smoothing_mu**2)
        if norm > 0:
            grad = grad.axpy(0.5 * self.eps / norm, td)
        return grad

    # -- assembled route -----------------------------------------------

    @cached_property
    def assembled(self) -> AssembledDual:
        g = self.grid
        opl, opr = self.coeffs.operators()
        parts = []
        for op, mask, base, h, n2, p0 in (
            (opl, self.mask_l, self.ctx.psi, g.h_left, self.ctx.norm2_l, self.init[0]),
            (opr, self.mask_r, self.ctx.zeta, g.h_right, self.ctx.norm2_r, self.init[1]),
        ):
            mi = mask[1:-1]
            n = op.n_int
            gram = np.zeros((n, n))
            cross = np.zeros(n)
            w = g.dt * h

            def acc(k, chi, mi=mi, base=base):
                nonlocal gram, cross
                c = chi[mi]
                gram += w * (c.T @ c)
                cross += w * (c.T @ base[k, 1:-1][mi])

            e0, _ = op.backward(np.eye(n), keep_nodal=False, on_cell=acc)
            parts.append((gram, cross, e0, h, n2, p0))
        m = self.constraint.M_ell
        blocks, cs, scales = [], [], []
        for gram, cross, e0, h, n2, p0 in parts:
            blocks.append(gram - np.outer(cross, cross) / n2)
            cs.append(h * (e0.T @ p0[1:-1]) + 0.5 * m * cross / n2)
            scales.append(np.full(gram.shape[0], np.sqrt(h)))
        nl = blocks[0].shape[0]
        H = np.zeros((nl + blocks[1].shape[0],) * 2)
        H[:nl, :nl] = blocks[0]
        H[nl:, nl:] = blocks[1]
        scale = np.concatenate(scales)
        c = np.concatenate(cs)
        Ht = H / np.outer(scale, scale)
        Ht = 0.5 * (Ht + Ht.T)
        return AssembledDual(Ht, c / scale, scale, parts[0][0], parts[1][0], parts[0][1], parts[1][1],
                             parts[0][2], parts[1][2])

    def to_scaled(self, td: TerminalData):
        return self.assembled.scale * td.to_vector()

    def from_scaled(self, y) -> TerminalData:
        return TerminalData.from_vector(np.asarray(y) / self.assembled.scale, self.grid)

    def model_value(self, y, smoothing_mu=0.0) -> float:
        a = self.assembled
        n = np.linalg.norm(y)
        if smoothing_mu > 0:
            n = np.sqrt(n * n + smoothing_mu**2)
        return float(0.5 * y @ (a.H @ y) - a.c @ y + 0.5 * self.eps * n)

    def model_gradient(self, y, smoothing_mu=0.0):
        a = self.assembled
        g = a.H @ y - a.c
        n = np.linalg.norm(y)
        if smoothing_mu > 0:
            g = g + 0.5 * self.eps * y / np.sqrt(n * n + smoothing_mu**2)
        elif n > 0:
            g = g + 0.5 * self.eps * y / n
        return g

    # -- controls ------------------------------------------------------

    def build_controls(self, td: TerminalData) -> ControlPair:
        adj = self.adjoint(td)
        rl, rr = self._residuals(adj)
        base = self._constraint_controls()
        return ControlPair(base.h_l - rl, base.h_r - rr, self.mask_l, self.mask_r).masked()

    def constraint_pairing(self, controls: ControlPair) -> float:
        """``iint h_l psi + iint h_r zeta`` over the windows."""
        g = self.grid
        return (window_inner(controls.h_l, self.ctx.psi, self.mask_l, g.h_left, g.dt)
                + window_inner(controls.h_r, self.ctx.zeta, self.mask_r, g.h_right, g.dt))

    def control_norm(self, controls: ControlPair) -> float:
        g = self.grid
        return float(np.sqrt(window_inner(controls.h_l, controls.h_l, self.mask_l, g.h_left, g.dt)
                             + window_inner(controls.h_r, controls.h_r, self.mask_r, g.h_right, g.dt)))


def _sine_series(xi, a, b, coeffs):
    k = np.arange(1, coeffs.size + 1)
    out = np.sin(np.pi * np.outer((xi - a) / (b - a), k)) @ coeffs
    out[0] = out[-1] = 0.0
    return out


def random_terminal_data(grid: RefGrid, rng: np.random.Generator, n_modes: int = 10) -> TerminalData:
    """Truncated sine series, standard normal coefficients damped by ``1/k^2``."""
    k = np.arange(1, n_modes + 1)
    cl = rng.standard_normal(n_modes) / k**2
    cr = rng.standard_normal(n_modes) / k**2
    return TerminalData(_sine_series(grid.xi_left, 0.0, grid.ell_0, cl),
                        _sine_series(grid.xi_right, grid.ell_0, grid.L, cr))


# -- functional API ----------------------------------------------------

def eval_J(td: TerminalData, problem: DualProblem) -> float:
    return problem.eval_J(td)


def eval_J_gradient(td: TerminalData, problem: DualProblem) -> TerminalData:
    return problem.eval_J_gradient(td)


def build_controls(td: TerminalData, problem: DualProblem) -> ControlPair:
    return problem.build_controls(td)


def _line_search(H, c, half, y, d, g0, mu):
    """Exact minimizer of the convex model along ``d``; returns the step."""
    Hd = H @ d
    dHd = float(d @ Hd)
    r = H @ y - c

    def slope(a):
        z = y + a * d
        n = np.linalg.norm(z)
        if mu > 0:
            n = np.sqrt(n * n + mu * mu)
        pen = half * float(d @ z) / n if n > 0 else half * np.linalg.norm(d)
        return a * dHd + float(d @ r) + pen

    s0 = float(g0 @ d)
    if s0 >= 0:
        return 0.0
    hi = -s0 / dHd if dHd > 0 else 1.0
    hi = max(hi, 1e-300)
    for _ in range(200):
        if slope(hi) > 0:
            break
        hi *= 2.0
    else:
        return hi
    if slope(0.0) >= 0:
        return 0.0
    return brentq(slope, 0.0, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=200)


def minimize_J(problem: DualProblem, config: OptimizerConfig | None = None,
               y0=None, raise_on_failure=True) -> OptimizationResult:
    """Nonlinear conjugate gradients (Polak-Ribiere+, restarts) on the assembled functional.

    The nonsmooth norm term uses the subgradient convention at zero plus a
    proximal check: zero is the minimizer exactly when ``|c| <= eps/2``.  A
    smoothed norm is switched on only if the iteration stalls.
    """
    cfg = config or OptimizerConfig()
    a = problem.assembled
    H, c = a.H, a.c
    half = 0.5 * problem.eps
    n_dim = c.size
    restart = cfg.restart_every or n_dim
    trace = []
    cnorm = float(np.linalg.norm(c))
    if cnorm <= half:
        y = np.zeros(n_dim)
        trace.append((0, 0.0, 0.0, 0.0))
        return OptimizationResult(problem.from_scaled(y), 0.0, 0.0, 0, True, "prox-zero", trace)

    mu = 0.0
    method = "ncg"
    y = np.zeros(n_dim) if y0 is None else np.asarray(y0, dtype=float).copy()

    def grad_at(y):
        if mu == 0.0 and np.linalg.norm(y) == 0.0:
            # minimum-norm subgradient at the origin (ball projection of -c)
            return -c * (1.0 - half / cnorm)
        return problem.model_gradient(y, mu)

    g = grad_at(y)
    d = -g
    f = problem.model_value(y, mu)
    best_f, best_it = f, 0
    gnorm = float(np.linalg.norm(g))
    trace.append((0, f, gnorm, 0.0))
    it = 0
    since_restart = 0
    while gnorm > cfg.tol_opt and it < cfg.max_iters:
        it += 1
        step = _line_search(H, c, half, y, d, g, mu)
        if step <= 0:
            d = -g
            step = _line_search(H, c, half, y, d, g, mu)
        # Armijo safeguard with backtracking
        slope0 = float(g @ d)
        f_new = problem.model_value(y + step * d, mu)
        tries = 0
        while f_new > f + cfg.armijo * step * slope0 + 1e-15 * abs(f) and tries < 40:
            step *= 0.5
            f_new = problem.model_value(y + step * d, mu)
            tries += 1
        y = y + step * d
        g_new = grad_at(y)
        since_restart += 1
        beta = max(0.0, float(g_new @ (g_new - g)) / float(g @ g))
        if since_restart >= restart:
            beta, since_restart = 0.0, 0
        d = -g_new + beta * d
        if float(g_new @ d) >= 0:
            d, since_restart = -g_new, 0
        g, f = g_new, f_new
        gnorm = float(np.linalg.norm(g))
        trace.append((it, f, gnorm, step))
        if f < best_f - 1e-15 * max(1.0, abs(best_f)):
            best_f, best_it = f, it
        elif it - best_it > cfg.stall_window and mu == 0.0 and cfg.smoothing_mu > 0:
            log.info("dual CG stalled at iter %d (|grad|=%.3e); switching to smoothed norm", it, gnorm)
            mu = cfg.smoothing_mu
            method = "ncg-smoothed"
            g = grad_at(y)
            d = -g
            f = problem.model_value(y, mu)
            best_f, best_it = f, it
            since_restart = 0
    converged = gnorm <= cfg.tol_opt
    td = problem.from_scaled(y)
    result = OptimizationResult(td, problem.model_value(y), gnorm, it, converged, method, trace)
    if not converged and raise_on_failure:
        raise OptimizationError(
            f"dual minimization stopped after {it} iterations with |grad| = {gnorm:.3e} > {cfg.tol_opt:g}",
            trace=trace,
        )
    return result


def solve_dual_direct(problem: DualProblem):
    """Spectral solution of the optimality system (verification oracle).

    At a nonzero minimizer ``(H + m I) y = c`` with ``m |y| = eps/2``; the scalar
    ``m`` is the root of a monotone secular equation.
    """
    a = problem.assembled
    half = 0.5 * problem.eps
    lam, Q = np.linalg.eigh(a.H)
    lam = np.maximum(lam, 0.0)
    ch = Q.T @ a.c
    if np.linalg.norm(ch) <= half:
        return np.zeros_like(a.c)
    if half == 0:
        return Q @ (ch / lam)

    def secular(logm):
        m = np.exp(logm)
        return m * np.linalg.norm(ch / (lam + m)) - half

    lo, hi = np.log(1e-30), np.log(1e30)
    logm = brentq(secular, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    m = np.exp(logm)
    return Q @ (ch / (lam + m))


@dataclass
class LinearControlResult:
    problem: DualProblem
    optimization: OptimizationResult
    controls: ControlPair
    solution: ForwardSolution
    interface: object
    terminal_norm: float
    constraint_value: float
    control_norm: float

    @property
    def constraint_error(self) -> float:
        return abs(self.interface.ell[-1] - self.problem.ell_T)


def solve_linear_control(coeffs: OperatorCoefficients, mask_l, mask_r, init, ell_T, eps,
                         ell_start: float | None = None, opt: OptimizerConfig | None = None,
                         raise_on_failure=True) -> LinearControlResult:
    """Dual minimization, controls and the resulting controlled linear solution."""
    problem = DualProblem(coeffs, mask_l, mask_r, init, ell_T, eps)
    res = minimize_J(problem, opt, raise_on_failure=raise_on_failure)
    controls = problem.build_controls(res.td)
    sol = solve_forward(coeffs, controls, problem.init)
    g = coeffs.grid
    start = g.ell_0 if ell_start is None else ell_start
    fun = interface_from_fluxes(sol.flux_l, sol.flux_r, start, g.dt)
    tn = float(np.sqrt(space_inner(sol.fields.p[-1], sol.fields.p[-1], g.h_left)
                       + space_inner(sol.fields.q[-1], sol.fields.q[-1], g.h_right)))
    return LinearControlResult(problem, res, controls, sol, fun, tn, problem.constraint_pairing(controls),
                               problem.control_norm(controls))


@dataclass
class ObservabilityStats:
    ratios: np.ndarray
    window_norm_sum: float

    @property
    def max(self) -> float:
        return float(np.max(self.ratios)) if self.ratios.size else 0.0

    @property
    def median(self) -> float:
        return float(np.median(self.ratios)) if self.ratios.size else 0.0


def observability_ratio(problem: DualProblem, td: TerminalData) -> float:
    """``I(td) / (||phi - P phi||^2 + ||vphi - P vphi||^2)``; zero data gives 0."""
    if td.norm(problem.grid) == 0:
        return 0.0
    g = problem.grid
    adj = problem.adjoint(td)
    rl, rr = problem._residuals(adj)
    num = 0.0
    for cell, nodal0, mask, h, side in (
        (adj.phi_cell, adj.phi[0], problem.mask_l, g.h_left, "left"),
        (adj.vphi_cell, adj.vphi[0], problem.mask_r, g.h_right, "right"),
    ):
        num += window_inner(cell, cell, mask, h, g.dt) + space_inner(nodal0, nodal0, h) \
            + compute_beta(cell, problem.ctx, side) ** 2
    den = window_inner(rl, rl, problem.mask_l, g.h_left, g.dt) + window_inner(rr, rr, problem.mask_r, g.h_right, g.dt)
    return float(num / den)


def probe_observability(problem: DualProblem, n_samples: int, rng: np.random.Generator | None = None,
                        n_modes: int = 10) -> ObservabilityStats:
    """Ratios of the improved observability inequality on random smooth terminal data.

    Uses the assembled Gram blocks, so each sample costs a few small matrix
    products instead of a PDE solve.
    """
    if n_samples < 1:
        raise ConfigError("n_samples must be at least 1")
    rng = rng or np.random.default_rng(0)
    a = problem.assembled
    g = problem.grid
    ctx = problem.ctx
    nl = g.n_left
    out = np.empty(n_samples)
    for k in range(n_samples):
        td = random_terminal_data(g, rng, n_modes)
        x = td.to_vector()
        xl, xr = x[:nl], x[nl:]
        num = den = 0.0
        for xs, gram, cross, e0, h, n2 in ((xl, a.gram_l, a.cross_l, a.init_map_l, g.h_left, ctx.norm2_l),
                                           (xr, a.gram_r, a.cross_r, a.init_map_r, g.h_right, ctx.norm2_r)):
            win = float(xs @ gram @ xs)
            beta = float(cross @ xs) / n2
            phi0 = e0 @ xs
            num += win + h * float(phi0 @ phi0) + beta**2
            den += win - beta**2 * n2
        out[k] = num / den
    return ObservabilityStats(out, ctx.window_norm_sum)


def frozen_path_problem(transform: Transform, grid: RefGrid, path: InterfacePath, init, ell_T, eps,
                        scheme="crank-nicolson") -> DualProblem:
    """Convenience constructor: assemble coefficients for ``path`` and build the dual problem."""
    geo: GeometryConfig = transform.geometry
    coeffs = assemble_coefficients(transform, grid, path, scheme)
    return DualProblem(coeffs, grid.window_mask("left", geo.omega_l), grid.window_mask("right", geo.omega_r),
                       init, ell_T, eps)


def probe_paths(grid: RefGrid, geometry: GeometryConfig, amplitude: float = 0.05, n_paths: int = 5):
    """A family of smooth interface paths starting at ``ell_0`` (constant, straight, sine-type)."""
    t = grid.times / grid.T
    l0 = grid.ell_0
    shapes = [
        np.zeros_like(t),
        (geometry.ell_T - l0) * t,
        amplitude * np.sin(0.5 * np.pi * t),
        -amplitude * np.sin(0.5 * np.pi * t),
        amplitude * np.sin(np.pi * t),
        -amplitude * np.sin(np.pi * t),
        amplitude * np.sin(2 * np.pi * t),
    ]
    if n_paths > len(shapes):
        raise ConfigError(f"at most {len(shapes)} probe paths are available")
    return [InterfacePath.from_values(grid.times, l0 + s) for s in shapes[:n_paths]]
