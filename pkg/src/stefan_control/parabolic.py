"""Theta-scheme solvers on the fixed reference cylinder.

Each phase is discretized with centered differences on its own uniform grid.
Per time cell ``n`` the spatial operator is the tridiagonal matrix ``K_n``
(coefficients frozen at the cell evaluation time) and one step reads

    (I + theta dt K_n) p^{n+1} = (I - (1 - theta) dt K_n) p^n + dt f^n.

The backward solvers use the exact transpose of this recursion, which makes
the discrete duality identities hold to round-off rather than to truncation
order.  Arrays always carry the Dirichlet boundary nodes; they are written,
never solved for.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigError, NumericalError
from .geometry import GeometryConfig, Transform, transformed_coefficients
from .grid import InterfacePath, RefGrid

SCHEMES = {"crank-nicolson": 0.5, "backward-euler": 1.0}


def scheme_theta(scheme) -> float:
    if isinstance(scheme, str):
        try:
            return SCHEMES[scheme]
        except KeyError:
            raise ConfigError(f"unknown scheme {scheme!r}; expected one of {sorted(SCHEMES)}") from None
    theta = float(scheme)
    if not 0.5 <= theta <= 1.0:
        raise ConfigError("theta must lie in [1/2, 1]")
    return theta


class PhaseOperator:
    """Time-dependent tridiagonal operator of one phase.

    Parameters
    ----------
    d, b : ndarray, shape (n_time, n_nodes)
        Diffusion and advection on every node (boundaries included), one row
        per time cell.
    h, dt, theta : float
    """

    def __init__(self, d, b, h, dt, theta, check_peclet=True):
        d = np.asarray(d, dtype=float)
        b = np.asarray(b, dtype=float)
        if d.ndim != 2 or d.shape != b.shape or d.shape[1] < 3:
            raise ConfigError("coefficient fields must be (n_time, n_nodes) with n_nodes >= 3")
        if not np.all(d > 0):
            raise ConfigError("non-positive diffusion coefficient")
        self.h, self.dt, self.theta = float(h), float(dt), float(theta)
        if check_peclet:
            pe = np.max(np.abs(b) * self.h / (2 * d))
            if pe >= 1.0:
                raise ConfigError(f"cell Peclet number {pe:.3g} >= 1; refine the spatial grid")
        self.d, self.b = d, b
        h2 = self.h**2
        # full-row bands on every node; row i couples to i-1 (lo) and i+1 (up)
        self.lo = -d / h2 - b / (2 * self.h)
        self.di = 2 * d / h2
        self.up = -d / h2 + b / (2 * self.h)

    @property
    def n_time(self) -> int:
        return self.d.shape[0]

    @property
    def n_int(self) -> int:
        return self.d.shape[1] - 2

    def _banded(self, n, factor, transpose=False):
        lo = self.lo[n, 1:-1]
        di = self.di[n, 1:-1]
        up = self.up[n, 1:-1]
        ab = np.zeros((3, lo.size))
        ab[1] = 1.0 + factor * di
        if transpose:
            ab[0, 1:] = factor * lo[1:]
            ab[2, :-1] = factor * up[:-1]
        else:
            ab[0, 1:] = factor * up[:-1]
            ab[2, :-1] = factor * lo[1:]
        return ab

    def apply_K(self, n, v, transpose=False):
        """``K_n v`` (or ``K_n^T v``) on interior vectors of shape (n_int, ...)."""
        lo = self.lo[n, 1:-1]
        di = self.di[n, 1:-1]
        up = self.up[n, 1:-1]
        ext = (slice(None),) + (None,) * (v.ndim - 1)
        out = di[ext] * v
        if transpose:
            out[1:] += up[:-1][ext] * v[:-1]
            out[:-1] += lo[1:][ext] * v[1:]
        else:
            out[1:] += lo[1:][ext] * v[:-1]
            out[:-1] += up[:-1][ext] * v[1:]
        return out

    def _solve(self, ab, rhs):
        try:
            out = solve_banded((1, 1), ab, rhs, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"tridiagonal solve failed: {exc}") from exc
        if not np.all(np.isfinite(out)):
            raise NumericalError("tridiagonal solve produced non-finite values")
        return out

    def forward(self, init, source=None):
        """March ``init`` (n_int, ...) forward; returns (n_time + 1, n_int, ...)."""
        th, dt = self.theta, self.dt
        p = np.asarray(init, dtype=float).copy()
        out = np.empty((self.n_time + 1,) + p.shape)
        out[0] = p
        for n in range(self.n_time):
            rhs = p - (1 - th) * dt * self.apply_K(n, p) if th < 1 else p.copy()
            if source is not None:
                rhs = rhs + dt * source[n]
            p = self._solve(self._banded(n, th * dt), rhs)
            out[n + 1] = p
        return out

    def backward(self, terminal, source=None, keep_nodal=True, on_cell=None):
        """Transposed recursion from ``terminal`` with optional source.

        Returns ``(phi, chi)`` where ``phi`` holds nodal slices (n_time + 1,
        ...) and ``chi`` the cell averages ``theta phi^n + (1 - theta)
        phi^{n+1}`` (n_time, ...) that pair with cell sources.  With
        ``on_cell`` given, each ``chi`` is passed to ``on_cell(n, chi)`` instead
        of being stored (``chi`` is then returned as None).
        """
        th, dt = self.theta, self.dt
        phi = np.asarray(terminal, dtype=float).copy()
        nodal = np.empty((self.n_time + 1,) + phi.shape) if keep_nodal else None
        chi = np.empty((self.n_time,) + phi.shape) if on_cell is None else None
        if keep_nodal:
            nodal[-1] = phi
        for n in range(self.n_time - 1, -1, -1):
            rhs = phi if source is None else phi + th * dt * source[n]
            c = self._solve(self._banded(n, th * dt, transpose=True), rhs)
            if on_cell is None:
                chi[n] = c
            else:
                on_cell(n, c)
            phi = c - (1 - th) * dt * self.apply_K(n, c, transpose=True) if th < 1 else c.copy()
            if source is not None:
                phi = phi + (1 - th) * dt * source[n]
            if keep_nodal:
                nodal[n] = phi
        if not keep_nodal:
            nodal = phi
        return nodal, chi

    def transpose_full(self, n, f):
        """``(K_n^T f)`` on interior nodes for a full nodal vector ``f``.

        This is the centered discretization of ``-(d f)'' - (b f)'`` at the
        interior nodes, boundary values of ``f`` included.
        """
        return self.up[n, :-2] * f[:-2] + self.di[n, 1:-1] * f[1:-1] + self.lo[n, 2:] * f[2:]


@dataclass(frozen=True)
class OperatorCoefficients:
    """Transformed coefficients of both phases on every time cell."""

    grid: RefGrid
    theta: float
    d_l: np.ndarray
    b_l: np.ndarray
    d_r: np.ndarray
    b_r: np.ndarray
    diffusivity_l: float
    diffusivity_r: float

    def operators(self, check_peclet=True):
        g = self.grid
        return (
            PhaseOperator(self.d_l, self.b_l, g.h_left, g.dt, self.theta, check_peclet),
            PhaseOperator(self.d_r, self.b_r, g.h_right, g.dt, self.theta, check_peclet),
        )

    @classmethod
    def constant(cls, grid: RefGrid, d_l, d_r, b_l=0.0, b_r=0.0, theta=0.5):
        nl = (grid.n_time, grid.n_left + 2)
        nr = (grid.n_time, grid.n_right + 2)
        return cls(grid, scheme_theta(theta), np.full(nl, float(d_l)), np.full(nl, float(b_l)),
                   np.full(nr, float(d_r)), np.full(nr, float(b_r)), float(d_l), float(d_r))


def assemble_coefficients(transform: Transform, grid: RefGrid, path: InterfacePath, scheme="crank-nicolson"):
    """Coefficient fields of the flattened operator on each time cell.

    The interface position is sampled at the cell evaluation time and its
    derivative is the cell difference quotient (exact for piecewise-linear
    paths, central for Crank-Nicolson).
    """
    theta = scheme_theta(scheme)
    geo: GeometryConfig = transform.geometry
    transform.check_y(path.ell, path.times)
    ell_c, slope_c = path.cell_values(theta)
    tc = grid.cell_times(theta)
    cl = transformed_coefficients(transform, ell_c, slope_c, grid.xi_left, geo.d_l, tc)
    cr = transformed_coefficients(transform, ell_c, slope_c, grid.xi_right, geo.d_r, tc)
    return OperatorCoefficients(grid, theta, cl.d, cl.b, cr.d, cr.b, geo.d_l, geo.d_r)


@dataclass(frozen=True)
class FieldPair:
    """Nodal fields ``p`` (left) and ``q`` (right), shape (n_time + 1, n_nodes)."""

    p: np.ndarray
    q: np.ndarray


@dataclass(frozen=True)
class ControlPair:
    """Cell-valued sources, shape (n_time, n_nodes), zero outside the masks."""

    h_l: np.ndarray
    h_r: np.ndarray
    mask_l: np.ndarray | None = None
    mask_r: np.ndarray | None = None

    @classmethod
    def zeros(cls, grid: RefGrid, mask_l=None, mask_r=None):
        return cls(np.zeros((grid.n_time, grid.n_left + 2)), np.zeros((grid.n_time, grid.n_right + 2)),
                   mask_l, mask_r)

    def masked(self):
        hl, hr = self.h_l.copy(), self.h_r.copy()
        if self.mask_l is not None:
            hl[:, ~self.mask_l] = 0.0
        if self.mask_r is not None:
            hr[:, ~self.mask_r] = 0.0
        return ControlPair(hl, hr, self.mask_l, self.mask_r)


@dataclass(frozen=True)
class ForwardSolution:
    fields: FieldPair
    flux_l: np.ndarray  # consistent interface flux ~ d_l p_xi(ell_0), per cell
    flux_r: np.ndarray
    theta: float


@dataclass(frozen=True)
class AugmentedAdjointPair:
    psi: np.ndarray
    zeta: np.ndarray
    psi_cell: np.ndarray
    zeta_cell: np.ndarray


@dataclass(frozen=True)
class AdjointFieldPair:
    phi: np.ndarray
    vphi: np.ndarray
    phi_cell: np.ndarray
    vphi_cell: np.ndarray


def _pad(interior, axis=-1):
    pad = [(0, 0)] * interior.ndim
    pad[axis] = (1, 1)
    return np.pad(interior, pad)


def _check_init(v, n_nodes, name):
    v = np.asarray(v, dtype=float)
    if v.shape != (n_nodes,):
        raise ConfigError(f"{name} must have {n_nodes} nodal values, got shape {v.shape}")
    if v[0] != 0 or v[-1] != 0:
        raise ConfigError(f"{name} violates the homogeneous Dirichlet rows")
    return v


def solve_forward(coeffs: OperatorCoefficients, source: ControlPair | None, init, check_peclet=True):
    """Forward theta-scheme for both phases.

    ``init`` is a pair of nodal vectors ``(p0, q0)``; ``source`` holds the
    cell-valued right-hand sides (masked controls, or any field for tests).
    """
    g = coeffs.grid
    opl, opr = coeffs.operators(check_peclet)
    p0 = _check_init(init[0], g.n_left + 2, "p0")
    q0 = _check_init(init[1], g.n_right + 2, "q0")
    sl = None if source is None else np.asarray(source.h_l)[:, 1:-1]
    sr = None if source is None else np.asarray(source.h_r)[:, 1:-1]
    p = _pad(opl.forward(p0[1:-1], sl))
    q = _pad(opr.forward(q0[1:-1], sr))
    th = coeffs.theta
    pav = th * p[1:, -2] + (1 - th) * p[:-1, -2]
    qav = th * q[1:, 1] + (1 - th) * q[:-1, 1]
    flux_l = -(opl.d[:, -1] / g.h_left + 0.5 * opl.b[:, -1]) * pav
    flux_r = (opr.d[:, 0] / g.h_right - 0.5 * opr.b[:, 0]) * qav
    return ForwardSolution(FieldPair(p, q), flux_l, flux_r, th)


def lift_functions(grid: RefGrid):
    """Time-independent lifts equal to 1 at ``ell_0`` and 0 at the outer ends."""
    fl = grid.xi_left / grid.ell_0
    fr = (grid.L - grid.xi_right) / (grid.L - grid.ell_0)
    return fl, fr


def solve_adjoint_augmented(coeffs: OperatorCoefficients, check_peclet=True) -> AugmentedAdjointPair:
    """Backward adjoint pair with value 1 at the interface node and zero terminal data.

    Solved for ``psi - f`` with the linear lift ``f``; the lift enters through
    the source ``-K^T f`` built from the full transposed rows.
    """
    g = coeffs.grid
    opl, opr = coeffs.operators(check_peclet)
    fl, fr = lift_functions(g)
    out = []
    for op, f in ((opl, fl), (opr, fr)):
        src = -np.stack([op.transpose_full(n, f) for n in range(op.n_time)])
        nodal, chi = op.backward(-f[1:-1], src)
        # interior terminal slice is zero; the interface node stays at 1
        out.append((_pad(nodal) + f, _pad(chi) + f))
    (psi, psi_c), (zeta, zeta_c) = out
    return AugmentedAdjointPair(psi, zeta, psi_c, zeta_c)


def solve_adjoint_terminal(coeffs: OperatorCoefficients, terminal, source=None, check_peclet=True):
    """Backward transposed recursion from terminal data ``(phi_T, vphi_T)``.

    ``source`` (optional, a pair of cell arrays on full nodes) adds a forcing
    to the adjoint equations.
    """
    g = coeffs.grid
    opl, opr = coeffs.operators(check_peclet)
    phiT = _check_init(terminal[0], g.n_left + 2, "phi_T")
    vphiT = _check_init(terminal[1], g.n_right + 2, "vphi_T")
    sl = None if source is None else np.asarray(source[0])[:, 1:-1]
    sr = None if source is None else np.asarray(source[1])[:, 1:-1]
    a, ac = opl.backward(phiT[1:-1], sl)
    b, bc = opr.backward(vphiT[1:-1], sr)
    return AdjointFieldPair(_pad(a), _pad(b), _pad(ac), _pad(bc))


def boundary_trace(field: FieldPair, side: str, grid: RefGrid, diffusivity: float):
    """``d p_xi(ell_0, t)`` from the one-sided 3-point stencil, per time node."""
    if min(grid.n_left, grid.n_right) < 4:
        raise ConfigError("boundary_trace needs n_left, n_right >= 4")
    if side == "left":
        p, h = field.p, grid.h_left
        deriv = (3 * p[:, -1] - 4 * p[:, -2] + p[:, -3]) / (2 * h)
    elif side == "right":
        q, h = field.q, grid.h_right
        deriv = (-3 * q[:, 0] + 4 * q[:, 1] - q[:, 2]) / (2 * h)
    else:
        raise ConfigError(f"side must be 'left' or 'right', got {side!r}")
    return diffusivity * deriv


@dataclass(frozen=True)
class InterfaceFunctional:
    times: np.ndarray
    ell: np.ndarray
    theta: np.ndarray  # rate d_r q_xi - d_l p_xi, the derivative of ell

    def path(self) -> InterfacePath:
        return InterfacePath.from_values(self.times, self.ell)


def interface_functional(trace_l, trace_r, ell_0, dt) -> InterfaceFunctional:
    """Cumulative trapezoid of the nodal flux jump, starting at ``ell_0``."""
    rate = np.asarray(trace_r, dtype=float) - np.asarray(trace_l, dtype=float)
    ell = np.empty_like(rate)
    ell[0] = ell_0
    ell[1:] = ell_0 + np.cumsum(0.5 * dt * (rate[1:] + rate[:-1]))
    times = dt * np.arange(rate.size)
    return InterfaceFunctional(times, ell, rate)


def interface_from_fluxes(flux_l, flux_r, ell_start, dt, t0=0.0) -> InterfaceFunctional:
    """Interface path from the consistent cell fluxes (piecewise linear in time).

    ``theta`` is reported at the nodes as the average of the adjacent cells.
    """
    rate_c = np.asarray(flux_r) - np.asarray(flux_l)
    ell = np.concatenate([[ell_start], ell_start + dt * np.cumsum(rate_c)])
    node_rate = np.empty(ell.size)
    node_rate[1:-1] = 0.5 * (rate_c[1:] + rate_c[:-1])
    node_rate[0], node_rate[-1] = rate_c[0], rate_c[-1]
    times = t0 + dt * np.arange(ell.size)
    return InterfaceFunctional(times, ell, node_rate)


def space_inner(a, b, h):
    """Discrete ``L^2`` inner product over the trailing node axis (boundaries are zero-weighted)."""
    return h * np.sum(a[..., 1:-1] * b[..., 1:-1], axis=-1)


def space_norm(a, h):
    return np.sqrt(space_inner(a, a, h))


def window_inner(a, b, mask, h, dt):
    """Space-time inner product of cell-valued fields over ``mask x (0, T)``."""
    return float(dt * h * np.sum(a[:, mask] * b[:, mask]))
