"""Independent reference computations used by the test suite.

Nothing here goes through the flattening transform: the front-tracking
solver works in physical coordinates on grids that are stretched with the
interface each step.
"""

import numpy as np
from scipy.linalg import solve_banded


def _implicit_heat(u, d, h, dt):
    n = u.size - 2
    r = d * dt / h**2
    ab = np.zeros((3, n))
    ab[0, 1:] = -r
    ab[1, :] = 1 + 2 * r
    ab[2, :-1] = -r
    out = np.zeros_like(u)
    out[1:-1] = solve_banded((1, 1), ab, u[1:-1])
    return out


def _edge_slope(u, h, side):
    # second-order one-sided derivative at the interface node
    if side == "left":  # interface is the last node
        return (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    return (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)


def front_tracking(x_left, u0, x_right, v0, ell_0, L, d_l, d_r, T, n_nodes=800, n_steps=1600):
    """Stretched-grid front tracking for the uncontrolled two-phase problem.

    Each step: explicit interface update from one-sided fluxes, linear remap
    of both phases onto the new uniform grids, then one implicit Euler step.
    Returns ``(times, ell)``.
    """
    s = np.linspace(0.0, 1.0, n_nodes + 1)
    u = np.interp(s * ell_0, x_left, u0)
    v = np.interp(ell_0 + s * (L - ell_0), x_right, v0)
    u[[0, -1]] = 0.0
    v[[0, -1]] = 0.0
    dt = T / n_steps
    ell = ell_0
    out = [ell]
    for _ in range(n_steps):
        hl = ell / n_nodes
        hr = (L - ell) / n_nodes
        flux = d_l * _edge_slope(u, hl, "left") - d_r * _edge_slope(v, hr, "right")
        new = ell - dt * flux
        u = np.interp(s * new, s * ell, u)
        v = np.interp(new + s * (L - new), ell + s * (L - ell), v)
        u[[0, -1]] = 0.0
        v[[0, -1]] = 0.0
        ell = new
        u = _implicit_heat(u, d_l, ell / n_nodes, dt)
        v = _implicit_heat(v, d_r, (L - ell) / n_nodes, dt)
        out.append(ell)
    return np.linspace(0.0, T, n_steps + 1), np.array(out)


def manufactured_error(transform, geometry, n, amplitude=0.03):
    """Space-time L2 error of the transformed solver against an exact solution.

    The interface path is prescribed, the exact fields are separable sine
    modes times ``exp(-t)``, and the residual is fed back as a source.
    """
    from stefan_control.grid import InterfacePath, RefGrid
    from stefan_control.parabolic import ControlPair, assemble_coefficients, solve_forward, space_inner

    grid = RefGrid.from_geometry(geometry, n - 1, n - 1, n)
    path = InterfacePath.from_values(grid.times, geometry.ell_0 + amplitude * np.sin(np.pi * grid.times))
    c = assemble_coefficients(transform, grid, path)
    tc = grid.cell_times(0.5)[:, None]
    l0, L = geometry.ell_0, geometry.L
    kl, kr = np.pi / l0, np.pi / (L - l0)
    xl, xr = grid.xi_left[None], grid.xi_right[None]

    def ps(x, t):
        return np.sin(kl * x) * np.exp(-t)

    def qs(x, t):
        return np.sin(kr * (x - l0)) * np.exp(-t)

    fl = -ps(xl, tc) + c.d_l * kl**2 * ps(xl, tc) + c.b_l * kl * np.cos(kl * xl) * np.exp(-tc)
    fr = -qs(xr, tc) + c.d_r * kr**2 * qs(xr, tc) + c.b_r * kr * np.cos(kr * (xr - l0)) * np.exp(-tc)
    p0, q0 = ps(grid.xi_left, 0.0), qs(grid.xi_right, 0.0)
    p0[[0, -1]] = 0.0
    q0[[0, -1]] = 0.0
    sol = solve_forward(c, ControlPair(fl, fr), (p0, q0))
    t = grid.times[:, None]
    ep = sol.fields.p - ps(xl, t)
    eq = sol.fields.q - qs(xr, t)
    tot = space_inner(ep, ep, grid.h_left) + space_inner(eq, eq, grid.h_right)
    return float(np.sqrt(grid.dt * np.sum(tot)))
