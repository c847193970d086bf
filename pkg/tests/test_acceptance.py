"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Runs at the default grid (200/200/400) unless a criterion prescribes otherwise.
"""

import numpy as np
import pytest

from stefan_control.config import NegativeSpec
from stefan_control.coupled import negative_result_experiment, solve_control_problem
from stefan_control.dual import (
    _sine_series,
    frozen_path_problem,
    minimize_J,
    probe_observability,
    probe_paths,
    random_terminal_data,
)
from stefan_control.forward import (
    FixedPointConfig,
    physical_energy,
    simulate_free_boundary,
)
from stefan_control.grid import InterfacePath, RefGrid
from stefan_control.parabolic import (
    ControlPair,
    assemble_coefficients,
    solve_adjoint_terminal,
    solve_forward,
    space_inner,
)
from stefan_control.profiles import ProfileSpec, initial_data
from stefan_control.studies import control_bound_sweep, flagship_data, sweep_points

from oracles import front_tracking, manufactured_error

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail
    return _report


def _straight(grid, ell_T):
    return InterfacePath.from_values(grid.times, grid.ell_0 + (ell_T - grid.ell_0) * grid.times / grid.T)


def _smooth(grid, rng, side, n_modes=6):
    xi = grid.xi_left if side == "left" else grid.xi_right
    a, b = (0.0, grid.ell_0) if side == "left" else (grid.ell_0, grid.L)
    return _sine_series(xi, a, b, rng.standard_normal(n_modes) / np.arange(1, n_modes + 1) ** 2)


def test_c1_transform_identities(transform, geometry, report):
    lo, hi = geometry.corridor
    y = np.linspace(lo + 1e-4, hi - 1e-4, 100)
    s = transform.sample(y, y)
    eg, ex = float(np.max(np.abs(s.g - geometry.ell_0))), float(np.max(np.abs(s.gx - 1)))
    report(1, eg <= 1e-8 and ex <= 1e-6, f"max|G(y,y)-ell_0| = {eg:.2e}, max|G_x(y,y)-1| = {ex:.2e}")


def test_c2_solver_order(transform, geometry, report):
    ns = [50, 100, 200, 400]
    err = [manufactured_error(transform, geometry, n) for n in ns]
    slopes = [float(np.log2(a / b)) for a, b in zip(err, err[1:])]
    ok = all(abs(s - 2) <= 0.2 for s in slopes)
    report(2, ok, "slopes " + ", ".join(f"{s:.3f}" for s in slopes))


def test_c3_discrete_duality(transform, grid, report):
    rng = np.random.default_rng(2024)
    path = InterfacePath.from_values(grid.times, grid.ell_0 + 0.04 * np.sin(np.pi * grid.times / grid.T))
    worst = 0.0
    for k in range(20):
        c = assemble_coefficients(transform, grid, path, "crank-nicolson" if k % 2 == 0 else "backward-euler")
        init = (_smooth(grid, rng, "left"), _smooth(grid, rng, "right"))
        term = (_smooth(grid, rng, "left"), _smooth(grid, rng, "right"))
        src = ControlPair(rng.standard_normal((grid.n_time, grid.n_left + 2)),
                          rng.standard_normal((grid.n_time, grid.n_right + 2)))
        asrc = (rng.standard_normal(src.h_l.shape), rng.standard_normal(src.h_r.shape))
        fw = solve_forward(c, src, init)
        bw = solve_adjoint_terminal(c, term, asrc)
        for f, phi, chi, g_, s_, h in ((fw.fields.p, bw.phi, bw.phi_cell, src.h_l, asrc[0], grid.h_left),
                                      (fw.fields.q, bw.vphi, bw.vphi_cell, src.h_r, asrc[1], grid.h_right)):
            ftheta = c.theta * f[1:] + (1 - c.theta) * f[:-1]
            lhs = space_inner(f[-1], phi[-1], h) - space_inner(f[0], phi[0], h)
            rhs = grid.dt * float(np.sum(space_inner(g_, chi, h) - space_inner(ftheta, s_, h)))
            worst = max(worst, abs(lhs - rhs))
    report(3, worst <= 1e-8, f"max summation-by-parts defect {worst:.2e} over 20 draws")


def test_c4_front_tracking(transform, grid, geometry, report):
    worst = 0.0
    for a in (1e-2, 1e-1):
        init = flagship_data(grid, a, 0.5 * a)
        sim = simulate_free_boundary(transform, grid, init)
        t, ell = front_tracking(grid.xi_left, init[0], grid.xi_right, init[1], grid.ell_0, grid.L,
                                geometry.d_l, geometry.d_r, grid.T,
                                n_nodes=4 * (grid.n_left + 1), n_steps=4 * grid.n_time)
        worst = max(worst, float(np.max(np.abs(np.interp(grid.times, t, ell) - sim.path.ell))))
    report(4, worst <= 1e-3, f"max |ell - ell_oracle| = {worst:.2e}")


FIXTURE_SUITE = [
    (ProfileSpec("bump", 1.0, h1_norm=1e-2), ProfileSpec("bump", -1.0, h1_norm=1e-2)),
    (ProfileSpec("bump", 1.0, h1_norm=0.3), ProfileSpec("tent", -0.02)),
    (ProfileSpec("sine", 0.2, support=(0.0, 1.0)), ProfileSpec()),
    (ProfileSpec(), ProfileSpec("sine", -0.1, support=(0.0, 1.0))),
    (ProfileSpec("tent", 0.05, support=(0.1, 0.6)), ProfileSpec("bump", -1.0, support=(0.5, 0.9), h1_norm=0.05)),
]


def test_c5_energy_and_signs(transform, grid, report):
    cfg = FixedPointConfig(scheme="backward-euler")
    rise, pmin, qmax = -np.inf, np.inf, -np.inf
    for left, right in FIXTURE_SUITE:
        sim = simulate_free_boundary(transform, grid, initial_data(grid, left, right), config=cfg)
        e = physical_energy(transform, grid, sim.fields, sim.path)
        rise = max(rise, float(np.max(np.diff(e))))
        pmin, qmax = min(pmin, float(sim.fields.p.min())), max(qmax, float(sim.fields.q.max()))
    ok = rise <= 1e-10 and pmin >= -1e-12 and qmax <= 1e-12
    report(5, ok, f"max energy increase {rise:.2e}, min u {pmin:.2e}, max v {qmax:.2e}")


def test_c6_gradient(transform, grid, geometry, report):
    rng = np.random.default_rng(6)
    init = flagship_data(grid, 1e-2, 5e-3)
    worst = 0.0
    for path in probe_paths(grid, geometry, n_paths=3):
        prob = frozen_path_problem(transform, grid, path, init, geometry.ell_T, 1e-3)
        td = random_terminal_data(grid, rng)
        grad = prob.eval_J_gradient(td)
        for _ in range(20):
            d = random_terminal_data(grid, rng)
            d = d.scaled(1.0 / d.norm(grid))
            h = 1e-5
            fd = (prob.eval_J(td.axpy(h, d)) - prob.eval_J(td.axpy(-h, d))) / (2 * h)
            an = grad.inner(d, grid)
            worst = max(worst, abs(an - fd) / max(abs(fd), 1e-300))
    report(6, worst <= 1e-4, f"max relative FD mismatch {worst:.2e} over 60 directions")


def test_c7_constraint(transform, grid, geometry, report):
    init = flagship_data(grid, 1e-2, 5e-3)
    ident = term = 0.0
    for path in probe_paths(grid, geometry, n_paths=3):
        prob = frozen_path_problem(transform, grid, path, init, geometry.ell_T, 1e-3)
        res = minimize_J(prob)
        ctrl = prob.build_controls(res.td)
        ident = max(ident, abs(prob.constraint_pairing(ctrl) - prob.constraint.M_ell))
        sol = solve_forward(prob.coeffs, ctrl, init)
        ell_T = grid.ell_0 + grid.dt * float(np.sum(sol.flux_r - sol.flux_l))
        term = max(term, abs(ell_T - geometry.ell_T))
    report(7, ident <= 1e-8 and term <= 1e-5, f"identity defect {ident:.2e}, |L(T) - ell_T| = {term:.2e}")


def test_c8_flagship(transform, grid, geometry, fitted, report):
    traj, rep = solve_control_problem(transform, grid, flagship_data(grid), geometry.ell_T, 1e-3)
    ok = (rep.converged and rep.residuals[-1] <= 1e-6 and rep.iterations <= 50
          and traj.terminal_norm <= 1e-3 and traj.interface_error <= 1e-5 and traj.stefan_residual <= 1e-4)
    ok = ok and rep.iterations == fitted["flagship"]["iterations"]
    report(8, ok, f"{rep.iterations} iterations, residual {rep.residuals[-1]:.2e}, "
                  f"|(p,q)(T)| {traj.terminal_norm:.2e}, |ell(T)-ell_T| {traj.interface_error:.2e}, "
                  f"Stefan residual {traj.stefan_residual:.2e}")


def test_c9_control_bound(transform, grid, fitted, report):
    c = fitted["control_bound"]["C"]
    pts = control_bound_sweep(transform, grid, sweep_points(grid.ell_0))
    r = np.array([p.ratio for p in pts])
    ok = len(pts) == 20 and bool(np.all((r >= 0.5 * c) & (r <= 2 * c)))
    report(9, ok, f"ratios in [{r.min():.3f}, {r.max():.3f}] against C = {c:.3f}")


def test_c10_negative_result(transform, grid, geometry, report):
    init = initial_data(grid, ProfileSpec("sine", 0.1, support=(0.0, 1.0)),
                        ProfileSpec("sine", -0.1, support=(0.0, 1.0)))
    mask = grid.window_mask("left", geometry.omega_l)
    amps = NegativeSpec().h_l_amplitudes
    lines, ok = [], True
    for a in amps:
        h_l = np.where(mask, a, 0.0) * np.ones((grid.n_time, 1))
        rep = negative_result_experiment(transform, grid, init, h_l)
        ok = ok and rep.q_max <= 1e-12 and rep.terminal_norm >= 0.5 * rep.floor
        lines.append(f"h_l={a:g}: |q(T)|/floor={rep.terminal_norm / rep.floor:.3f}")
    ok = ok and len(amps) == 5 and 0.0 in amps
    report(10, ok, "; ".join(lines))


def test_c11_observability(transform, geometry, fitted, report):
    stats = {}
    for n in (200, 400):
        g = RefGrid.from_geometry(geometry, n, n, 2 * n)
        init = (np.zeros(g.n_left + 2), np.zeros(g.n_right + 2))
        maxima, norms = [], []
        for path in probe_paths(g, geometry):
            prob = frozen_path_problem(transform, g, path, init, geometry.ell_T, 1e-3)
            st = probe_observability(prob, 100, np.random.default_rng(0))
            assert np.all(np.isfinite(st.ratios))
            maxima.append(st.max)
            norms.append(st.window_norm_sum)
        stats[n] = (np.array(maxima), min(norms))
    drift = float(np.max(np.abs(stats[400][0] / stats[200][0] - 1)))
    floor = fitted["observability"]["C0_floor"]
    wmin = min(stats[200][1], stats[400][1])
    ok = drift <= 0.2 and wmin > floor
    report(11, ok, f"max-ratio drift {drift:.2%} under refinement, window norm min {wmin:.4f} > {floor:.4f}")
