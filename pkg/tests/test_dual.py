import numpy as np
import pytest

from stefan_control.dual import (
    DualProblem,
    OptimizerConfig,
    TerminalData,
    apply_projector,
    compute_beta,
    frozen_path_problem,
    minimize_J,
    observability_ratio,
    probe_observability,
    probe_paths,
    random_terminal_data,
    solve_dual_direct,
    solve_linear_control,
)
from stefan_control.errors import ConfigError, DegenerateObservabilityError, OptimizationError
from stefan_control.grid import InterfacePath, RefGrid
from stefan_control.parabolic import (
    assemble_coefficients,
    boundary_trace,
    space_inner,
    window_inner,
)
from stefan_control.studies import flagship_data

from conftest import zero_init


def _straight(grid, ell_T):
    return InterfacePath.from_values(grid.times, grid.ell_0 + (ell_T - grid.ell_0) * grid.times / grid.T)


@pytest.fixture(scope="module")
def setup(geometry, transform, small_grid):
    g = small_grid
    init = flagship_data(g, 0.05, 0.02)
    path = _straight(g, geometry.ell_T)
    prob = frozen_path_problem(transform, g, path, init, geometry.ell_T, 1e-3)
    return g, init, path, prob


def _masks(grid, geometry):
    return grid.window_mask("left", geometry.omega_l), grid.window_mask("right", geometry.omega_r)


# -- terminal data -----------------------------------------------------

def test_terminal_data_rejects_nonzero_ends(small_grid):
    a = np.zeros(small_grid.n_left + 2)
    a[0] = 1.0
    with pytest.raises(ConfigError, match="Dirichlet"):
        TerminalData(a, np.zeros(small_grid.n_right + 2))


def test_terminal_vector_round_trip(small_grid, rng):
    td = random_terminal_data(small_grid, rng)
    back = TerminalData.from_vector(td.to_vector(), small_grid)
    np.testing.assert_array_equal(back.phi_T, td.phi_T)
    np.testing.assert_array_equal(back.vphi_T, td.vphi_T)


# -- projector ---------------------------------------------------------

def test_beta_of_base_is_one(setup):
    _, _, _, prob = setup
    assert compute_beta(prob.ctx.psi, prob.ctx, "left") == pytest.approx(1.0, abs=1e-12)
    assert compute_beta(prob.ctx.zeta, prob.ctx, "right") == pytest.approx(1.0, abs=1e-12)


def test_beta_matches_direct_sum(setup, rng):
    g, _, _, prob = setup
    f = rng.standard_normal(prob.ctx.psi.shape)
    m = prob.ctx.mask_l
    num = g.dt * g.h_left * np.sum((f * prob.ctx.psi)[:, m])
    den = g.dt * g.h_left * np.sum((prob.ctx.psi**2)[:, m])
    assert compute_beta(f, prob.ctx, "left") == pytest.approx(num / den, rel=1e-12)


@pytest.mark.parametrize("side", ["left", "right"])
def test_projector_idempotent_and_orthogonal(setup, rng, side):
    g, _, _, prob = setup
    base, mask, h, _ = prob.ctx.side(side)
    f = rng.standard_normal(base.shape)
    pf = apply_projector(f, prob.ctx, side)
    np.testing.assert_allclose(apply_projector(pf, prob.ctx, side), pf, atol=1e-12)
    chi = rng.standard_normal(base.shape)
    pchi = apply_projector(chi, prob.ctx, side)
    assert abs(window_inner(f - pf, pchi, mask, h, g.dt)) <= 1e-9


def test_bad_side_rejected(setup):
    with pytest.raises(ConfigError, match="side"):
        setup[3].ctx.side("middle")


def test_empty_window_is_degenerate(transform, small_grid, geometry):
    g = small_grid
    coeffs = assemble_coefficients(transform, g, InterfacePath.constant(g))
    ml, mr = _masks(g, geometry)
    with pytest.raises(DegenerateObservabilityError, match="left"):
        DualProblem(coeffs, np.zeros_like(ml), mr, zero_init(g), g.ell_0, 1e-3)


# -- functional --------------------------------------------------------

def test_J_zero_is_zero(setup):
    g, *_, prob = setup
    assert prob.eval_J(TerminalData.zeros(g)) == 0.0


def test_J_scaling_identity(setup, rng):
    g, *_, prob = setup
    td = random_terminal_data(g, rng)
    q, lin, nrm = prob.quadratic_part(td), prob.linear_part(td), td.norm(g)
    for s in (0.3, 2.0, 7.0):
        expected = s * s * q + s * lin + 0.5 * prob.eps * s * nrm
        assert prob.eval_J(td.scaled(s)) == pytest.approx(expected, rel=1e-10)


def test_J_coercive(setup, rng):
    g, *_, prob = setup
    td = random_terminal_data(g, rng)
    growth = [prob.eval_J(td.scaled(s)) / s for s in (10.0, 100.0, 1000.0)]
    assert growth[0] < growth[1] < growth[2]


def test_assembled_matches_matrix_free(setup, rng):
    g, *_, prob = setup
    for _ in range(3):
        td = random_terminal_data(g, rng)
        y = prob.to_scaled(td)
        assert prob.model_value(y) == pytest.approx(prob.eval_J(td), rel=1e-9, abs=1e-14)


def test_gradient_finite_differences(setup, rng):
    g, *_, prob = setup
    td = random_terminal_data(g, rng)
    grad = prob.eval_J_gradient(td)
    for _ in range(3):
        d = random_terminal_data(g, rng)
        d = d.scaled(1.0 / d.norm(g))
        h = 1e-5
        fd = (prob.eval_J(td.axpy(h, d)) - prob.eval_J(td.axpy(-h, d))) / (2 * h)
        assert grad.inner(d, g) == pytest.approx(fd, rel=1e-4)


def test_zero_data_zero_minimizer(transform, small_grid, geometry):
    g = small_grid
    prob = frozen_path_problem(transform, g, InterfacePath.constant(g), zero_init(g), g.ell_0, 1e-3)
    grad = prob.eval_J_gradient(TerminalData.zeros(g))
    assert grad.norm(g) == 0.0
    res = minimize_J(prob)
    assert res.method == "prox-zero"
    assert res.td.norm(g) == 0.0
    ctrl = prob.build_controls(res.td)
    assert not np.any(ctrl.h_l) and not np.any(ctrl.h_r)


def test_minimize_agrees_with_direct(setup):
    _, _, _, prob = setup
    res = minimize_J(prob)
    assert res.converged
    y = solve_dual_direct(prob)
    assert prob.model_value(prob.to_scaled(res.td)) == pytest.approx(prob.model_value(y), rel=1e-8)
    np.testing.assert_allclose(prob.to_scaled(res.td), y, rtol=0, atol=1e-6 * np.linalg.norm(y))


def test_optimization_error_carries_trace(setup):
    with pytest.raises(OptimizationError) as exc:
        minimize_J(setup[3], OptimizerConfig(max_iters=1))
    assert len(exc.value.trace) == 2


# -- controls ----------------------------------------------------------

@pytest.fixture(scope="module")
def linear(setup, transform, geometry):
    g, init, path, prob = setup
    coeffs = assemble_coefficients(transform, g, path)
    ml, mr = _masks(g, geometry)
    return solve_linear_control(coeffs, ml, mr, init, geometry.ell_T, 1e-3)


def test_controls_supported_on_windows(linear):
    c = linear.controls
    assert not np.any(c.h_l[:, ~linear.problem.mask_l])
    assert not np.any(c.h_r[:, ~linear.problem.mask_r])


def test_constraint_identity(linear):
    prob = linear.problem
    assert abs(linear.constraint_value - prob.constraint.M_ell) <= 1e-8


def test_terminal_constraint_reached(linear, geometry):
    assert linear.constraint_error <= 1e-5
    assert linear.interface.ell[-1] == pytest.approx(geometry.ell_T, abs=1e-5)


def test_terminal_norm_within_eps(linear):
    assert linear.terminal_norm <= linear.problem.eps * (1 + 1e-6)


def test_duality_identity_left(linear):
    # iint h_l psi = -<p0, psi(0)> - dt sum of the left interface fluxes
    prob = linear.problem
    g = prob.grid
    lhs = window_inner(linear.controls.h_l, prob.ctx.psi, prob.mask_l, g.h_left, g.dt)
    rhs = -space_inner(prob.init[0], prob.ctx.psi0, g.h_left) - g.dt * np.sum(linear.solution.flux_l)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    # the three-point trace is a consistent approximation of the same flux
    tr = boundary_trace(linear.solution.fields, "left", g, prob.coeffs.diffusivity_l)
    mid = 0.5 * (tr[1:] + tr[:-1])
    assert g.dt * np.sum(mid) == pytest.approx(g.dt * np.sum(linear.solution.flux_l), abs=5e-4)


def test_eps_monotone(setup, transform, geometry):
    g, init, path, _ = setup
    coeffs = assemble_coefficients(transform, g, path)
    ml, mr = _masks(g, geometry)
    norms = [solve_linear_control(coeffs, ml, mr, init, geometry.ell_T, e).terminal_norm
             for e in (1e-1, 1e-2, 1e-3)]
    assert norms[0] >= norms[1] >= norms[2]
    assert norms[2] <= 1e-3


def test_grid_refinement_changes_J_little(geometry, transform):
    vals = []
    for n in (50, 100):
        g = RefGrid.from_geometry(geometry, n, n, 2 * n)
        prob = frozen_path_problem(transform, g, _straight(g, geometry.ell_T), flagship_data(g, 0.05, 0.02),
                                   geometry.ell_T, 1e-3)
        vals.append(minimize_J(prob).J)
    assert abs(vals[0] - vals[1]) <= 0.1 * abs(vals[1])


# -- observability -----------------------------------------------------

def test_observability_zero_data(setup):
    g, *_, prob = setup
    assert observability_ratio(prob, TerminalData.zeros(g)) == 0.0


def test_observability_probe_is_finite_and_matches_pde_route(setup):
    g, *_, prob = setup
    stats = probe_observability(prob, 5, np.random.default_rng(3))
    assert np.all(np.isfinite(stats.ratios)) and np.all(stats.ratios > 0)
    rng = np.random.default_rng(3)
    direct = [observability_ratio(prob, random_terminal_data(g, rng)) for _ in range(5)]
    np.testing.assert_allclose(stats.ratios, direct, rtol=1e-8)
    assert stats.window_norm_sum > 0


def test_probe_paths(small_grid, geometry):
    paths = probe_paths(small_grid, geometry, n_paths=5)
    assert len(paths) == 5
    assert all(p.ell[0] == small_grid.ell_0 for p in paths)
    with pytest.raises(ConfigError):
        probe_paths(small_grid, geometry, n_paths=8)
