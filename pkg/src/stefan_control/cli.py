"""Command-line entry point: ``stefan-control <command> [--config PATH] ...``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .coupled import (
    data_size,
    eps_limit_study,
    negative_result_experiment,
    solve_control_problem,
    theta_regularity,
)
from .dual import frozen_path_problem, minimize_J, probe_observability, probe_paths
from .errors import ConfigError, StefanControlError
from .forward import simulate_free_boundary, stefan_residual, stefan_residual_series
from .geometry import Transform
from .grid import InterfacePath
from .io import ResultBundle, read_csv, write_csv
from .parabolic import boundary_trace, interface_from_fluxes, solve_forward, space_inner

log = logging.getLogger("stefan_control")

COMMANDS = ("simulate", "control", "fixed-point", "eps-study", "negative-demo", "observability-probe")


def _terminal_norm(grid, fields):
    return float(np.sqrt(space_inner(fields.p[-1], fields.p[-1], grid.h_left)
                         + space_inner(fields.q[-1], fields.q[-1], grid.h_right)))


def _write_fields(bundle, grid, times, fields, prefix=""):
    bundle.matrix(f"{prefix}p.csv", times, fields.p, grid.xi_left)
    bundle.matrix(f"{prefix}q.csv", times, fields.q, grid.xi_right)


def _write_path(bundle, path: InterfacePath, name="interface.csv"):
    bundle.csv(name, ["t", "ell", "ell_prime"], [path.times, path.ell, path.ell_prime])


def run_simulate(cfg: RunConfig, bundle: ResultBundle):
    grid = cfg.ref_grid()
    tr = Transform(cfg.geometry, cfg.grid.quad_order)
    init = cfg.initial_data(grid)
    sim = simulate_free_boundary(tr, grid, init, None, cfg.fixed_point_config())
    _write_path(bundle, sim.path)
    _write_fields(bundle, grid, grid.times, sim.fields)
    bundle.log("fixed_point.log", [r.line() for r in sim.history])
    bundle.csv("residuals.csv", ["iter", "residual"],
               [np.arange(1, len(sim.history) + 1), [r.residual for r in sim.history]])
    bundle.npz("fields.npz", t=grid.times, ell=sim.path.ell, p=sim.fields.p, q=sim.fields.q,
               xi_left=grid.xi_left, xi_right=grid.xi_right)
    tl = boundary_trace(sim.fields, "left", grid, cfg.geometry.d_l)
    trr = boundary_trace(sim.fields, "right", grid, cfg.geometry.d_r)
    bundle.csv("stefan_residual.csv", ["t", "residual"], [grid.times, stefan_residual_series(sim.path, tl, trr)])
    bundle.metric(iterations=sim.iterations, stefan_residual=stefan_residual(sim.path, tl, trr),
                  ell_T_attained=float(sim.path.ell[-1]), segments=[list(s) for s in sim.segments],
                  terminal_norm=_terminal_norm(grid, sim.fields))


def run_control(cfg: RunConfig, bundle: ResultBundle):
    grid = cfg.ref_grid()
    tr = Transform(cfg.geometry, cfg.grid.quad_order)
    init = cfg.initial_data(grid)
    path = InterfacePath.straight_line(grid, cfg.geometry.ell_T)
    prob = frozen_path_problem(tr, grid, path, init, cfg.geometry.ell_T, cfg.eps, cfg.scheme)
    res = minimize_J(prob, cfg.optimizer)
    controls = prob.build_controls(res.td)
    sol = solve_forward(prob.coeffs, controls, prob.init)

    fun = interface_from_fluxes(sol.flux_l, sol.flux_r, grid.ell_0, grid.dt)
    bundle.csv("interface.csv", ["t", "ell", "theta"], [fun.times, fun.ell, fun.theta])
    _write_fields(bundle, grid, grid.times, sol.fields)
    ct = grid.cell_times(prob.coeffs.theta)
    bundle.matrix("h_l.csv", ct, controls.h_l, grid.xi_left)
    bundle.matrix("h_r.csv", ct, controls.h_r, grid.xi_right)
    bundle.log("optimization.log", res.trace_lines())
    bundle.csv("optimization.csv", ["iter", "J", "gradnorm", "step"], list(zip(*res.trace)) if res.trace else [[], [], [], []])
    bundle.metric(J=res.J, grad_norm=res.grad_norm, cg_iterations=res.iterations, method=res.method,
                  terminal_norm=_terminal_norm(grid, sol.fields), interface_error=abs(fun.ell[-1] - cfg.geometry.ell_T),
                  constraint_defect=prob.constraint_pairing(controls) - prob.constraint.M_ell,
                  M_ell=prob.constraint.M_ell, control_norm=prob.control_norm(controls))


def run_fixed_point(cfg: RunConfig, bundle: ResultBundle):
    grid = cfg.ref_grid()
    tr = Transform(cfg.geometry, cfg.grid.quad_order)
    init = cfg.initial_data(grid)
    traj, rep = solve_control_problem(tr, grid, init, cfg.geometry.ell_T, cfg.eps, cfg.loop_config())
    _write_path(bundle, traj.path)
    _write_fields(bundle, grid, grid.times, traj.fields)
    ct = grid.cell_times(traj.linear.problem.coeffs.theta)
    bundle.matrix("h_l.csv", ct, traj.controls.h_l, grid.xi_left)
    bundle.matrix("h_r.csv", ct, traj.controls.h_r, grid.xi_right)
    bundle.log("fixed_point.log", rep.lines())
    bundle.csv("residuals.csv", ["iter", "residual"], [np.arange(1, rep.iterations + 1), rep.residuals])
    tl = boundary_trace(traj.fields, "left", grid, cfg.geometry.d_l)
    trr = boundary_trace(traj.fields, "right", grid, cfg.geometry.d_r)
    bundle.csv("stefan_residual.csv", ["t", "residual"], [grid.times, stefan_residual_series(traj.path, tl, trr)])
    opt = traj.linear.optimization
    bundle.csv("optimization.csv", ["iter", "J", "gradnorm", "step"], list(zip(*opt.trace)))
    c0, hol = theta_regularity(traj.theta, grid.dt)
    bundle.metric(iterations=rep.iterations, converged=rep.converged, residual=rep.residuals[-1],
                  terminal_norm=traj.terminal_norm, eps=cfg.eps, terminal_within_eps=traj.terminal_norm <= cfg.eps,
                  interface_error=traj.interface_error, stefan_residual=traj.stefan_residual,
                  control_norm=traj.control_norm, data_size=data_size(grid, init, cfg.geometry.ell_T),
                  theta_c0=c0, theta_holder=hol, monotone_tail=rep.monotone_tail, warnings=rep.warnings,
                  derivative_violations=rep.derivative_violations)


def run_eps_study(cfg: RunConfig, bundle: ResultBundle):
    grid = cfg.ref_grid()
    tr = Transform(cfg.geometry, cfg.grid.quad_order)
    init = cfg.initial_data(grid)
    rep = eps_limit_study(tr, grid, init, cfg.geometry.ell_T, cfg.eps_study.ladder, cfg.loop_config())
    rows = rep.rungs
    bundle.csv("eps_study.csv", ["eps", "ok", "terminal_norm", "control_norm", "interface_error", "iterations"],
               [[r.eps for r in rows], [float(r.ok) for r in rows], [r.terminal_norm for r in rows],
                [r.control_norm for r in rows], [r.interface_error for r in rows], [r.iterations for r in rows]])
    bundle.csv("eps_distances.csv", ["rung", "c1_distance"], [np.arange(len(rep.distances)), rep.distances])
    bundle.metric(partial=rep.partial, control_norm_spread=rep.control_norm_spread,
                  distances_decreasing=rep.distances_decreasing,
                  errors=[r.error for r in rows if not r.ok])


def run_negative(cfg: RunConfig, bundle: ResultBundle):
    grid = cfg.ref_grid()
    tr = Transform(cfg.geometry, cfg.grid.quad_order)
    init = cfg.initial_data(grid)
    mask = grid.window_mask("left", cfg.geometry.omega_l)
    fp = dataclasses.replace(cfg.fixed_point, scheme="backward-euler")
    rows = []
    for amp in cfg.negative.h_l_amplitudes:
        hl = np.zeros((grid.n_time, grid.n_left + 2))
        hl[:, mask] = amp
        rep = negative_result_experiment(tr, grid, init, hl, fp)
        rows.append((amp, rep))
    bundle.csv("negative.csv", ["h_l_amplitude", "q_min", "q_max", "terminal_norm", "floor", "floor_slowest", "floor_conservative", "sign_ok", "positive_ok"],
               [[a for a, _ in rows], [r.q_min for _, r in rows], [r.q_max for _, r in rows],
                [r.terminal_norm for _, r in rows], [r.floor for _, r in rows], [r.floor_slowest for _, r in rows], [r.floor_conservative for _, r in rows],
                [float(r.sign_ok) for _, r in rows], [float(r.positive_ok) for _, r in rows]])
    bundle.metric(sign_ok=all(r.sign_ok for _, r in rows), positive_ok=all(r.positive_ok for _, r in rows),
                  terminal_norms=[r.terminal_norm for _, r in rows], floors=[r.floor for _, r in rows])


def run_probe(cfg: RunConfig, bundle: ResultBundle):
    grid = cfg.ref_grid()
    tr = Transform(cfg.geometry, cfg.grid.quad_order)
    init = cfg.initial_data(grid)
    rng = np.random.default_rng(cfg.seed)
    paths = probe_paths(grid, cfg.geometry, cfg.probe.amplitude, cfg.probe.n_paths)
    maxima, medians, wn = [], [], []
    for path in paths:
        prob = frozen_path_problem(tr, grid, path, init, cfg.geometry.ell_T, cfg.eps, cfg.scheme)
        st = probe_observability(prob, cfg.probe.n_samples, rng)
        maxima.append(st.max)
        medians.append(st.median)
        wn.append(st.window_norm_sum)
    bundle.csv("observability.csv", ["path", "ratio_max", "ratio_median", "window_norm_sum"],
               [np.arange(len(paths)), maxima, medians, wn])
    bundle.metric(ratio_max=max(maxima), window_norm_min=min(wn))


RUNNERS = {
    "simulate": run_simulate,
    "control": run_control,
    "fixed-point": run_fixed_point,
    "eps-study": run_eps_study,
    "negative-demo": run_negative,
    "observability-probe": run_probe,
}


def dispatch(command: str, cfg: RunConfig, out_dir=None) -> tuple[int, Path]:
    """Run ``command`` and write a result bundle; returns ``(exit_code, bundle_dir)``."""
    if command not in RUNNERS:
        raise ConfigError(f"unknown command {command!r}")
    out = Path(out_dir or cfg.output_dir)
    bundle = ResultBundle(out, command, cfg.to_dict())
    try:
        RUNNERS[command](cfg, bundle)
    except StefanControlError as exc:
        log.error("%s failed: %s", command, exc)
        bundle.finish(exc.exit_code, exc)
        return exc.exit_code, out
    bundle.finish(0)
    return 0, out


def emit_plot_data(bundle_dir) -> list[Path]:
    """Long-format CSVs for plotting, written to ``<bundle>/plot``."""
    src = Path(bundle_dir)
    out = src / "plot"
    out.mkdir(exist_ok=True)
    written = []

    def load(name):
        p = src / name
        return read_csv(p) if p.exists() else (None, np.zeros((0, 0)))

    _, iface = load("interface.csv")
    cols = [iface[:, 0], iface[:, 1]] if iface.size else [[], []]
    written.append(write_csv(out / "interface_long.csv", ["t", "ell"], cols))
    _, res = load("residuals.csv")
    cols = [res[:, 0], res[:, 1]] if res.size else [[], []]
    written.append(write_csv(out / "residual_long.csv", ["iter", "residual"], cols))
    _, sr = load("stefan_residual.csv")
    cols = [sr[:, 0], sr[:, 1]] if sr.size else [[], []]
    written.append(write_csv(out / "stefan_residual_long.csv", ["t", "residual"], cols))
    for name in ("p", "q"):
        header, m = load(f"{name}.csv")
        if m.size:
            coords = np.array([float(h.split("=")[1]) for h in header[1:]])
            t = np.repeat(m[:, 0], coords.size)
            xi = np.tile(coords, m.shape[0])
            cols = [xi, t, m[:, 1:].ravel()]
        else:
            cols = [[], [], []]
        written.append(write_csv(out / f"heatmap_{name}.csv", ["xi", "t", "value"], cols))
    _, opt = load("optimization.csv")
    cols = [opt[:, 0], opt[:, 1], opt[:, 2]] if opt.size else [[], [], []]
    written.append(write_csv(out / "optimization_long.csv", ["iter", "J", "gradnorm"], cols))
    return written


def build_parser():
    ap = argparse.ArgumentParser(prog="stefan-control", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="TOML or JSON run config")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--scheme", choices=["crank-nicolson", "backward-euler"], default=None)
        p.add_argument("--eps", type=float, default=None)
        p.add_argument("--plot-data", action="store_true", help="also emit long-format plot CSVs")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        over = {}
        if args.seed is not None:
            over["seed"] = args.seed
        if args.scheme is not None:
            over["scheme"] = args.scheme
        if args.eps is not None:
            over["eps"] = args.eps
        if over:
            cfg = dataclasses.replace(cfg, **over)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        if args.out is not None:
            bundle = ResultBundle(args.out, args.command, {})
            bundle.finish(exc.exit_code, exc)
        return exc.exit_code
    code, out = dispatch(args.command, cfg, args.out)
    if code == 0 and args.plot_data:
        emit_plot_data(out)
    print(f"{args.command}: exit {code}, bundle at {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
