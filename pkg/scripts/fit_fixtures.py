#!/usr/bin/env python3
"""Fit the empirical constants used by the test suite and freeze them.

Writes ``tests/fixtures/fitted_constants.json`` and the golden config echo.
Re-run only when a numerical change is intended; the tests treat these
files as regression baselines.

    python scripts/fit_fixtures.py [--only control_bound,observability,...]
"""

import argparse
import json
import time
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

from stefan_control.config import load_config
from stefan_control.coupled import solve_control_problem, theta_regularity
from stefan_control.dual import frozen_path_problem, probe_observability, probe_paths
from stefan_control.geometry import GeometryConfig, Transform
from stefan_control.grid import RefGrid
from stefan_control.studies import (
    coefficient_norms,
    control_bound_sweep,
    flagship_data,
    random_paths,
    sweep_points,
)

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "tests" / "fixtures"
SEED = 20240601


def fit_control_bound(tr, grid):
    pts = control_bound_sweep(tr, grid, sweep_points(grid.ell_0))
    d = np.array([p.data_size for p in pts])
    h = np.array([p.control_norm for p in pts])
    c = float(d @ h / (d @ d))  # least squares through the origin
    c0 = np.array([p.theta_c0 for p in pts]) / d
    hol = np.array([p.theta_holder for p in pts]) / d
    return {
        "C": c,
        "ratios": [p.ratio for p in pts],
        "theta_c0_constant": float(c0.max()),
        "theta_holder_constant": float(hol.max()),
        "iterations": [p.iterations for p in pts],
    }


def fit_coefficient_bound(tr, grid, geo, n=30):
    rng = np.random.default_rng(SEED)
    ks, bs = zip(*(coefficient_norms(tr, grid, p) for p in random_paths(grid, geo, rng, n)))
    ks, bs = np.array(ks), np.array(bs)
    # tightest (on average) line K1*K + K2*T lying above every sample
    res = linprog([ks.mean(), grid.T], A_ub=-np.c_[ks, np.full_like(ks, grid.T)], b_ub=-bs,
                  bounds=[(0, None), (0, None)])
    k1, k2 = res.x
    return {"K1": float(k1), "K2": float(k2), "n_paths": n, "seed": SEED}


def fit_observability(tr, grid, geo):
    init = (np.zeros(grid.n_left + 2), np.zeros(grid.n_right + 2))
    maxima, norms = [], []
    for path in probe_paths(grid, geo):
        prob = frozen_path_problem(tr, grid, path, init, geo.ell_T, 1e-3)
        st = probe_observability(prob, 100, np.random.default_rng(0))
        maxima.append(st.max)
        norms.append(st.window_norm_sum)
    return {"ratio_max": maxima, "window_norm_min": float(min(norms)), "C0_floor": 0.5 * float(min(norms))}


def fit_flagship(tr, grid, geo):
    init = flagship_data(grid)
    traj, rep = solve_control_problem(tr, grid, init, geo.ell_T, 1e-3)
    c0, hol = theta_regularity(traj.theta, grid.dt)
    return {
        "iterations": rep.iterations,
        "residuals": [float(r) for r in rep.residuals],
        "terminal_norm": traj.terminal_norm,
        "control_norm": traj.control_norm,
        "stefan_residual": traj.stefan_residual,
        "theta_c0": c0,
        "theta_holder": hol,
    }


def write_golden():
    cfg = load_config(FIXTURES / "golden_config.toml")
    (FIXTURES / "golden_echo.json").write_text(cfg.echo())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", default="", help="comma-separated subset of fixture groups")
    args = ap.parse_args()
    geo = GeometryConfig()
    tr = Transform(geo)
    grid = RefGrid.from_geometry(geo)
    jobs = {
        "flagship": lambda: fit_flagship(tr, grid, geo),
        "control_bound": lambda: fit_control_bound(tr, grid),
        "coefficient_bound": lambda: fit_coefficient_bound(tr, grid, geo),
        "observability": lambda: fit_observability(tr, grid, geo),
    }
    wanted = [j for j in args.only.split(",") if j] or list(jobs)
    path = FIXTURES / "fitted_constants.json"
    data = json.loads(path.read_text()) if path.exists() else {}
    for name in wanted:
        t0 = time.perf_counter()
        data[name] = jobs[name]()
        print(f"{name}: {time.perf_counter() - t0:.1f} s")
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    write_golden()
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
