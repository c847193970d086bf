"""Serialization of results: CSV artifacts, binary dumps and the run manifest.

CSV files use a single header line and ``%.17g`` formatting so identical runs
produce byte-identical files.  Field matrices are written one row per time
step with the time in the first column.
"""

from __future__ import annotations

import json
import platform
import time
from pathlib import Path

import numpy as np

FMT = "%.17g"


def write_csv(path, header, columns):
    """Write equal-length columns (possibly empty) under a comma-separated header."""
    path = Path(path)
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    with path.open("w") as fh:
        fh.write(",".join(header) + "\n")
        if cols and cols[0].size:
            np.savetxt(fh, np.column_stack(cols), fmt=FMT, delimiter=",")
    return path


def write_matrix_csv(path, times, matrix, coords, coord_name="xi"):
    """Field matrix with one row per time step: ``t, value@coord_0, ...``."""
    path = Path(path)
    header = ["t"] + [f"{coord_name}={c:.17g}" for c in coords]
    with path.open("w") as fh:
        fh.write(",".join(header) + "\n")
        m = np.asarray(matrix, dtype=float)
        if m.size:
            np.savetxt(fh, np.column_stack([np.asarray(times, dtype=float), m]), fmt=FMT, delimiter=",")
    return path


def read_csv(path):
    """Return ``(header, data)``; ``data`` has shape (rows, columns)."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        rest = fh.read()
    if not rest.strip():
        return header, np.zeros((0, len(header)))
    data = np.loadtxt(rest.splitlines(), delimiter=",", ndmin=2)
    return header, data


def save_npz(path, **arrays):
    np.savez(path, **{k: np.asarray(v) for k, v in arrays.items()})
    return Path(path)


def load_npz(path):
    with np.load(path) as data:
        return {k: np.array(data[k]) for k in data.files}


def versions():
    import scipy

    from . import __version__

    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "stefan_control": __version__}


class ResultBundle:
    """Output directory with CSV artifacts, logs and a JSON manifest."""

    def __init__(self, out_dir, command: str, config_echo: dict):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.manifest = {
            "command": command,
            "config": config_echo,
            "versions": versions(),
            "status": "running",
            "exit_code": None,
            "error": None,
            "metrics": {},
            "artifacts": [],
            "timings": {},
        }
        self._t0 = time.perf_counter()

    def path(self, name) -> Path:
        return self.dir / name

    def record(self, name):
        name = str(name)
        if name not in self.manifest["artifacts"]:
            self.manifest["artifacts"].append(name)

    def csv(self, name, header, columns):
        write_csv(self.path(name), header, columns)
        self.record(name)

    def matrix(self, name, times, matrix, coords, coord_name="xi"):
        write_matrix_csv(self.path(name), times, matrix, coords, coord_name)
        self.record(name)

    def npz(self, name, **arrays):
        save_npz(self.path(name), **arrays)
        self.record(name)

    def log(self, name, lines):
        self.path(name).write_text("".join(f"{line}\n" for line in lines))
        self.record(name)

    def metric(self, **kv):
        self.manifest["metrics"].update({k: _jsonable(v) for k, v in kv.items()})

    def finish(self, exit_code: int, error: BaseException | None = None):
        self.manifest["exit_code"] = int(exit_code)
        self.manifest["status"] = "ok" if exit_code == 0 else "failed"
        if error is not None:
            self.manifest["error"] = {"type": type(error).__name__, "message": str(error)}
            hist = getattr(error, "history", None) or getattr(error, "trace", None)
            if hist:
                self.manifest["error"]["history"] = _jsonable(list(hist))
        self.manifest["timings"]["wall_seconds"] = time.perf_counter() - self._t0
        self.path("manifest.json").write_text(json.dumps(self.manifest, sort_keys=True, indent=2) + "\n")
        return self.path("manifest.json")


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and not np.isfinite(v):
        return str(v)
    return v
