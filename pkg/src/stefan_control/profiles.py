"""Named initial-data profiles on the reference subgrids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .grid import RefGrid

PROFILES = ("zero", "bump", "sine", "tent")


@dataclass(frozen=True)
class ProfileSpec:
    """One phase's initial data.

    ``support`` is given as fractions of the phase interval; ``h1_norm``, when
    set, rescales the profile so its discrete ``H^1`` norm equals that value
    (the sign of ``amplitude`` is kept).
    """

    kind: str = "zero"
    amplitude: float = 0.0
    support: tuple[float, float] = (0.2, 0.8)
    mode: int = 1
    h1_norm: float | None = None

    def __post_init__(self):
        if self.kind not in PROFILES:
            raise ConfigError(f"unknown profile {self.kind!r}; expected one of {PROFILES}")
        a, b = self.support
        if not 0.0 <= a < b <= 1.0:
            raise ConfigError("profile support must satisfy 0 <= a < b <= 1")
        if self.mode < 1:
            raise ConfigError("profile mode must be >= 1")
        if self.h1_norm is not None and self.h1_norm < 0:
            raise ConfigError("h1_norm must be non-negative")


def h1_norm(values, h) -> float:
    """``sqrt(||f||^2 + ||f'||^2)`` with trapezoid values and forward differences."""
    v = np.asarray(values, dtype=float)
    l2 = h * (np.sum(v**2) - 0.5 * (v[0] ** 2 + v[-1] ** 2))
    dv = np.diff(v) / h
    return float(np.sqrt(l2 + h * np.sum(dv**2)))


def _shape(kind, s, support, mode):
    a, b = support
    r = (s - a) / (b - a)
    inside = (r > 0) & (r < 1)
    out = np.zeros_like(s)
    if kind == "bump":
        z = 2 * r[inside] - 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - z**2))
    elif kind == "sine":
        out[inside] = np.sin(mode * np.pi * r[inside])
    elif kind == "tent":
        out[inside] = 1.0 - np.abs(2 * r[inside] - 1)
    return out


def evaluate_profile(spec: ProfileSpec, xi, a, b) -> np.ndarray:
    """Profile on nodes ``xi`` of the interval ``(a, b)``, zero at both ends."""
    xi = np.asarray(xi, dtype=float)
    if spec.kind == "zero":
        return np.zeros_like(xi)
    s = (xi - a) / (b - a)
    out = _shape(spec.kind, s, spec.support, spec.mode)
    out[0] = out[-1] = 0.0
    if spec.h1_norm is not None:
        n = h1_norm(out, xi[1] - xi[0])
        sign = -1.0 if spec.amplitude < 0 else 1.0
        return out * (sign * spec.h1_norm / n) if n > 0 else out
    return spec.amplitude * out


def initial_data(grid: RefGrid, left: ProfileSpec, right: ProfileSpec):
    p0 = evaluate_profile(left, grid.xi_left, 0.0, grid.ell_0)
    q0 = evaluate_profile(right, grid.xi_right, grid.ell_0, grid.L)
    return p0, q0
