"""Domain-flattening transform for the two-phase interface problem.

The moving interface ``x = ell(t)`` is mapped onto the fixed reference point
``xi = ell_0`` by ``xi = G(x, ell(t))``, where ``G(., y)`` is a mollified
five-segment piecewise-linear map.  Everything here is a pure function of its
inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, NumericalError

_CHUNK = 4096


@dataclass(frozen=True)
class GeometryConfig:
    """Physical constants, interface corridor and control windows."""

    L: float = 1.0
    d_l: float = 0.1
    d_r: float = 0.1
    ell_l: float = 0.3
    ell_r: float = 0.7
    ell_0: float = 0.5
    ell_T: float = 0.52
    sigma: float = 0.04
    omega_l: tuple[float, float] = (0.1, 0.25)
    omega_r: tuple[float, float] = (0.75, 0.9)
    T: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "omega_l", tuple(float(v) for v in self.omega_l))
        object.__setattr__(self, "omega_r", tuple(float(v) for v in self.omega_r))
        self.validate()

    def validate(self):
        checks = [
            (self.L > 0, "L must be positive"),
            (self.T > 0, "T must be positive"),
            (self.d_l > 0 and self.d_r > 0, "diffusivities d_l, d_r must be positive"),
            (self.sigma > 0, "sigma must be positive"),
            (
                0 < self.ell_l < self.ell_0 < self.ell_r < self.L,
                "corridor ordering: needs 0 < ell_l < ell_0 < ell_r < L",
            ),
            (self.ell_l < self.ell_T < self.ell_r, "target ordering: needs ell_l < ell_T < ell_r"),
            (
                self.sigma < (self.ell_r - self.ell_l) / 4,
                "sigma too large: needs sigma < (ell_r - ell_l)/4",
            ),
            (
                len(self.omega_l) == 2 and 0 < self.omega_l[0] < self.omega_l[1] < self.ell_l,
                "omega_l containment: needs 0 < a < b < ell_l",
            ),
            (
                len(self.omega_r) == 2 and self.ell_r < self.omega_r[0] < self.omega_r[1] < self.L,
                "omega_r containment: needs ell_r < a < b < L",
            ),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        lo, hi = self.corridor
        if not lo < self.ell_0 < hi:
            raise ConfigError("ell_0 outside transform corridor (ell_l + 2 sigma, ell_r - 2 sigma)")
        if not lo < self.ell_T < hi:
            raise ConfigError("ell_T outside transform corridor (ell_l + 2 sigma, ell_r - 2 sigma)")

    @property
    def corridor(self) -> tuple[float, float]:
        """Open interval of interface positions the transform accepts."""
        return (self.ell_l + 2 * self.sigma, self.ell_r - 2 * self.sigma)


@dataclass(frozen=True)
class TransformSample:
    g: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    gxx: np.ndarray


@dataclass(frozen=True)
class MollifierSpec:
    """Even bump ``c exp(-1/(1 - (s/sigma)^2))`` on ``(-sigma, sigma)``.

    ``quad_order`` Gauss-Legendre nodes are used on every smooth panel of a
    convolution; ``c`` is fixed so the same rule integrates the bump to one.
    """

    sigma: float
    quad_order: int = 64
    _nodes: np.ndarray = field(init=False, repr=False, compare=False)
    _weights: np.ndarray = field(init=False, repr=False, compare=False)
    _scale: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.sigma <= 0:
            raise ConfigError("mollifier sigma must be positive")
        if self.quad_order < 16:
            raise ConfigError("quad_order must be at least 16")
        nodes, weights = np.polynomial.legendre.leggauss(self.quad_order)
        object.__setattr__(self, "_nodes", nodes)
        object.__setattr__(self, "_weights", weights)
        mass = self.sigma * np.sum(weights * self._raw(self.sigma * nodes))
        object.__setattr__(self, "_scale", 1.0 / mass)

    def _raw(self, s):
        r2 = (np.asarray(s, dtype=float) / self.sigma) ** 2
        out = np.zeros_like(r2)
        inside = r2 < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
        return out

    def eta(self, s):
        return self._scale * self._raw(s)

    def _eta_nodes(self, s):
        # quadrature nodes lie in [-sigma, sigma]; endpoints map to exp(-inf) = 0
        r2 = (s * (1.0 / self.sigma)) ** 2
        with np.errstate(divide="ignore"):
            return self._scale * np.exp(-1.0 / np.maximum(1.0 - r2, 0.0))

    def eta_prime(self, s):
        s = np.asarray(s, dtype=float)
        r2 = (s / self.sigma) ** 2
        out = np.zeros_like(s)
        inside = r2 < 1.0
        out[inside] = (
            self.eta(s[inside]) * (-2.0 * s[inside] / self.sigma**2) / (1.0 - r2[inside]) ** 2
        )
        return out

    def integrate(self):
        """Quadrature of the bump over ``(-sigma, sigma)`` (should be one)."""
        return float(self.sigma * np.sum(self._weights * self.eta(self.sigma * self._nodes)))


def _broadcast(x, y):
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return x, y


class Transform:
    """``G(x, y)`` and its derivatives for one geometry.

    Parameters
    ----------
    geometry : GeometryConfig
    quad_order : int
        Gauss-Legendre nodes per smooth panel of the convolution.
    """

    def __init__(self, geometry: GeometryConfig, quad_order: int = 64):
        self.geometry = geometry
        self.mollifier = MollifierSpec(geometry.sigma, quad_order)

    # -- piecewise-linear skeleton -------------------------------------

    def check_y(self, y, times=None):
        y = np.asarray(y, dtype=float)
        lo, hi = self.geometry.corridor
        bad = ~((y > lo) & (y < hi))
        if np.any(bad):
            idx = np.flatnonzero(bad.ravel())[0]
            where = ""
            if times is not None:
                where = f" at t={np.asarray(times, dtype=float).ravel()[idx]:.6g}"
            raise DomainError(
                f"interface position {y.ravel()[idx]:.6g}{where} outside admissible corridor "
                f"({lo:.6g}, {hi:.6g})"
            )

    def _pieces(self, y):
        """Kinks ``z1..z4`` and per-piece coefficients, each shaped (..., 5).

        On piece k, ``m = A + B z`` and ``d m / d y = C + D z``.
        """
        g = self.geometry
        s, l0, ll, lr = g.sigma, g.ell_0, g.ell_l, g.ell_r
        z1 = np.full_like(y, ll + s)
        z2 = y - s
        z3 = y + s
        z4 = np.full_like(y, lr - s)
        s2 = (l0 - ll - 2 * s) / (y - ll - 2 * s)
        s4 = (lr - l0 - 2 * s) / (lr - y - 2 * s)
        c2 = (ll - l0 + 2 * s) / (ll + 2 * s - y) ** 2
        c4 = (lr - l0 - 2 * s) / (lr - y - 2 * s) ** 2
        zero = np.zeros_like(y)
        one = np.ones_like(y)
        A = np.stack([zero, z1 - s2 * z1, l0 - y, l0 + s - s4 * (y + s), zero], axis=-1)
        B = np.stack([one, s2, one, s4, one], axis=-1)
        C = np.stack([zero, -c2 * z1, -one, -c4 * (lr - s), zero], axis=-1)
        D = np.stack([zero, c2, zero, c4, zero], axis=-1)
        kinks = np.stack([z1, z2, z3, z4], axis=-1)
        return kinks, A, B, C, D

    @staticmethod
    def _piece_index(z, kinks):
        return np.sum(z[..., None] > kinks, axis=-1)

    def m(self, x, y):
        """Piecewise-linear skeleton ``m(x, y)``."""
        x, y = _broadcast(x, y)
        self.check_y(y)
        kinks, A, B, _, _ = self._pieces(y)
        k = self._piece_index(x, kinks)[..., None]
        a = np.take_along_axis(A, k, axis=-1)[..., 0]
        b = np.take_along_axis(B, k, axis=-1)[..., 0]
        return a + b * x

    def m_dy(self, x, y):
        x, y = _broadcast(x, y)
        self.check_y(y)
        kinks, _, _, C, D = self._pieces(y)
        k = self._piece_index(x, kinks)[..., None]
        c = np.take_along_axis(C, k, axis=-1)[..., 0]
        d = np.take_along_axis(D, k, axis=-1)[..., 0]
        return c + d * x

    def m_inverse(self, xi, y):
        """Exact inverse of the skeleton in ``x`` (used as a Newton start)."""
        xi, y = _broadcast(xi, y)
        kinks, A, B, _, _ = self._pieces(y)
        g = self.geometry
        values = np.stack(
            [kinks[..., 0], np.full_like(y, g.ell_0 - g.sigma), np.full_like(y, g.ell_0 + g.sigma),
             kinks[..., 3]],
            axis=-1,
        )
        k = self._piece_index(xi, values)[..., None]
        a = np.take_along_axis(A, k, axis=-1)[..., 0]
        b = np.take_along_axis(B, k, axis=-1)[..., 0]
        return (xi - a) / b

    # -- mollified map -------------------------------------------------

    def _active(self, x):
        g = self.geometry
        return (x > g.ell_l) & (x < g.ell_r)

    def _convolve(self, x, y, need_all=True):
        """Panel-wise convolution for 1-D arrays ``x``, ``y`` of equal length."""
        sig = self.mollifier.sigma
        nodes, weights = self.mollifier._nodes, self.mollifier._weights
        kinks, A, B, C, D = self._pieces(y)
        bounds = np.concatenate(
            [np.full(x.shape + (1,), np.inf), x[:, None] - kinks, np.full(x.shape + (1,), -np.inf)],
            axis=-1,
        )
        hi = np.clip(bounds[:, :-1], -sig, sig)
        lo = np.clip(bounds[:, 1:], -sig, sig)
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        # only panels of positive width contribute; most of the five are empty
        live = half > 0
        s = mid[live][:, None] + half[live][:, None] * nodes
        eta = self.mollifier._eta_nodes(s) * weights
        i0 = np.zeros_like(half)
        i1 = np.zeros_like(half)
        i0[live] = half[live] * np.sum(eta, axis=-1)
        i1[live] = half[live] * np.einsum("ij,ij->i", eta, s)
        g = np.sum((A + B * x[:, None]) * i0 - B * i1, axis=-1)
        gx = np.sum(B * i0, axis=-1)
        if not need_all:
            return g, gx, None, None
        gy = np.sum((C + D * x[:, None]) * i0 - D * i1, axis=-1)
        gxx = np.sum(B * (self.mollifier.eta(hi) - self.mollifier.eta(lo)), axis=-1)
        return g, gx, gy, gxx

    def _evaluate(self, x, y, need_all=True):
        shape = x.shape
        x = x.ravel()
        y = y.ravel()
        g = x.copy()
        gx = np.ones_like(x)
        gy = np.zeros_like(x)
        gxx = np.zeros_like(x)
        idx = np.flatnonzero(self._active(x))
        for start in range(0, idx.size, _CHUNK):
            sl = idx[start:start + _CHUNK]
            cg, cgx, cgy, cgxx = self._convolve(x[sl], y[sl], need_all)
            g[sl] = cg
            gx[sl] = cgx
            if need_all:
                gy[sl] = cgy
                gxx[sl] = cgxx
        return g.reshape(shape), gx.reshape(shape), gy.reshape(shape), gxx.reshape(shape)

    def sample(self, x, y) -> TransformSample:
        """Evaluate ``G`` and ``G_x, G_y, G_xx`` at ``(x, y)`` (broadcast)."""
        x, y = _broadcast(x, y)
        self.check_y(y)
        return TransformSample(*self._evaluate(x, y))

    def invert(self, xi, y, tol=1e-12, max_iter=60):
        """Solve ``G(x, y) = xi`` for ``x`` by safeguarded Newton.

        The bracket ``xi -+ |y - ell_0|`` always contains the root because
        ``|m(z, y) - z| <= |y - ell_0|``.
        """
        xi, y = _broadcast(xi, y)
        self.check_y(y)
        shape = xi.shape
        xi = xi.ravel().copy()
        y = y.ravel().copy()
        x = xi.copy()
        g = self.geometry
        # outside (ell_l, ell_r) G is the identity, so the root is xi itself
        todo = np.flatnonzero(self._active(xi))
        if todo.size == 0:
            return x.reshape(shape)
        target = xi[todo]
        yy = y[todo]
        margin = np.abs(yy - g.ell_0) + 1e-6 * g.L
        a = target - margin
        b = target + margin
        ga, _, _, _ = self._evaluate(a, yy, need_all=False)
        gb, _, _, _ = self._evaluate(b, yy, need_all=False)
        if np.any(ga > target) or np.any(gb < target):
            raise NumericalError("bracket failure in invert_G: monotonicity of G violated")
        xk = np.clip(self.m_inverse(target, yy), a, b)
        abs_tol = tol * g.L
        done = np.zeros(target.shape, dtype=bool)
        for _ in range(max_iter):
            open_ = np.flatnonzero(~done)
            if open_.size == 0:
                break
            gk, gxk, _, _ = self._evaluate(xk[open_], yy[open_], need_all=False)
            res = gk - target[open_]
            conv = np.abs(res) <= abs_tol
            done[open_[conv]] = True
            low = res < 0
            a[open_[low]] = xk[open_[low]]
            b[open_[~low]] = xk[open_[~low]]
            step = xk[open_] - res / gxk
            outside = (step <= a[open_]) | (step >= b[open_])
            step[outside] = 0.5 * (a[open_][outside] + b[open_][outside])
            upd = ~conv
            xk[open_[upd]] = step[upd]
        if not np.all(done):
            raise NumericalError("invert_G did not reach tolerance")
        x[todo] = xk
        return x.reshape(shape)


def piecewise_m(x, y, geometry: GeometryConfig):
    return Transform(geometry).m(x, y)


def piecewise_m_dy(x, y, geometry: GeometryConfig):
    return Transform(geometry).m_dy(x, y)


def eval_G(x, y, geometry: GeometryConfig, quad_order: int = 64) -> TransformSample:
    return Transform(geometry, quad_order).sample(x, y)


def invert_G(xi, y, geometry: GeometryConfig, quad_order: int = 64):
    return Transform(geometry, quad_order).invert(xi, y)


@dataclass(frozen=True)
class PhaseCoefficients:
    """Transformed coefficients on one phase, shaped ``(n_times, n_nodes)``."""

    d: np.ndarray
    b: np.ndarray


def transformed_coefficients(
    transform: Transform, ell, ell_prime, xi, diffusivity: float, times=None
) -> PhaseCoefficients:
    """Diffusion and advection fields of the flattened operator.

    With ``u(x, t) = p(G(x, ell(t)), t)`` the chain rule gives
    ``p_t - d G_x^2 p_xixi + (G_y ell' - d G_xx) p_xi``, all derivatives taken at
    the pulled-back point ``x = G^{-1}(xi)``.
    """
    ell = np.atleast_1d(np.asarray(ell, dtype=float))
    ell_prime = np.atleast_1d(np.asarray(ell_prime, dtype=float))
    xi = np.asarray(xi, dtype=float)
    transform.check_y(ell, times)
    yy = np.broadcast_to(ell[:, None], (ell.size, xi.size))
    xx = transform.invert(np.broadcast_to(xi[None, :], yy.shape), yy)
    smp = transform.sample(xx, yy)
    d = diffusivity * smp.gx**2
    b = smp.gy * ell_prime[:, None] - diffusivity * smp.gxx
    return PhaseCoefficients(d=d, b=b)
