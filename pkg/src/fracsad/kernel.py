"""Solution kernel of the linear self-attracting model.

The kernel is

    h(t, s) = 1 - a s exp(a s^2 / 2) * int_s^t exp(-a u^2 / 2) du,   t >= s,

and 0 for t < s. With x = sqrt(a) s and y = sqrt(a) t it equals

    h(t, s) = [1 - x R(x)] + x R(y) exp(-(y^2 - x^2) / 2),

where R is the Mills ratio. Both terms are non-negative and no factor
exp(a s^2 / 2) is ever formed, so the evaluation cannot overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx

from .errors import DomainError, NumericError
from .fbm import TimeGrid, hurst_value
from .io import write_csv
from .quadrature import QuadratureSpec, gauss_jacobi_left, gauss_legendre

_SQRT_HALF_PI = np.sqrt(np.pi / 2)
_ASYMPTOTIC_FROM = 100.0


@dataclass(frozen=True)
class ModelParams:
    """Constants of the linear fractional self-attracting diffusion.

    ``a = 0`` is accepted and denotes the fBm limit (h identically 1).
    """

    a: float = 1.0
    nu: float = 0.0
    z: float = 0.0
    H: float = 0.6
    T: float = 1.0
    d: int = 1

    def __post_init__(self):
        hurst_value(self.H)
        if self.a < 0:
            raise DomainError("attraction strength a must be >= 0")
        if self.T <= 0:
            raise DomainError("horizon T must be positive")
        if self.d not in (1, 2):
            raise DomainError("dimension d must be 1 or 2")

    def require_driftless(self, what: str) -> None:
        if self.nu != 0:
            raise DomainError(f"{what} requires nu = 0")


def mills_ratio(x):
    """R(x) = (1 - Phi(x)) / phi(x), stable for all x >= 0."""
    return _SQRT_HALF_PI * erfcx(np.asarray(x, dtype=float) / np.sqrt(2.0))


def _one_minus_x_mills(x):
    # 1 - x R(x) = -R'(x); asymptotic series once the direct form cancels
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    big = x > _ASYMPTOTIC_FROM
    xs = x[~big]
    out[~big] = 1.0 - xs * mills_ratio(xs)
    if np.any(big):
        r = 1.0 / x[big] ** 2
        out[big] = r * (1 - 3 * r * (1 - 5 * r * (1 - 7 * r * (1 - 9 * r))))
    return out


def _check_a(a):
    if a < 0:
        raise DomainError("attraction strength a must be >= 0")


def eval_h(t, s, a):
    """Kernel h(t, s); zero for t < s. Vectorized over ``t`` and ``s``."""
    _check_a(a)
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("times must be non-negative")
    active = t >= s
    out = np.zeros(t.shape)
    if a == 0:
        out[active] = 1.0
    else:
        c = np.sqrt(a)
        x = c * s[active]
        y = c * t[active]
        out[active] = _one_minus_x_mills(x) + x * mills_ratio(y) * np.exp(-0.5 * (y - x) * (y + x))
    return out if out.ndim else float(out)


def eval_h_limit(s, a):
    """Limit kernel h(s) = lim_{t -> inf} h(t, s), in (0, 1], decaying like 1/(a s^2)."""
    _check_a(a)
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("times must be non-negative")
    out = np.ones(s.shape) if a == 0 else _one_minus_x_mills(np.sqrt(a) * s)
    return out if out.ndim else float(out)


def h_integral(t, a, n: int = 64) -> float:
    """m(t) = int_0^t h(t, s) ds, the response of X to a unit drift."""
    if t <= 0:
        return 0.0
    x, w = gauss_legendre(n)
    # h(t, .) is analytic; split at t/2 to resolve the boundary layer near s = t for large a t
    total = 0.0
    for lo, hi in ((0.0, 0.5 * t), (0.5 * t, t)):
        s = lo + (hi - lo) * x
        total += (hi - lo) * np.dot(w, eval_h(t, s, a))
    return float(total)


@dataclass(frozen=True)
class KernelDifference:
    """g(u) = h(t_upper, u) 1_(0, t_upper](u) - h(t_lower, u) 1_(0, t_lower](u).

    This is the integrand of the increment X_{t_upper} - X_{t_lower} against the
    driving fBm. It is smooth on (0, t_lower) and on (t_lower, t_upper) with a
    unit jump at u = t_lower when t_lower > 0.
    """

    t_upper: float
    t_lower: float
    params: ModelParams

    def __post_init__(self):
        if not (0 <= self.t_lower <= self.t_upper):
            raise DomainError("need 0 <= t_lower <= t_upper")

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted({0.0, self.t_lower, self.t_upper}))

    def __call__(self, u):
        return eval_kernel_difference(self, u)


def eval_kernel_difference(g: KernelDifference, u):
    u = np.asarray(u, dtype=float)
    a = g.params.a
    upper = np.where((u > 0) & (u <= g.t_upper), eval_h(g.t_upper, np.clip(u, 0, None), a), 0.0)
    lower = np.where((u > 0) & (u <= g.t_lower), eval_h(g.t_lower, np.clip(u, 0, None), a), 0.0)
    out = upper - lower
    return out if out.ndim else float(out)


def _weight_integral(s: float, H: float, a: float, n_cells: int, grading: float, order: int) -> float:
    # int_0^s h(s, m) (s - m)^{2H-2} dm on a mesh graded toward m = s;
    # the cell touching m = s absorbs the singular factor into a Gauss-Jacobi rule
    alpha = 2 * H - 2
    xi = np.linspace(0.0, 1.0, n_cells + 1)
    r_nodes = s * xi**grading  # distance from the singular end
    xl, wl = gauss_legendre(order)
    lo, hi = r_nodes[1:-1], r_nodes[2:]
    r = lo[:, None] + (hi - lo)[:, None] * xl[None, :]
    smooth = np.sum((hi - lo)[:, None] * wl[None, :] * r**alpha * eval_h(s, s - r, a))
    xj, wj = gauss_jacobi_left(order, alpha)
    r0 = r_nodes[1]
    singular = r0 ** (alpha + 1) * np.dot(wj, eval_h(s, s - r0 * xj, a))
    return float(smooth + singular)


def eval_weight(s: float, params: ModelParams, quad: QuadratureSpec | None = None) -> float:
    """Weighted-local-time weight w(s) = 2H(2H-1) int_0^s h(s,m)(s-m)^{2H-2} dm.

    Computed twice, at ``cells_per_axis`` and twice that; a disagreement beyond
    the tolerance raises :class:`NumericError` carrying the finer estimate.
    """
    quad = quad or QuadratureSpec(cells_per_axis=256)
    if s < 0 or s > params.T * (1 + 1e-12):
        raise DomainError(f"s={s} outside [0, T]")
    if s == 0:
        return 0.0
    H, a = params.H, params.a
    c = 2 * H * (2 * H - 1)
    coarse = c * _weight_integral(s, H, a, quad.cells_per_axis, quad.grading, 12)
    fine = c * _weight_integral(s, H, a, 2 * quad.cells_per_axis, quad.grading, 12)
    err = abs(fine - coarse)
    if err > quad.rel_tol * abs(fine) + quad.abs_tol:
        raise NumericError(f"weight quadrature did not converge at s={s}", estimate=fine, error=err)
    return fine


def weight_closed_form_fbm(s, H):
    """w(s) for a = 0, where h is identically 1: 2H s^{2H-1}."""
    s = np.asarray(s, dtype=float)
    out = 2 * H * s ** (2 * H - 1)
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class WeightTable:
    grid: TimeGrid
    weights: np.ndarray
    params: ModelParams

    def __call__(self, s):
        return np.interp(s, self.grid.points, self.weights)

    def to_csv(self, path) -> str:
        return write_csv(path, ["s", "w"], zip(self.grid.points, self.weights))


def weight_table(grid: TimeGrid, params: ModelParams, quad: QuadratureSpec | None = None) -> WeightTable:
    w = np.array([eval_weight(float(s), params, quad) for s in grid.points])
    w.setflags(write=False)
    return WeightTable(grid, w, params)
