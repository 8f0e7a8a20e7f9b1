"""Quadrature configuration, graded meshes and fixed-order rules."""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import DomainError


@dataclass(frozen=True)
class QuadratureSpec:
    """Resolution and tolerance settings for product integration.

    Parameters
    ----------
    cells_per_axis : int
        Base number of mesh cells along one axis of the integration domain.
    grading : float
        Exponent of the grading toward segment endpoints (1 = uniform).
    rel_tol, abs_tol : float
        Acceptance threshold for the difference between successive
        refinements: ``|I_2n - I_n| <= rel_tol * |I_2n| + abs_tol``.
    max_refinements : int
        Number of mesh doublings allowed before giving up.
    """

    cells_per_axis: int = 64
    grading: float = 2.0
    rel_tol: float = 1e-7
    abs_tol: float = 1e-12
    max_refinements: int = 3

    def __post_init__(self):
        if self.cells_per_axis < 8:
            raise DomainError("cells_per_axis must be >= 8")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("tolerances must be positive")
        if self.grading < 1:
            raise DomainError("grading exponent must be >= 1")

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        return replace(self, cells_per_axis=self.cells_per_axis * factor)


@dataclass(frozen=True)
class BoundCheck:
    """Outcome of checking ``lhs <= rhs``; margin is ``rhs - lhs``."""

    name: str
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def holds(self, tol: float = 0.0) -> bool:
        return self.margin >= -tol


def _graded_unit(m: int, grading: float) -> np.ndarray:
    # symmetric grading toward both ends of [0, 1]
    xi = np.linspace(0.0, 1.0, m + 1)
    if grading == 1.0:
        return xi
    out = np.where(xi <= 0.5, 0.5 * (2 * xi) ** grading, 1 - 0.5 * (2 * (1 - xi)) ** grading)
    out[0], out[-1] = 0.0, 1.0
    return out


def graded_mesh(breakpoints, n_cells: int, grading: float = 2.0, min_cells: int = 4) -> np.ndarray:
    """Mesh nodes covering ``[min(bp), max(bp)]`` with every breakpoint as a node.

    Cells are shared between segments in proportion to segment length, with at
    least ``min_cells`` per segment, and graded toward each segment's ends.
    """
    bp = np.unique(np.asarray(breakpoints, dtype=float))
    if bp.size < 2:
        raise DomainError("need at least two distinct breakpoints")
    total = bp[-1] - bp[0]
    # breakpoints closer than roundoff of the span would create empty cells
    keep = np.concatenate([[True], np.diff(bp) > 1e-12 * total])
    keep[-1] = True
    bp = bp[keep]
    if bp.size > 2 and bp[-1] - bp[-2] <= 1e-12 * total:
        bp = np.delete(bp, -2)
    pieces = [bp[:1]]
    for lo, hi in zip(bp[:-1], bp[1:]):
        m = max(min_cells, int(round(n_cells * (hi - lo) / total)))
        pieces.append(lo + (hi - lo) * _graded_unit(m, grading)[1:])
    nodes = np.concatenate(pieces)
    nodes[-1] = bp[-1]
    return nodes


def uniform_mesh(breakpoints, cells_per_interval: int) -> np.ndarray:
    bp = np.unique(np.asarray(breakpoints, dtype=float))
    pieces = [bp[:1]]
    for lo, hi in zip(bp[:-1], bp[1:]):
        pieces.append(np.linspace(lo, hi, cells_per_interval + 1)[1:])
    return np.concatenate(pieces)


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


@lru_cache(maxsize=None)
def gauss_jacobi_left(n: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1] for the weight ``x**beta``."""
    x, w = roots_jacobi(n, 0.0, beta)
    return 0.5 * (x + 1), w * 0.5 ** (beta + 1)


def integrate_left_singular(func, t: float, beta: float, n: int = 48, n_panels: int = 6) -> float:
    """Integrate ``s**beta * func(s)`` over ``[0, t]`` for smooth ``func``.

    The first panel carries the algebraic endpoint behaviour through a
    Gauss-Jacobi rule; the remaining geometrically growing panels use
    Gauss-Legendre. ``func`` is called once on a flat array of nodes.
    """
    if t <= 0:
        return 0.0
    edges = t * np.concatenate([[0.0], 0.5 ** np.arange(n_panels - 1, -1, -1)])
    xj, wj = gauss_jacobi_left(n, beta)
    xl, wl = gauss_legendre(n)
    h0 = edges[1]
    nodes = [h0 * xj]
    weights = [h0 ** (beta + 1) * wj]
    for lo, hi in zip(edges[1:-1], edges[2:]):
        s = lo + (hi - lo) * xl
        nodes.append(s)
        weights.append((hi - lo) * wl * s**beta)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    return float(np.dot(weights, func(nodes)))
