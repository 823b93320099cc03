"""Green's functions, resolvents and trace formulas.

On an edge the resolvent of the operator with ``f(0) = 0`` at the central
vertex and the separated condition at the outer end is

    f(x) = Y(x) [[0, -1], [0, m]] int_0^x Y(s)^T g(s) ds
         + Y(x) [[0, 0], [-1, m]] int_x^l Y(s)^T g(s) ds,

with ``Y = Y(., z)`` and ``m = m(z)``.  For real potentials ``Y(s, conj z)^*``
equals ``Y(s, z)^T``, which is what is used throughout.

On the graph a vertex condition ``A f(v) + B fhat(v) = 0`` adds the rank <= n
correction ``-y_j(x) [(B M - A)^{-1} B w]_j`` with ``y_j = Y_j (-1, m_j)^T`` and
``w_j = int y_j(s)^T g_j(s) ds`` (bilinear, no conjugation).
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .graph import EdgeSpec, GridFunction, Robin, SolverSettings, StarGraph
from .matching import as_pair
from .propagator import DEFAULT_SETTINGS, J, propagate_path, quadrature_nodes
from .weyl import PoleError, char_entries

__all__ = [
    "SpectralPointError",
    "green_edge",
    "apply_edge_resolvent",
    "apply_graph_resolvent",
    "apply_operator",
    "trace_edge_diff",
    "trace_robin_diff",
    "robin_trace_quadrature",
    "regularized_trace",
    "log_derivative_c",
]

_LOWER = np.array([[0.0, -1.0], [0.0, 0.0]])
_UPPER = np.array([[0.0, 0.0], [-1.0, 0.0]])


class SpectralPointError(ValueError):
    """``z`` is (numerically) an eigenvalue of the operator involved."""


def _weyl_value(edge: EdgeSpec, z: complex, settings: SolverSettings) -> complex:
    s = char_entries(edge, z, settings, with_derivative=False)
    if s.is_pole:
        raise SpectralPointError(f"z={z} is an eigenvalue of the edge operator (|c|={abs(s.c):.3g})")
    return s.m


def green_edge(edge: EdgeSpec, z: complex, x: float, xi: float, side: Optional[str] = None,
               settings: SolverSettings | None = None) -> np.ndarray:
    """Green's matrix ``G(x, xi; z)`` of the edge operator.

    For ``xi < x`` it is ``Y(x) [[0,-1],[0,m]] Y(xi)^T``; for ``xi > x`` the
    middle factor is ``[[0,0],[-1,m]]``.  At ``x == xi`` choose the branch with
    ``side="below"`` (``xi -> x-0``) or ``side="above"`` (``xi -> x+0``).
    """
    settings = settings or DEFAULT_SETTINGS
    z = complex(z)
    mval = _weyl_value(edge, z, settings)
    if xi < x:
        branch = "below"
    elif xi > x:
        branch = "above"
    else:
        if side not in ("below", "above"):
            raise ValueError("x == xi requires side='below' or side='above'")
        branch = side
    Ys = propagate_path(edge, [x, xi], z, settings=settings)
    mid = (_LOWER if branch == "below" else _UPPER).astype(complex)
    mid[1, 1] = mval
    return Ys[0] @ mid @ Ys[1].T


def _edge_parts(edge: EdgeSpec, grid: np.ndarray, gvals: np.ndarray, z: complex,
                settings: SolverSettings):
    """Decoupled edge resolvent on the grid plus ``Y`` values and ``m``."""
    mval = _weyl_value(edge, z, settings)
    Ys = propagate_path(edge, grid, z, settings=settings)
    integrand = np.einsum("kji,kj->ki", Ys, gvals)  # Y(s)^T g(s)
    cum = _cumulative(integrand, grid)
    total = cum[-1]
    low = _LOWER.astype(complex)
    low[1, 1] = mval
    up = _UPPER.astype(complex)
    up[1, 1] = mval
    vec = cum @ low.T + (total[None, :] - cum) @ up.T
    f = np.einsum("kij,kj->ki", Ys, vec)
    return f, Ys, mval


def _cumulative(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Cumulative Simpson integral along axis 0; real and imaginary parts separately
    because scipy's routine drops imaginary parts."""
    re = cumulative_simpson(values.real, x=grid, axis=0, initial=0.0)
    im = cumulative_simpson(values.imag, x=grid, axis=0, initial=0.0)
    return re + 1j * im


def _as_edge_grid(g) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(g, GridFunction):
        if g.n != 1:
            raise ValueError("expected a single-edge grid function")
        return g.grids[0], g.values[0]
    grid, vals = g
    return np.asarray(grid, dtype=float), np.asarray(vals, dtype=complex)


def apply_edge_resolvent(edge: EdgeSpec, z: complex, g, settings: SolverSettings | None = None) -> GridFunction:
    """``(T - z)^{-1} g`` on the grid of ``g`` (cumulative Simpson quadrature)."""
    settings = settings or DEFAULT_SETTINGS
    grid, vals = _as_edge_grid(g)
    if grid[0] != 0.0 or abs(grid[-1] - edge.length) > 1e-12 * edge.length:
        raise ValueError("grid must cover the whole edge")
    f, _, _ = _edge_parts(edge, grid, vals, complex(z), settings)
    return GridFunction([grid], [f])


def apply_graph_resolvent(graph: StarGraph, matching, z: complex, g: GridFunction,
                          settings: SolverSettings | None = None) -> GridFunction:
    """Resolvent of the graph operator with vertex condition ``matching``."""
    settings = settings or DEFAULT_SETTINGS
    z = complex(z)
    if g.n != graph.n:
        raise ValueError(f"grid function has {g.n} edges, graph has {graph.n}")
    if isinstance(matching, Robin) and matching.tau == 0.0:
        return GridFunction(list(g.grids), [
            _edge_parts(e, grid, vals, z, settings)[0]
            for e, grid, vals in zip(graph.edges, g.grids, g.values)])
    pair = as_pair(matching, graph.n)
    f0s, ys, ms, ws = [], [], [], []
    for e, grid, vals in zip(graph.edges, g.grids, g.values):
        f0, Ys, mval = _edge_parts(e, grid, vals, z, settings)
        y = Ys @ np.array([-1.0, mval])  # y_j(x) = Y(x) (-1, m)^T
        w = simpson_bilinear(grid, y, vals)
        f0s.append(f0)
        ys.append(y)
        ms.append(mval)
        ws.append(w)
    M = np.diag(ms)
    K = pair.B @ M - pair.A
    if np.linalg.cond(K) > 1e12:
        raise SpectralPointError(f"B M(z) - A is singular at z={z}")
    u = np.linalg.solve(K, pair.B @ np.array(ws))
    values = [f0 - uj * y for f0, uj, y in zip(f0s, u, ys)]
    return GridFunction(list(g.grids), values)


def simpson_bilinear(grid: np.ndarray, a: np.ndarray, b: np.ndarray) -> complex:
    """``int a(s)^T b(s) ds`` by Simpson's rule."""
    return complex(simpson(np.sum(a * b, axis=1), x=grid))


def apply_operator(edge: EdgeSpec, x: np.ndarray, f: np.ndarray, fprime: np.ndarray) -> np.ndarray:
    """``-J f' + V f`` at the points ``x`` for given values and derivatives."""
    kx, kp, kq = edge.knots
    p = np.interp(x, kx, kp)
    q = np.interp(x, kx, kq)
    out = -(fprime @ J.T)
    out[:, 0] += p * f[:, 0] + q * f[:, 1]
    out[:, 1] += q * f[:, 0] - p * f[:, 1]
    return out


# ----------------------------------------------------------------------------
# Traces
# ----------------------------------------------------------------------------


def log_derivative_c(edge: EdgeSpec, z: complex, settings: SolverSettings | None = None) -> complex:
    """``cdot(z) / c(z)``."""
    s = char_entries(edge, z, settings)
    if s.is_pole:
        raise SpectralPointError(f"z={z} is an eigenvalue of the edge operator")
    return s.cdot / s.c


def trace_edge_diff(edge: EdgeSpec, z1: complex, z2: complex, settings: SolverSettings | None = None) -> complex:
    """``tr((T - z1)^{-1} - (T - z2)^{-1}) = -cdot/c(z1) + cdot/c(z2)``."""
    if complex(z1) == complex(z2):
        return 0.0 + 0.0j
    return -log_derivative_c(edge, z1, settings) + log_derivative_c(edge, z2, settings)


def trace_robin_diff(graph: StarGraph, tau: float, z: complex, settings: SolverSettings | None = None) -> complex:
    """``tr((T_tau - z)^{-1} - (T_0 - z)^{-1}) = -(sum_j mdot_j(z)) / m_tau(z)``."""
    tau = float(tau)
    if tau == 0.0:
        return 0.0 + 0.0j
    inv = 0.0 if math.isinf(tau) else 1.0 / tau
    total_m = inv
    total_md = 0.0
    for e in graph.edges:
        s = char_entries(e, z, settings)
        if s.is_pole:
            raise PoleError(f"z={z} is a pole of an edge Weyl function")
        total_m += s.m
        total_md += s.mdot
    return -total_md / total_m


def robin_trace_quadrature(graph: StarGraph, tau: float, z: complex,
                           settings: SolverSettings | None = None, order: int = 20) -> complex:
    """Trace of the rank-one Robin correction, ``-(1/m_tau) sum_j int y_j^T y_j``, by quadrature."""
    settings = settings or DEFAULT_SETTINGS
    z = complex(z)
    tau = float(tau)
    inv = 0.0 if math.isinf(tau) else 1.0 / tau
    total_m = inv
    total_int = 0.0 + 0.0j
    for e in graph.edges:
        mval = _weyl_value(e, z, settings)
        total_m += mval
        nodes, weights = quadrature_nodes(e, z_scale=abs(z), order=order)
        Ys = propagate_path(e, nodes, z, settings=settings)
        y = Ys @ np.array([-1.0, mval])
        total_int += np.sum(weights * np.sum(y * y, axis=1))
    return -total_int / total_m


def regularized_trace(edge: EdgeSpec, z: complex, settings: SolverSettings | None = None) -> complex:
    """``-cdot/c(z) + Re(cdot/c(i))``."""
    return -log_derivative_c(edge, z, settings) + log_derivative_c(edge, 1j, settings).real
