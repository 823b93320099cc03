"""Dense discretization of the graph operator, used as an independent check.

Each edge ``[0, l]`` carries a staggered grid with ``N = ceil(M l)`` cells:
``f`` lives on the nodes ``x_i = i h`` and ``fhat`` on the cell midpoints, with
two extra boundary values ``fhat(0)`` and ``fhat(l)``.  The discrete operator

    (T f)_i       = (fhat_{i+1/2} - fhat_{i-1/2}) / h + p_i f_i + (q fhat)_i
    (T f)_{i+1/2} = -(f_{i+1} - f_i) / h + q (f_i + f_{i+1}) / 2 - p fhat_{i+1/2}

uses the boundary values as ghost entries at the end nodes, where the node
weight is ``h/2``.  Summation by parts leaves the boundary form
``sum_j fhat_j(l) conj f_j(l) - fhat_j(0) conj f_j(0)``, which is real on the
subspace cut out by the outer and vertex conditions, so the Galerkin matrices
``K = Phi* W T Phi`` and ``G = Phi* W Phi`` are Hermitian and positive definite.
A staggered grid has no spurious doubled modes, so no filtering is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .graph import StarGraph
from .matching import BoundaryPair, as_pair, validate_matching

__all__ = [
    "DiscreteOperator",
    "ResolutionError",
    "discretize",
    "oracle_spectrum",
    "oracle_eigenvalues",
    "cluster_eigenvalues",
]


class ResolutionError(ValueError):
    """Requested window is not resolved by the mesh."""


@dataclass
class DiscreteOperator:
    K: np.ndarray
    G: np.ndarray
    grids: list[np.ndarray]
    M: int
    pair: BoundaryPair
    hermiticity_defect: float
    h_max: float
    info: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.K.shape[0]

    def hermitian_matrix(self) -> np.ndarray:
        """``L^{-1} K L^{-*}`` with ``G = L L*``: an ordinary Hermitian matrix."""
        L = np.linalg.cholesky(self.G)
        X = scipy.linalg.solve_triangular(L, self.K, lower=True)
        H = scipy.linalg.solve_triangular(L, X.conj().T, lower=True).conj().T
        return 0.5 * (H + H.conj().T)


def _edge_blocks(edge, N: int):
    """Rectangular operator and weights of one edge.

    Columns: ``f_0..f_N``, ``fhat_{1/2}..fhat_{N-1/2}``, ``Fhat_0``, ``Fhat_N``.
    Rows: node rows ``0..N`` then half-node rows ``0..N-1``.
    """
    l = edge.length
    h = l / N
    xs = np.linspace(0.0, l, N + 1)
    xm = 0.5 * (xs[:-1] + xs[1:])
    kx, kp, kq = edge.knots
    p_n = np.interp(xs, kx, kp)
    p_m, q_m = np.interp(xm, kx, kp), np.interp(xm, kx, kq)
    ncol = 2 * N + 3
    nrow = 2 * N + 1
    T = np.zeros((nrow, ncol))
    w = np.full(nrow, h)
    w[0] = w[N] = 0.5 * h
    F0, FN = 2 * N + 1, 2 * N + 2

    def half(k):
        return N + 1 + k

    for i in range(N + 1):
        # derivative of fhat at node i
        right = half(i) if i < N else FN
        left = half(i - 1) if i > 0 else F0
        span = h if 0 < i < N else 0.5 * h
        T[i, right] += 1.0 / span
        T[i, left] -= 1.0 / span
        T[i, i] += p_n[i]
        # q fhat at node i, adjoint-consistent with the half-node average
        for k in (i - 1, i):
            if 0 <= k < N:
                T[i, half(k)] += (h * q_m[k] / 2.0) / w[i]
    for k in range(N):
        r = N + 1 + k
        T[r, k + 1] -= 1.0 / h
        T[r, k] += 1.0 / h
        T[r, k] += 0.5 * q_m[k]
        T[r, k + 1] += 0.5 * q_m[k]
        T[r, half(k)] -= p_m[k]
    return T, w, xs


def discretize(graph: StarGraph, matching, M: int = 64) -> DiscreteOperator:
    """Assemble the Hermitian generalized eigenproblem on the constrained subspace."""
    if M < 16:
        raise ValueError("M must be at least 16 points per unit length")
    pair = matching if isinstance(matching, BoundaryPair) else as_pair(matching, graph.n)
    report = validate_matching(pair)
    if not report.ok:
        raise ValueError(f"invalid matching condition: {report.reason}")
    n = graph.n
    # vertex parameters: c = U d with U an orthonormal basis of range(B)
    if np.linalg.norm(pair.B) == 0.0:
        U = np.zeros((n, 0), dtype=complex)
    else:
        Uf, sv, _ = np.linalg.svd(pair.B)
        r = int(np.sum(sv > 1e-10 * sv[0]))
        U = Uf[:, :r]
    fv = -pair.B.conj().T @ U  # f_j(0) per vertex parameter
    Fv = pair.A.conj().T @ U  # fhat_j(0) per vertex parameter
    nv = U.shape[1]

    blocks = []
    red_cols = nv
    row_total = 0
    grids = []
    h_max = 0.0
    for e in graph.edges:
        N = max(4, int(math.ceil(M * e.length)))
        T, w, xs = _edge_blocks(e, N)
        grids.append(xs)
        h_max = max(h_max, e.length / N)
        sa, ca = math.sin(e.alpha), math.cos(e.alpha)
        has_s = abs(sa) > 1e-12
        nred = (N - 1) + N + (1 if has_s else 0)
        blocks.append((T, w, N, has_s, sa, ca, red_cols, nred))
        red_cols += nred
        row_total += T.shape[0]

    ncols = red_cols
    WT = np.zeros((row_total, ncols), dtype=complex)  # rows of W^(1/2) T Phi
    WP = np.zeros((row_total, ncols), dtype=complex)  # rows of W^(1/2) Phi on weighted nodes
    row = 0
    for j, (T, w, N, has_s, sa, ca, off, nred) in enumerate(blocks):
        full = T.shape[1]
        Phi = np.zeros((full, ncols), dtype=complex)
        # vertex node and vertex fhat
        Phi[0, :nv] = fv[j]
        Phi[2 * N + 1, :nv] = Fv[j]
        # interior nodes
        for i in range(1, N):
            Phi[i, off + i - 1] = 1.0
        # half nodes
        for k in range(N):
            Phi[N + 1 + k, off + (N - 1) + k] = 1.0
        # outer end: (f_N, fhat_N) = (sin a, -cos a) s
        if has_s:
            Phi[N, off + nred - 1] = sa
            Phi[2 * N + 2, off + nred - 1] = -ca
        sw = np.sqrt(w)
        nrow = T.shape[0]
        WT[row:row + nrow] = sw[:, None] * (T @ Phi)
        WP[row:row + nrow] = sw[:, None] * Phi[:nrow]
        row += nrow
    K = WP.conj().T @ WT
    G = WP.conj().T @ WP
    defect = float(np.max(np.abs(K - K.conj().T))) if K.size else 0.0
    K = 0.5 * (K + K.conj().T)
    G = 0.5 * (G + G.conj().T)
    return DiscreteOperator(K=K, G=G, grids=grids, M=int(M), pair=pair, hermiticity_defect=defect,
                            h_max=h_max, info={"vertex_params": nv})


def oracle_eigenvalues(op: DiscreteOperator, window: Sequence[float], resolution: float = 0.5) -> np.ndarray:
    """Sorted discrete eigenvalues in the window.

    Raises :class:`ResolutionError` when ``max(|lo|, |hi|) * h`` exceeds
    ``resolution``.
    """
    lo, hi = float(window[0]), float(window[1])
    if max(abs(lo), abs(hi)) * op.h_max > resolution:
        raise ResolutionError(
            f"window [{lo}, {hi}] is not resolved by h={op.h_max:.3g}; increase M")
    if op.size == 0:
        return np.zeros(0)
    vals = scipy.linalg.eigh(op.K, op.G, eigvals_only=True, subset_by_value=(lo, hi), driver="gvx")
    return np.sort(vals.real)


def cluster_eigenvalues(vals: Sequence[float], rel_tol: float = 1e-6) -> list[tuple[float, int]]:
    """Group eigenvalues closer than ``rel_tol * (1 + |lam|)``."""
    out: list[list[float]] = []
    for v in sorted(vals):
        if out and v - out[-1][-1] <= rel_tol * (1.0 + abs(v)):
            out[-1].append(v)
        else:
            out.append([v])
    return [(float(np.mean(g)), len(g)) for g in out]


def oracle_spectrum(op: DiscreteOperator, window: Sequence[float], rel_tol: float = 1e-6) -> list[tuple[float, int]]:
    """Discrete eigenvalues in the window with clustered multiplicities."""
    return cluster_eigenvalues(oracle_eigenvalues(op, window), rel_tol)
