"""Vertex-condition algebra for ``A f(v) + B fhat(v) = 0``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import General, MatchingCondition, Robin, SolverSettings, StarGraph

__all__ = [
    "BoundaryPair",
    "ComplementPair",
    "ValidationReport",
    "MatchingError",
    "robin_matrices",
    "as_pair",
    "validate_matching",
    "complement_pair",
    "symplectic_block",
    "symplectic_defect",
    "w_function",
    "krein_matrix",
    "krein_kernel_rhs",
    "permute",
    "unpermute",
    "permutation_matrix",
    "vertex_residual",
]

RANK_TOL = 1e-10
SYM_TOL = 1e-10


class MatchingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BoundaryPair:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=complex))
        B = np.atleast_2d(np.asarray(self.B, dtype=complex))
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
            raise MatchingError(f"A and B must be square of equal size, got {A.shape} and {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class ComplementPair:
    C: np.ndarray
    D: np.ndarray


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    rank: int
    n: int
    defect: float
    reason: str = ""

    def to_dict(self) -> dict:
        return {"ok": self.ok, "rank": self.rank, "n": self.n, "defect": self.defect, "reason": self.reason}


def robin_matrices(n: int, tau: float) -> BoundaryPair:
    """Pair for ``f_1 = ... = f_n = tau * sum fhat_j`` (``tau = inf``: ``sum fhat_j = 0``).

    Rows ``0..n-2`` of ``A`` are ``e_i - e_{i+1}``.  For finite ``tau`` the last
    row of ``A`` is ``-e_1`` and the last row of ``B`` is ``tau * (1, ..., 1)``;
    for ``tau = inf`` the last row of ``A`` vanishes and ``B`` has ones there.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    tau = float(tau)
    A = np.zeros((n, n))
    B = np.zeros((n, n))
    for i in range(n - 1):
        A[i, i] = 1.0
        A[i, i + 1] = -1.0
    if math.isinf(tau):
        B[n - 1, :] = 1.0
    else:
        A[n - 1, 0] = -1.0
        B[n - 1, :] = tau
    return BoundaryPair(A.astype(complex), B.astype(complex))


def as_pair(matching: MatchingCondition, n: int) -> BoundaryPair:
    if isinstance(matching, Robin):
        return robin_matrices(n, matching.tau)
    if isinstance(matching, General):
        if matching.A.shape[0] != n:
            raise MatchingError(f"matching has size {matching.A.shape[0]}, graph has {n} edges")
        return BoundaryPair(matching.A, matching.B)
    if isinstance(matching, BoundaryPair):
        return matching
    raise TypeError(f"unsupported matching condition {matching!r}")


def validate_matching(pair: BoundaryPair) -> ValidationReport:
    """Numerical rank of ``(A B)`` and the defect ``||A B* - B A*||``."""
    A, B = pair.A, pair.B
    n = pair.n
    block = np.hstack([A, B])
    sv = np.linalg.svd(block, compute_uv=False)
    smax = float(sv[0]) if sv.size else 0.0
    rank = int(np.sum(sv > RANK_TOL * smax)) if smax > 0 else 0
    defect = float(np.linalg.norm(A @ B.conj().T - B @ A.conj().T, 2))
    limit = SYM_TOL * (np.linalg.norm(A, 2) * np.linalg.norm(B, 2) + 1.0)
    reasons = []
    if rank != n:
        reasons.append(f"rank of (A B) is {rank}, expected {n}")
    if defect > limit:
        reasons.append(f"A B* - B A* has norm {defect:.3g} > {limit:.3g}")
    return ValidationReport(ok=not reasons, rank=rank, n=n, defect=defect, reason="; ".join(reasons))


def complement_pair(pair: BoundaryPair) -> ComplementPair:
    """``C = Q^{-1} B``, ``D = -Q^{-1} A`` with ``Q = A A* + B B*``."""
    A, B = pair.A, pair.B
    Q = A @ A.conj().T + B @ B.conj().T
    if np.linalg.cond(Q) > 1e12:
        raise MatchingError("A A* + B B* is numerically singular; the pair is invalid")
    C = np.linalg.solve(Q, B)
    D = -np.linalg.solve(Q, A)
    return ComplementPair(C, D)


def _jmat(n: int) -> np.ndarray:
    Z = np.zeros((n, n))
    I = np.eye(n)
    return np.block([[Z, -I], [I, Z]]).astype(complex)


def symplectic_block(pair: BoundaryPair, comp: ComplementPair) -> np.ndarray:
    """``[[C, D], [A, B]]``."""
    return np.block([[comp.C, comp.D], [pair.A, pair.B]])


def symplectic_defect(pair: BoundaryPair, comp: ComplementPair) -> dict:
    """Residuals of the identities tying ``(A, B)`` to ``(C, D)``.

    ``orth``: ``||B C* - A D* - I||``; ``cd``: ``||C D* - D C*||``; ``block``:
    ``||U* J U - J||`` with ``U = [[C, D], [A, B]]`` and ``J = [[0, -I], [I, 0]]``.
    """
    n = pair.n
    A, B, C, D = pair.A, pair.B, comp.C, comp.D
    U = symplectic_block(pair, comp)
    Jn = _jmat(n)
    return {
        "orth": float(np.linalg.norm(B @ C.conj().T - A @ D.conj().T - np.eye(n), 2)),
        "cd": float(np.linalg.norm(C @ D.conj().T - D @ C.conj().T, 2)),
        "block": float(np.linalg.norm(U.conj().T @ Jn @ U - Jn, 2)),
        "rank_cd": int(np.linalg.matrix_rank(np.hstack([C, D]))),
    }


def _weyl_diag(graph: StarGraph, z: complex, settings: SolverSettings | None) -> np.ndarray:
    from .weyl import weyl_matrix

    return weyl_matrix(graph, z, settings)


def w_function(pair: BoundaryPair, comp: ComplementPair, graph: StarGraph, z: complex,
               settings: SolverSettings | None = None, M: np.ndarray | None = None) -> np.ndarray:
    """``(D M(z) - C)(B M(z) - A)^{-1}``."""
    if M is None:
        M = _weyl_diag(graph, z, settings)
    den = pair.B @ M - pair.A
    if np.linalg.cond(den) > 1e12:
        raise MatchingError(f"B M(z) - A is singular at z={z}; z is a spectral point")
    return (comp.D @ M - comp.C) @ np.linalg.inv(den)


def krein_matrix(pair: BoundaryPair, M: np.ndarray) -> np.ndarray:
    """The ``2n x 2n`` matrix ``[[0, 0], [0, M]] - (-I; M)(B M - A)^{-1} B (-I  M)``."""
    n = pair.n
    I = np.eye(n)
    col = np.vstack([-I, M])
    row = np.hstack([-I, M])
    base = np.zeros((2 * n, 2 * n), dtype=complex)
    base[n:, n:] = M
    return base - col @ np.linalg.solve(pair.B @ M - pair.A, pair.B) @ row


def krein_kernel_rhs(pair: BoundaryPair, Mz: np.ndarray, Mzeta: np.ndarray,
                     z: complex, zeta: complex) -> np.ndarray:
    """Factored form of ``(P(z) - P(zeta)*) / (z - conj zeta)``."""
    A, B = pair.A, pair.B
    Ms = Mzeta.conj().T
    left = np.vstack([B.conj().T, -A.conj().T]) @ np.linalg.inv(Ms @ B.conj().T - A.conj().T)
    mid = (Mz - Ms) / (z - np.conj(zeta))
    right = np.linalg.solve(B @ Mz - A, np.hstack([B, -A]))
    return left @ mid @ right


def permutation_matrix(n: int) -> np.ndarray:
    """Permutation taking ``(u1, uh1, ..., un, uhn)`` to ``(u1..un, uh1..uhn)``."""
    P = np.zeros((2 * n, 2 * n))
    for j in range(n):
        P[j, 2 * j] = 1.0
        P[n + j, 2 * j + 1] = 1.0
    return P


def permute(u) -> np.ndarray:
    """Reorder interleaved pairs into first components followed by second components."""
    u = np.asarray(u)
    if u.ndim != 1 or u.size % 2:
        raise ValueError(f"expected a vector of even length, got shape {u.shape}")
    return np.concatenate([u[0::2], u[1::2]])


def unpermute(u) -> np.ndarray:
    """Inverse of :func:`permute`."""
    u = np.asarray(u)
    if u.ndim != 1 or u.size % 2:
        raise ValueError(f"expected a vector of even length, got shape {u.shape}")
    n = u.size // 2
    out = np.empty_like(u)
    out[0::2] = u[:n]
    out[1::2] = u[n:]
    return out


def vertex_residual(pair: BoundaryPair, f_v, fhat_v) -> float:
    """``||A f(v) + B fhat(v)||`` relative to ``max(1, |f(v)|, |fhat(v)|)``."""
    f_v = np.asarray(f_v, dtype=complex)
    fhat_v = np.asarray(fhat_v, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(f_v))), float(np.max(np.abs(fhat_v))))
    return float(np.linalg.norm(pair.A @ f_v + pair.B @ fhat_v)) / scale
