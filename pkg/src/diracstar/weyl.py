"""Edge Weyl functions ``m = b / c`` and the Robin aggregate ``m_tau``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import EdgeSpec, SolverSettings, StarGraph
from .propagator import DEFAULT_SETTINGS, propagate_path

__all__ = [
    "PoleError",
    "WeylSample",
    "char_entries",
    "char_entries_many",
    "m",
    "mdot",
    "m_tau",
    "m_tau_dot",
    "weyl_matrix",
    "nevanlinna_kernel",
    "free_c",
    "is_pole",
]


class PoleError(ValueError):
    """``z`` is (numerically) a pole of an edge Weyl function."""


@dataclass(frozen=True)
class WeylSample:
    z: complex
    b: complex
    c: complex
    bdot: complex
    cdot: complex
    m: complex | None
    edge_index: int = 0

    @property
    def is_pole(self) -> bool:
        return self.m is None

    @property
    def mdot(self) -> complex:
        """``(bdot c - b cdot) / c^2``."""
        if self.m is None:
            raise PoleError(f"z={self.z} is a pole")
        return (self.bdot * self.c - self.b * self.cdot) / (self.c * self.c)

    def to_dict(self) -> dict:
        def cz(v):
            return None if v is None else [float(np.real(v)), float(np.imag(v))]

        return {
            "edge": self.edge_index,
            "z": cz(self.z),
            "b": cz(self.b),
            "c": cz(self.c),
            "bdot": cz(self.bdot),
            "cdot": cz(self.cdot),
            "m": cz(self.m),
            "pole": self.is_pole,
        }


def is_pole(b: complex, c: complex, tol: float) -> bool:
    return abs(c) < tol * max(1.0, abs(b))


def _boundary_rows(edge: EdgeSpec, Y: np.ndarray) -> tuple[complex, complex]:
    ca, sa = math.cos(edge.alpha), math.sin(edge.alpha)
    return Y[0, 0] * ca + Y[1, 0] * sa, Y[0, 1] * ca + Y[1, 1] * sa


def char_entries(edge: EdgeSpec, z: complex, settings: SolverSettings | None = None,
                 edge_index: int = 0, with_derivative: bool = True) -> WeylSample:
    """``b, c`` and their ``z``-derivatives from one integration to ``x = l``."""
    settings = settings or DEFAULT_SETTINGS
    z = complex(z)
    if with_derivative:
        Y, Yd = propagate_path(edge, [edge.length], z, with_derivative=True, settings=settings)
        bd, cd = _boundary_rows(edge, Yd[0])
    else:
        Y = propagate_path(edge, [edge.length], z, settings=settings)
        bd = cd = complex("nan")
    b, c = _boundary_rows(edge, Y[0])
    if z.imag == 0.0:
        b, c = complex(b.real), complex(c.real)
        bd, cd = complex(bd.real), complex(cd.real)
    mv = None if is_pole(b, c, settings.root_tol) else b / c
    return WeylSample(z=z, b=complex(b), c=complex(c), bdot=complex(bd), cdot=complex(cd),
                      m=mv, edge_index=edge_index)


def char_entries_many(graph: StarGraph, z: complex, settings: SolverSettings | None = None,
                      with_derivative: bool = True) -> list[WeylSample]:
    return [char_entries(e, z, settings, j, with_derivative) for j, e in enumerate(graph.edges)]


def m(edge: EdgeSpec, z: complex, settings: SolverSettings | None = None) -> complex:
    """Weyl function ``m(z) = b(z) / c(z)``; raises :class:`PoleError` at poles."""
    s = char_entries(edge, z, settings, with_derivative=False)
    if s.m is None:
        raise PoleError(f"z={z} is a pole of m (|c|={abs(s.c):.3g})")
    return s.m


def mdot(edge: EdgeSpec, z: complex, settings: SolverSettings | None = None) -> complex:
    """``dm/dz`` computed from ``(b, bdot, c, cdot)``."""
    return char_entries(edge, z, settings).mdot


def _inv_tau(tau: float) -> float:
    if tau == 0.0:
        raise ValueError("tau = 0 is the decoupled operator; m_tau is undefined")
    return 0.0 if math.isinf(tau) else 1.0 / tau


def m_tau(graph: StarGraph, tau: float, z: complex, settings: SolverSettings | None = None) -> complex:
    """``1/tau + sum_j m_j(z)`` with ``1/inf = 0``."""
    inv = _inv_tau(float(tau))
    return inv + sum(m(e, z, settings) for e in graph.edges)


def m_tau_dot(graph: StarGraph, z: complex, settings: SolverSettings | None = None) -> complex:
    """``d m_tau / dz = sum_j dm_j/dz`` (independent of tau)."""
    return sum(mdot(e, z, settings) for e in graph.edges)


def weyl_matrix(graph: StarGraph, z: complex, settings: SolverSettings | None = None) -> np.ndarray:
    """``M(z) = diag(m_1(z), ..., m_n(z))``."""
    return np.diag([m(e, z, settings) for e in graph.edges]).astype(complex)


def nevanlinna_kernel(edge: EdgeSpec, z: complex, zeta: complex,
                      settings: SolverSettings | None = None) -> complex:
    """``(m(z) - conj m(zeta)) / (z - conj zeta)``; on the diagonal ``Im m / Im z``."""
    z, zeta = complex(z), complex(zeta)
    denom = z - zeta.conjugate()
    if abs(denom) < 1e-14 * max(1.0, abs(z)):
        raise ValueError(f"degenerate pair: z={z} equals conj(zeta)")
    return (m(edge, z, settings) - np.conj(m(edge, zeta, settings))) / denom


def free_c(edge: EdgeSpec, z: complex) -> complex:
    """``c`` of the potential-free edge: ``sin(alpha - l z)``."""
    return complex(np.sin(edge.alpha - edge.length * complex(z)))
