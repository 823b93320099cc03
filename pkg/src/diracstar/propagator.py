"""Fundamental matrices of the edge systems ``-J Y' + V Y = z Y``, ``Y(0) = I``.

All integrations go through the compiled DOP853 kernel in :mod:`._rk`.  Step
points are forced onto the potential knots and onto every requested output
point, so results at a given ``(edge, x, z)`` do not depend on which other
points are requested alongside it only through the step sequence between
knots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from . import _rk
from .graph import EdgeSpec, SolverSettings

__all__ = [
    "J",
    "PropagationError",
    "PropagatorResult",
    "DEFAULT_SETTINGS",
    "propagate",
    "propagate_with_derivative",
    "propagate_path",
    "free_propagator",
    "free_propagator_derivative",
    "diagonalized_residual",
    "prufer_angle",
    "prufer_count",
    "DIAGONALIZER",
    "quadrature_nodes",
    "endpoint_matrix_real",
]

J = np.array([[0.0, -1.0], [1.0, 0.0]])
DIAGONALIZER = np.array([[1.0, 1.0], [-1j, 1j]]) / math.sqrt(2.0)
DEFAULT_SETTINGS = SolverSettings()


class PropagationError(RuntimeError):
    """The integrator failed; ``x`` is the location where it stopped."""

    def __init__(self, message: str, x: float):
        super().__init__(f"{message} at x={x:.12g}")
        self.x = x


@dataclass(frozen=True)
class PropagatorResult:
    Y: np.ndarray
    x: float
    z: complex
    Ydot: Optional[np.ndarray] = None


_STATUS_TEXT = {
    _rk.STATUS_UNDERFLOW: "step size underflow",
    _rk.STATUS_TOO_MANY_STEPS: "step budget exhausted",
    _rk.STATUS_NONFINITE: "non-finite state",
}


def _segments_uncached(edge: EdgeSpec, xs_out: np.ndarray):
    """Merge knots and outputs into stops with per-segment linear coefficients."""
    kx, kp, kq = edge.knots
    xmax = float(xs_out[-1])
    stops = np.unique(np.concatenate(([0.0], kx[kx < xmax], xs_out)))
    mids = 0.5 * (stops[:-1] + stops[1:])
    idx = np.clip(np.searchsorted(kx, mids, side="right") - 1, 0, kx.size - 2)
    width = kx[idx + 1] - kx[idx]
    seg_x0 = kx[idx].astype(float)
    seg_p0 = kp[idx].astype(float)
    seg_q0 = kq[idx].astype(float)
    seg_dp = (kp[idx + 1] - kp[idx]) / width
    seg_dq = (kq[idx + 1] - kq[idx]) / width
    record = np.isin(stops, xs_out)
    return stops, seg_x0, seg_p0, seg_dp, seg_q0, seg_dq, record


@lru_cache(maxsize=256)
def _segments_single(edge: EdgeSpec, x: float):
    return _segments_uncached(edge, np.array([x]))


def _segments(edge: EdgeSpec, xs_out: np.ndarray):
    if xs_out.size == 1:
        return _segments_single(edge, float(xs_out[0]))
    return _segments_uncached(edge, xs_out)


def _run(edge: EdgeSpec, xs_out, z: complex, mode: int, y0: np.ndarray,
         settings: SolverSettings, sigma: float = 0.0, step_cap: float = 0.0) -> np.ndarray:
    xs_out = np.atleast_1d(np.asarray(xs_out, dtype=float))
    if xs_out.size == 0:
        return np.zeros((0, y0.size), dtype=complex)
    if np.any(xs_out < 0.0) or np.any(xs_out > edge.length):
        bad = xs_out[(xs_out < 0.0) | (xs_out > edge.length)][0]
        raise ValueError(f"x={bad} outside edge [0, {edge.length}]")
    if xs_out.size == 1:
        uniq, inverse = xs_out, np.zeros(1, dtype=int)
    else:
        uniq, inverse = np.unique(xs_out, return_inverse=True)
    if uniq[-1] == 0.0:
        return np.repeat(y0[None, :].astype(complex), xs_out.size, axis=0)
    stops, sx0, sp0, sdp, sq0, sdq, record = _segments(edge, uniq)
    z = complex(z)
    if z.imag == 0.0:
        # real spectral parameter: real state, half the arithmetic
        zarg = z.real
        yarg = np.ascontiguousarray(y0.real, dtype=np.float64)
    else:
        zarg = z
        yarg = y0.astype(np.complex128)
    states, status, fail_x, _ = _rk.integrate(
        mode, stops, sx0, sp0, sdp, sq0, sdq, record, yarg,
        zarg, float(sigma), settings.ode_rtol, settings.ode_atol, float(step_cap))
    if status != _rk.STATUS_OK:
        raise PropagationError(_STATUS_TEXT.get(status, f"integrator status {status}"), float(fail_x))
    return states[inverse]


_Y0_REAL = np.array([1.0, 0.0, 0.0, 1.0])
_THETA0 = np.array([0.5 * math.pi])


def endpoint_matrix_real(edge: EdgeSpec, lam: float, settings: SolverSettings | None = None) -> np.ndarray:
    """Real ``Y(l, lam)`` for real ``lam``; lean path used inside root finders."""
    settings = settings or DEFAULT_SETTINGS
    stops, sx0, sp0, sdp, sq0, sdq, record = _segments_single(edge, edge.length)
    states, status, fail_x, _ = _rk.integrate(
        0, stops, sx0, sp0, sdp, sq0, sdq, record, _Y0_REAL, float(lam), 0.0,
        settings.ode_rtol, settings.ode_atol, 0.0)
    if status != _rk.STATUS_OK:
        raise PropagationError(_STATUS_TEXT.get(status, f"integrator status {status}"), float(fail_x))
    return states[0].reshape(2, 2)


_Y0 = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex)
_YD0 = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], dtype=complex)


def propagate_path(edge: EdgeSpec, xs, z: complex, with_derivative: bool = False,
                   settings: SolverSettings | None = None, sigma: float = 0.0):
    """Fundamental matrix at every point of ``xs``.

    Returns an array of shape ``(len(xs), 2, 2)``; with ``with_derivative`` a
    pair ``(Y, Ydot)``.  A positive ``sigma`` returns ``exp(-sigma x) Y`` (and
    likewise for ``Ydot``), which keeps large ``|Im z|`` from overflowing.
    """
    settings = settings or DEFAULT_SETTINGS
    if with_derivative:
        st = _run(edge, xs, z, 1, _YD0, settings, sigma)
        st = st.astype(complex)
        return st[:, :4].reshape(-1, 2, 2), st[:, 4:].reshape(-1, 2, 2)
    st = _run(edge, xs, z, 0, _Y0, settings, sigma)
    return st.astype(complex).reshape(-1, 2, 2)


def propagate(edge: EdgeSpec, x: float, z: complex,
              settings: SolverSettings | None = None) -> PropagatorResult:
    """Fundamental matrix ``Y(x, z)``."""
    Y = propagate_path(edge, [x], z, settings=settings)[0]
    return PropagatorResult(Y=Y, x=float(x), z=complex(z))


def propagate_with_derivative(edge: EdgeSpec, x: float, z: complex,
                              settings: SolverSettings | None = None) -> PropagatorResult:
    """``Y(x, z)`` and its ``z``-derivative, integrated jointly."""
    Y, Yd = propagate_path(edge, [x], z, with_derivative=True, settings=settings)
    return PropagatorResult(Y=Y[0], x=float(x), z=complex(z), Ydot=Yd[0])


def free_propagator(edge: EdgeSpec, x: float, z: complex) -> np.ndarray:
    """Rotation matrix with angle ``x z``: the fundamental matrix for ``V = 0``."""
    if not (0.0 <= x <= edge.length):
        raise ValueError(f"x={x} outside edge [0, {edge.length}]")
    w = x * complex(z)
    c, s = np.cos(w), np.sin(w)
    return np.array([[c, -s], [s, c]], dtype=complex)


def free_propagator_derivative(x: float, z: complex) -> np.ndarray:
    """``z``-derivative of the rotation matrix."""
    w = x * complex(z)
    c, s = np.cos(w), np.sin(w)
    return x * np.array([[-s, -c], [c, -s]], dtype=complex)


def diagonalized_residual(edge: EdgeSpec, x: float, z: complex,
                          settings: SolverSettings | None = None, points: int = 65) -> float:
    """Residual of the fundamental matrix in the frame that diagonalizes ``J``.

    With ``H = W* Y W`` and ``r = p + i q`` the transformed system reads
    ``diag(i, -i) H' - [[0, r], [conj r, 0]] H + z H = 0``.  ``H`` is sampled on
    ``points`` nodes of ``[0, x]``; ``H'`` is obtained from the integrated
    ``Y`` and the original right-hand side, so the residual measures whether
    the transformation is consistent with the computed solution.  Returned
    relative to ``max(1, |z|) * max ||H||``.
    """
    settings = settings or DEFAULT_SETTINGS
    if not (0.0 <= x <= edge.length):
        raise ValueError(f"x={x} outside edge [0, {edge.length}]")
    if x == 0.0:
        return 0.0
    xs = np.linspace(0.0, x, points)
    Ys = propagate_path(edge, xs, z, settings=settings)
    kx, kp, kq = edge.knots
    ps = np.interp(xs, kx, kp)
    qs = np.interp(xs, kx, kq)
    W = DIAGONALIZER
    Ws = W.conj().T
    JD = np.diag([1j, -1j])
    worst = 0.0
    scale = 1.0
    for Y, p, q in zip(Ys, ps, qs):
        V = np.array([[p, q], [q, -p]])
        dY = J @ ((z * np.eye(2) - V) @ Y)
        H = Ws @ Y @ W
        dH = Ws @ dY @ W
        r = p + 1j * q
        R = np.array([[0.0, r], [np.conj(r), 0.0]])
        res = JD @ dH - R @ H + z * H
        worst = max(worst, float(np.linalg.norm(res, 2)))
        scale = max(scale, float(np.linalg.norm(H, 2)))
    return worst / (max(1.0, abs(z)) * scale)


def prufer_angle(edge: EdgeSpec, lam: float, settings: SolverSettings | None = None) -> float:
    """Continuous angle of the second column of ``Y(l, lam)`` for real ``lam``.

    ``theta(0) = pi/2`` and ``theta' = lam - p cos 2theta - q sin 2theta``; the
    angle is strictly increasing in ``lam``.  The step is capped so that the
    angle advances by at most about one radian per step.
    """
    settings = settings or DEFAULT_SETTINGS
    cap = abs(lam) + edge.potential_bound + 1.0
    stops, sx0, sp0, sdp, sq0, sdq, record = _segments_single(edge, edge.length)
    states, status, fail_x, _ = _rk.integrate(
        2, stops, sx0, sp0, sdp, sq0, sdq, record, _THETA0, float(lam), 0.0,
        settings.ode_rtol, settings.ode_atol, cap)
    if status != _rk.STATUS_OK:
        raise PropagationError(_STATUS_TEXT.get(status, f"integrator status {status}"), float(fail_x))
    return float(states[0, 0])


def prufer_count(edge: EdgeSpec, a: float, b: float, settings: SolverSettings | None = None) -> int:
    """Number of eigenvalues of the edge operator in ``[a, b)``.

    An eigenvalue is a point where the Pruefer angle at ``l`` crosses
    ``alpha + pi/2`` modulo ``pi``.
    """
    if b <= a:
        return 0
    t0 = edge.alpha + 0.5 * math.pi
    ta = prufer_angle(edge, a, settings)
    tb = prufer_angle(edge, b, settings)
    return int(math.ceil((tb - t0) / math.pi) - math.ceil((ta - t0) / math.pi))


def quadrature_nodes(edge: EdgeSpec, upper: float | None = None, z_scale: float = 0.0,
                     order: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on ``[0, upper]``.

    Panels never straddle a potential knot and are short compared with the
    local wavelength ``1 / (1 + z_scale + max|V|)``.
    """
    upper = edge.length if upper is None else float(upper)
    if upper <= 0.0:
        return np.zeros(0), np.zeros(0)
    kx = edge.knots[0]
    breaks = np.unique(np.concatenate(([0.0], kx[(kx > 0.0) & (kx < upper)], [upper])))
    hmax = min(0.25, 2.0 / (1.0 + z_scale + edge.potential_bound))
    gx, gw = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        m = max(1, int(math.ceil((b - a) / hmax)))
        edges_ = np.linspace(a, b, m + 1)
        for u, v in zip(edges_[:-1], edges_[1:]):
            half = 0.5 * (v - u)
            nodes.append(u + half * (gx + 1.0))
            weights.append(half * gw)
    return np.concatenate(nodes), np.concatenate(weights)
