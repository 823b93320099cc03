"""Dislocation index of edge operators and the graph-level counting bound.

``kappa`` of an edge measures the imbalance between eigenvalues in ``[0, R)``
and ``[-R, 0)`` once ``R`` sits half-way between free eigenvalues
``(alpha + k pi)/l``.  Two independent routes are provided:

* counting with Pruefer-angle eigenvalue counts once the localization of the
  eigenvalues near the free ones has stabilized;
* an argument integral of ``r = c / c0`` along the vertical line through a
  point ``omega`` of the central spectral gap, with ``c0 = sin(alpha - l z)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .graph import EdgeSpec, SolverSettings, StarGraph
from .propagator import DEFAULT_SETTINGS, prufer_angle, propagate_path
from .spectrum import d_R, edge_eigenvalues, robin_spectrum

__all__ = [
    "StabilizationError",
    "KappaCount",
    "KappaIntegral",
    "DislocationReport",
    "kappa_counting",
    "kappa_counting_details",
    "kappa_integral",
    "kappa_integral_details",
    "kappa_from_eigenvalues",
    "central_gap",
    "dislocation_report",
]

log = logging.getLogger(__name__)

STABLE_RUN = 5


class StabilizationError(RuntimeError):
    """The eigenvalue localization did not stabilize within the scan budget."""


# ----------------------------------------------------------------------------
# Counting route
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class KappaCount:
    kappa: int
    delta: float
    K: int
    n_plus: int
    n_minus: int


class _AngleCache:
    """Pruefer angles at ``l`` cached by spectral parameter."""

    def __init__(self, edge: EdgeSpec, settings: SolverSettings):
        self.edge = edge
        self.settings = settings
        self.t0 = edge.alpha + 0.5 * math.pi
        self._cache: dict[float, float] = {}

    def theta(self, lam: float) -> float:
        v = self._cache.get(lam)
        if v is None:
            v = prufer_angle(self.edge, lam, self.settings)
            self._cache[lam] = v
        return v

    def count(self, a: float, b: float) -> int:
        """Eigenvalues in ``[a, b)``."""
        if b <= a:
            return 0
        ta, tb = self.theta(a), self.theta(b)
        return int(math.ceil((tb - self.t0) / math.pi) - math.ceil((ta - self.t0) / math.pi))

    def on_eigenvalue(self, lam: float, tol: float = 1e-9) -> bool:
        u = (self.theta(lam) - self.t0) / math.pi
        return abs(u - round(u)) < tol * max(1.0, abs(u))


def _free(edge: EdgeSpec, k: int) -> float:
    return (edge.alpha + k * math.pi) / edge.length


def kappa_counting_details(edge: EdgeSpec, delta: Optional[float] = None,
                           settings: SolverSettings | None = None, k_max: int = 400) -> KappaCount:
    """Counting value of ``kappa`` for one ``delta`` with the stabilization index found.

    ``K`` is the first index such that for ``STABLE_RUN`` consecutive ``k >= K``
    and both signs each window ``[mu0_k - delta, mu0_k + delta)`` holds exactly
    one eigenvalue and each gap ``[mu0_k + delta, mu0_{k+1} - delta)`` none,
    and ``[mu0_{-K} - delta, mu0_{K-1} + delta)`` holds ``2K`` eigenvalues.
    """
    settings = settings or DEFAULT_SETTINGS
    if delta is None:
        delta = math.pi / (4.0 * edge.length)
    if not (0.0 < delta < math.pi / (2.0 * edge.length)):
        raise ValueError(f"delta must lie in (0, pi/(2l)), got {delta}")
    ang = _AngleCache(edge, settings)

    def localized(k: int) -> bool:
        # one eigenvalue near mu0_k and none in the following gap
        lo_k, hi_k = _free(edge, k) - delta, _free(edge, k) + delta
        nxt = _free(edge, k + 1) - delta
        if ang.on_eigenvalue(lo_k) or ang.on_eigenvalue(hi_k):
            return False
        return ang.count(lo_k, hi_k) == 1 and ang.count(hi_k, nxt) == 0

    def good(k: int) -> bool:
        return localized(k) and localized(-k) and localized(-k - 1)

    run = 0
    k = 1
    while k <= k_max:
        if good(k):
            run += 1
        else:
            run = 0
        if run >= STABLE_RUN:
            K = k - STABLE_RUN + 1
            a = _free(edge, -K) - delta
            b = _free(edge, K - 1) + delta
            if ang.count(a, b) == 2 * K:
                n_plus = ang.count(0.0, b)
                n_minus = ang.count(a, 0.0)
                return KappaCount(n_plus - n_minus, delta, K, n_plus, n_minus)
            run -= 1  # total count not yet balanced; slide the window
        k += 1
    raise StabilizationError(f"eigenvalue localization did not stabilize for |k| <= {k_max}")


def kappa_counting(edge: EdgeSpec, settings: SolverSettings | None = None, delta: Optional[float] = None) -> int:
    """Dislocation index of an edge by eigenvalue counting.

    Recomputed with ``delta / 2``; both values must agree and be even.
    """
    if delta is None:
        delta = math.pi / (4.0 * edge.length)
    first = kappa_counting_details(edge, delta, settings)
    second = kappa_counting_details(edge, 0.5 * delta, settings)
    if first.kappa != second.kappa:
        raise StabilizationError(f"kappa depends on delta: {first.kappa} vs {second.kappa}")
    if first.kappa % 2:
        raise StabilizationError(f"kappa={first.kappa} is odd")
    return first.kappa


def kappa_from_eigenvalues(edge: EdgeSpec, eigs: Sequence[float], k: int, delta: Optional[float] = None) -> int:
    """Counting formula applied to a given list of eigenvalues at a fixed ``k``."""
    if delta is None:
        delta = math.pi / (4.0 * edge.length)
    eigs = np.asarray(eigs, dtype=float)
    b = _free(edge, k - 1) + delta
    a = _free(edge, -k) - delta
    n_plus = int(np.sum((eigs >= 0.0) & (eigs < b)))
    n_minus = int(np.sum((eigs >= a) & (eigs < 0.0)))
    return n_plus - n_minus


# ----------------------------------------------------------------------------
# Argument route
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class KappaIntegral:
    kappa: int
    value: float
    residual: float
    omega: float
    M: float
    estimates: tuple


def central_gap(edge: EdgeSpec, settings: SolverSettings | None = None) -> tuple[float, float]:
    """``(max sigma(T) cap (-inf, 0), min sigma(T) cap [0, inf))``."""
    settings = settings or DEFAULT_SETTINGS
    span = 2.0 * math.pi / edge.length + edge.potential_bound
    for _ in range(30):
        eigs = edge_eigenvalues(edge, (-span, span), settings)
        neg = eigs[eigs < 0.0]
        pos = eigs[eigs >= 0.0]
        if neg.size and pos.size:
            return float(neg.max()), float(pos.min())
        span *= 2.0
    raise StabilizationError("could not locate the central spectral gap")


def _scaled_ratio(edge: EdgeSpec, omega: float, s: float, settings: SolverSettings) -> complex:
    """``c(z) / c0(z)`` at ``z = omega + i s`` computed without overflow."""
    l = edge.length
    sigma = abs(s)
    Y = propagate_path(edge, [l], complex(omega, s), settings=settings, sigma=sigma)[0]
    c_scaled = Y[0, 1] * math.cos(edge.alpha) + Y[1, 1] * math.sin(edge.alpha)
    a = edge.alpha - l * omega
    if s >= 0:
        c0_scaled = (np.exp(1j * a) - np.exp(-1j * a) * math.exp(-2.0 * l * s)) / 2j
    else:
        c0_scaled = (np.exp(1j * a) * math.exp(2.0 * l * s) - np.exp(-1j * a)) / 2j
    return complex(c_scaled / c0_scaled)


class _ArgTracker:
    """Continuous argument of ``r(omega + i s)`` for increasing ``s >= 0``."""

    MAX_JUMP = 0.3

    def __init__(self, edge: EdgeSpec, omega: float, settings: SolverSettings):
        self.edge = edge
        self.omega = omega
        self.settings = settings
        r0 = _scaled_ratio(edge, omega, 0.0, settings)
        if abs(r0.imag) > 1e-8 * max(1.0, abs(r0)):
            log.debug("r(omega) has imaginary part %g", r0.imag)
        self.arg0 = math.atan2(0.0, r0.real) if r0.real != 0 else 0.0
        self.s = 0.0
        self.arg = self.arg0
        self.r = r0
        self.ds = 0.05 / edge.length

    def advance(self, target: float):
        while self.s < target:
            ds = min(self.ds, target - self.s)
            while True:
                s_new = self.s + ds
                r_new = _scaled_ratio(self.edge, self.omega, s_new, self.settings)
                jump = float(np.angle(r_new / self.r))
                if abs(jump) <= self.MAX_JUMP or ds < 1e-10:
                    break
                ds *= 0.5
            self.s, self.r = s_new, r_new
            self.arg += jump
            # geometric growth: r varies on the scale of s itself
            self.ds = max(ds, 0.15 * self.s) if abs(jump) < 0.5 * self.MAX_JUMP else ds
        return self.arg


def kappa_integral_details(edge: EdgeSpec, omega: Optional[float] = None,
                           settings: SolverSettings | None = None, tol: float = 1e-4,
                           M0: Optional[float] = None, M_max: float = 2.0 ** 22) -> KappaIntegral:
    """Argument-integral value of ``kappa`` with Richardson extrapolation in ``1/M``.

    ``kappa = -(2/pi) (arg r(omega + iM) - arg r(omega)) - 2 ceil((l omega - alpha)/pi)``
    in the limit ``M -> inf``; the second term accounts for free eigenvalues
    between ``0`` and ``omega``.
    """
    settings = settings or DEFAULT_SETTINGS
    lo, hi = central_gap(edge, settings)
    if omega is None:
        omega = _default_omega(edge, lo, hi)
    omega = float(omega)
    if not (lo < omega < hi):
        raise ValueError(f"omega={omega} is outside the central gap ({lo}, {hi})")
    u = (edge.length * omega - edge.alpha) / math.pi
    if abs(u - round(u)) < 1e-9:
        raise ValueError(f"omega={omega} is a free eigenvalue; choose another point of the gap")
    shift = -2.0 * math.ceil(u)
    tracker = _ArgTracker(edge, omega, settings)
    M = M0 if M0 is not None else 8.0 * (1.0 + edge.potential_bound) / edge.length
    raw = []
    extrap = []
    while True:
        arg = tracker.advance(M)
        val = -2.0 / math.pi * (arg - tracker.arg0) + shift
        raw.append((M, val))
        if len(raw) >= 2:
            extrap.append(2.0 * raw[-1][1] - raw[-2][1])
        if len(extrap) >= 2 and abs(extrap[-1] - extrap[-2]) < tol:
            best = extrap[-1]
            break
        if M >= M_max:
            best = extrap[-1] if extrap else val
            log.warning("argument integral not converged at M=%g", M)
            break
        M *= 2.0
    k = int(round(best))
    return KappaIntegral(kappa=k, value=best, residual=abs(best - k), omega=omega, M=M,
                         estimates=tuple(raw))


def _default_omega(edge: EdgeSpec, lo: float, hi: float) -> float:
    """Midpoint of the gap, nudged off free eigenvalues."""
    for frac in (0.5, 0.4, 0.6, 0.3, 0.7):
        w = lo + frac * (hi - lo)
        u = (edge.length * w - edge.alpha) / math.pi
        if abs(u - round(u)) > 1e-3:
            return w
    return lo + 0.45 * (hi - lo)


def kappa_integral(edge: EdgeSpec, omega: Optional[float] = None,
                   settings: SolverSettings | None = None) -> int:
    """Dislocation index from the argument of ``c / c0`` along ``omega + i s``."""
    return kappa_integral_details(edge, omega, settings).kappa


# ----------------------------------------------------------------------------
# Graph report
# ----------------------------------------------------------------------------


@dataclass
class DislocationReport:
    kappa: list[int]
    kappa0: int
    n_ge: int
    n_le: int
    d_R: list[tuple[float, int]]
    bound_ok: list[bool]
    edge_deviation: list[list[int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.bound_ok) and all(k % 2 == 0 for k in self.kappa)

    def to_dict(self) -> dict:
        return {
            "schema": "dislocation-report/1",
            "kappa": self.kappa,
            "kappa0": self.kappa0,
            "n_ge": self.n_ge,
            "n_le": self.n_le,
            "d_R": [{"R": R, "d_R": d} for R, d in self.d_R],
            "bound_ok": self.bound_ok,
            "edge_deviation": self.edge_deviation,
            "ok": self.ok,
        }


def dislocation_report(graph: StarGraph, tau: float, R_list: Sequence[float],
                       settings: SolverSettings | None = None, edge_details: bool = False) -> DislocationReport:
    """Per-edge ``kappa``, their sum ``kappa0`` and the two-sided bound on ``d_R - kappa0``.

    The bound reads ``-(n_ge + 2) <= d_R - kappa0 <= n_le + 2`` with ``n_ge``
    (``n_le``) the number of edges with ``alpha >= pi/2`` (``<= pi/2``).
    With ``edge_details`` the per-edge deviations ``d_R(T_j) - kappa_j`` are
    recorded as well.
    """
    settings = settings or DEFAULT_SETTINGS
    R_list = [float(R) for R in R_list]
    if any(b <= a for a, b in zip(R_list, R_list[1:])):
        raise ValueError("R_list must be increasing")
    kappas = [kappa_counting(e, settings) for e in graph.edges]
    kappa0 = int(sum(kappas))
    half = 0.5 * math.pi
    eps = 1e-12
    n_ge = sum(1 for e in graph.edges if e.alpha >= half - eps)
    n_le = sum(1 for e in graph.edges if e.alpha <= half + eps)
    Rmax = max(R_list)
    window = (-Rmax - 1e-6, Rmax + 1e-6)
    spec = robin_spectrum(graph, tau, window, settings)
    samples = []
    oks = []
    for R in R_list:
        d = d_R(spec, R)
        samples.append((R, d))
        oks.append(-(n_ge + 2) <= d - kappa0 <= n_le + 2)
    deviations = []
    if edge_details:
        for e, kj in zip(graph.edges, kappas):
            eigs = edge_eigenvalues(e, window, settings)
            row = []
            for R in R_list:
                dj = int(np.sum((eigs >= 0) & (eigs < R)) - np.sum((eigs >= -R) & (eigs < 0)))
                row.append(dj - kj)
            deviations.append(row)
    return DislocationReport(kappas, kappa0, n_ge, n_le, samples, oks, deviations)
