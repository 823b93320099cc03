"""Eigenvalues of edge operators, the decoupled operator and Robin operators.

Edge eigenvalues are the real zeros of ``c``.  The scan is certified by the
Pruefer angle of the second column of ``Y``: it counts the zeros in every scan
cell exactly, and cells holding more than one zero are bisected until each
holds one bracketed sign change.

Robin eigenvalues (``tau != 0``) come in two kinds:

* ``SimpleRobin``: one zero of ``m_tau`` between consecutive distinct poles,
  found on the pole-free function ``D_tau = (1/tau) prod c_j + sum_j b_j prod_{k!=j} c_k``;
* ``CommonPole``: a point where ``nu + 1 >= 2`` edge functions ``c_j`` vanish,
  an eigenvalue of multiplicity ``nu`` for every ``tau``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .graph import EdgeSpec, GridFunction, SolverSettings, StarGraph
from .matching import robin_matrices
from .propagator import DEFAULT_SETTINGS, endpoint_matrix_real, prufer_angle, propagate_path
from .weyl import char_entries

__all__ = [
    "SIMPLE_ROBIN",
    "COMMON_POLE",
    "EDGE_EIGENVALUE",
    "ScanError",
    "SpectrumEntry",
    "Spectrum",
    "edge_eigenvalues",
    "edge_eigenvalue_indices",
    "robin_spectrum",
    "decoupled_spectrum",
    "count",
    "d_R",
    "InterlacingReport",
    "check_interlacing",
    "MonotonicityReport",
    "monotonicity_check",
    "eigenfunction",
    "parseval_check",
    "asymptotic_reference",
    "characteristic_function",
]

log = logging.getLogger(__name__)

SIMPLE_ROBIN = "SimpleRobin"
COMMON_POLE = "CommonPole"
EDGE_EIGENVALUE = "EdgeEigenvalue"

MAX_BISECTION_DEPTH = 60
XTOL = 1e-13
RTOL = 8 * np.finfo(float).eps


def _root(f, a: float, b: float) -> float:
    """Bracketed root; a root within ``XTOL`` of zero is returned as ``0.0``.

    The half-open counting intervals ``[0, R)`` and ``[-R, 0)`` need the sign
    of an eigenvalue at the origin, which the solver cannot resolve.
    """
    r = brentq(f, a, b, xtol=XTOL, rtol=RTOL)
    return 0.0 if abs(r) <= XTOL else r


class ScanError(RuntimeError):
    """Root separation failed past the refinement floor."""


@dataclass(frozen=True)
class SpectrumEntry:
    lam: float
    multiplicity: int
    tag: str


@dataclass
class Spectrum:
    window: tuple[float, float]
    entries: list[SpectrumEntry]
    descriptor: dict = field(default_factory=dict)

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues repeated according to multiplicity."""
        return np.array([e.lam for e in self.entries for _ in range(e.multiplicity)], dtype=float)

    @property
    def distinct(self) -> np.ndarray:
        return np.array([e.lam for e in self.entries], dtype=float)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([e.multiplicity for e in self.entries], dtype=int)

    def by_tag(self, tag: str) -> list[SpectrumEntry]:
        return [e for e in self.entries if e.tag == tag]

    def __len__(self) -> int:
        return len(self.entries)


# ----------------------------------------------------------------------------
# Edge eigenvalues
# ----------------------------------------------------------------------------


def _c_real(edge: EdgeSpec, lam: float, settings: SolverSettings) -> float:
    Y = endpoint_matrix_real(edge, lam, settings)
    return float(Y[0, 1] * math.cos(edge.alpha) + Y[1, 1] * math.sin(edge.alpha))


def _angle_count(t0: float, ta: float, tb: float) -> int:
    return int(math.ceil((tb - t0) / math.pi) - math.ceil((ta - t0) / math.pi))


def _safe_point(fn: Callable[[float], float], x: float, h: float, floor: float) -> tuple[float, float]:
    """Move ``x`` slightly until ``|fn(x)|`` is clearly nonzero."""
    v = fn(x)
    shift = 1e-3 * h
    tries = 0
    while abs(v) < floor and tries < 8:
        x = x + shift
        v = fn(x)
        shift *= 1.7
        tries += 1
    return x, v


def edge_eigenvalues(edge: EdgeSpec, window: Sequence[float],
                     settings: SolverSettings | None = None) -> np.ndarray:
    """All zeros of ``c`` in the closed window ``[lo, hi]``, sorted.

    The window is padded slightly so that eigenvalues at ``lo`` or ``hi`` are
    bracketed from both sides.
    """
    settings = settings or DEFAULT_SETTINGS
    lo, hi = float(window[0]), float(window[1])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("window must be finite")
    if hi < lo:
        raise ValueError("window must satisfy lo <= hi")
    h = math.pi / (4.0 * edge.length)
    pad = 1e-3 * h
    a, b = lo - pad, hi + pad
    ncell = max(1, int(math.ceil((b - a) / h)))
    xs = np.linspace(a, b, ncell + 1)
    cfun = lambda lam: _c_real(edge, lam, settings)
    floor = 1e-6
    t0 = edge.alpha + 0.5 * math.pi
    pts = []
    for i, x in enumerate(xs):
        if 0 < i < len(xs) - 1:
            x, v = _safe_point(cfun, float(x), h, floor)
        else:
            v = cfun(float(x))
            if abs(v) < floor:
                # push the end outwards
                step = -1e-3 * h if i == 0 else 1e-3 * h
                k = 0
                while abs(v) < floor and k < 8:
                    x = x + step
                    v = cfun(float(x))
                    step *= 1.7
                    k += 1
        pts.append((float(x), v, prufer_angle(edge, float(x), settings)))

    roots: list[float] = []

    def solve(pa, pb, depth):
        (xa, ca, ta), (xb, cb, tb) = pa, pb
        k = _angle_count(t0, ta, tb)
        sign_change = ca * cb < 0
        if k <= 1 and sign_change:
            if k == 0:
                log.debug("angle count 0 but sign change on [%g, %g]", xa, xb)
            roots.append(_root(cfun, xa, xb))
            return
        if k == 0:
            return
        if depth >= MAX_BISECTION_DEPTH or xb - xa < 1e-12 * max(1.0, abs(xa)):
            if k == 1:
                log.debug("unresolved single count on [%g, %g]", xa, xb)
                return
            raise ScanError(f"cannot separate {k} eigenvalues in [{xa:.15g}, {xb:.15g}]")
        xm = 0.5 * (xa + xb)
        xm, cm = _safe_point(cfun, xm, xb - xa, floor * 1e-3)
        if not (xa < xm < xb):
            xm = 0.5 * (xa + xb)
            cm = cfun(xm)
        pm = (xm, cm, prufer_angle(edge, xm, settings))
        solve(pa, pm, depth + 1)
        solve(pm, pb, depth + 1)

    for pa, pb in zip(pts[:-1], pts[1:]):
        solve(pa, pb, 0)
    roots = sorted(r for r in roots if lo <= r <= hi)
    return np.array(roots, dtype=float)


def edge_eigenvalue_indices(edge: EdgeSpec, eigs: Sequence[float],
                            settings: SolverSettings | None = None) -> np.ndarray:
    """Integer labels ``k`` of edge eigenvalues, comparable with ``(alpha + k pi)/l``.

    The label is read off the Pruefer angle at the eigenvalue: it equals
    ``alpha + pi/2 + k pi``.  For the free edge this is exactly the index of
    ``(alpha + k pi)/l``, and perturbed labels follow the nearest free value
    for large ``|k|``.
    """
    t0 = edge.alpha + 0.5 * math.pi
    return np.array([int(round((prufer_angle(edge, float(mu), settings) - t0) / math.pi)) for mu in eigs],
                    dtype=int)


def asymptotic_reference(edge: EdgeSpec, k: int) -> float:
    """Free eigenvalue ``(alpha + k pi) / l``."""
    return (edge.alpha + k * math.pi) / edge.length


# ----------------------------------------------------------------------------
# Decoupled and Robin spectra
# ----------------------------------------------------------------------------


def _cluster(points: list[tuple[float, int]], tol: float) -> list[list[tuple[float, int]]]:
    points = sorted(points)
    groups: list[list[tuple[float, int]]] = []
    for p in points:
        if groups and p[0] - groups[-1][-1][0] <= tol:
            groups[-1].append(p)
        else:
            groups.append([p])
    return groups


def _descriptor(graph: StarGraph, tau: float) -> dict:
    return {"graph": graph.fingerprint(), "matching": "robin", "tau": "inf" if math.isinf(tau) else tau}


def _refine_common(graph: StarGraph, members: list[int], lam: float, settings: SolverSettings) -> float:
    """Gauss-Newton on ``sum_j c_j^2`` over the edges sharing the pole."""
    for _ in range(4):
        num = 0.0
        den = 0.0
        for j in members:
            s = char_entries(graph.edges[j], lam, settings)
            num += s.c.real * s.cdot.real
            den += s.cdot.real ** 2
        if den == 0.0:
            break
        step = num / den
        lam -= step
        if abs(step) < 1e-15 * max(1.0, abs(lam)):
            break
    return lam


def _edge_poles(graph: StarGraph, window, settings: SolverSettings):
    """Edge eigenvalues of all edges, clustered into distinct points."""
    pts = []
    for j, e in enumerate(graph.edges):
        pts.extend((float(mu), j) for mu in edge_eigenvalues(e, window, settings))
    return _cluster(pts, 10.0 * settings.root_tol)


def decoupled_spectrum(graph: StarGraph, window: Sequence[float],
                       settings: SolverSettings | None = None) -> Spectrum:
    """Multiset union of the edge spectra (``tau = 0``)."""
    settings = settings or DEFAULT_SETTINGS
    lo, hi = float(window[0]), float(window[1])
    entries = []
    for grp in _edge_poles(graph, (lo, hi), settings):
        lam = float(np.mean([p[0] for p in grp]))
        entries.append(SpectrumEntry(lam, len(grp), EDGE_EIGENVALUE))
    return Spectrum((lo, hi), entries, _descriptor(graph, 0.0))


def characteristic_function(graph: StarGraph, tau: float, settings: SolverSettings | None = None):
    """Real function ``lam -> D_tau(lam)``; its zeros off the edge poles are Robin eigenvalues."""
    settings = settings or DEFAULT_SETTINGS
    inv = 0.0 if math.isinf(tau) else 1.0 / tau

    def D(lam: float) -> float:
        bs, cs = [], []
        for e in graph.edges:
            Y = endpoint_matrix_real(e, lam, settings)
            ca, sa = math.cos(e.alpha), math.sin(e.alpha)
            bs.append(Y[0, 0] * ca + Y[1, 0] * sa)
            cs.append(Y[0, 1] * ca + Y[1, 1] * sa)
        total = inv * math.prod(cs)
        for j in range(len(bs)):
            total += bs[j] * math.prod(cs[:j] + cs[j + 1:])
        return total

    return D


def _m_tau_real(graph: StarGraph, tau: float, lam: float, settings: SolverSettings) -> float:
    inv = 0.0 if math.isinf(tau) else 1.0 / tau
    total = inv
    for e in graph.edges:
        s = char_entries(e, lam, settings, with_derivative=False)
        total += s.b.real / s.c.real
    return total


def _gap_root(D, a: float, b: float) -> Optional[float]:
    """Zero of ``D`` in ``(a, b)`` with the ends pulled off the poles."""
    width = b - a
    delta = 1e-3 * width
    while delta > 1e-13 * max(1.0, abs(a), abs(b)):
        xa, xb = a + delta, b - delta
        da, db = D(xa), D(xb)
        if da == 0.0:
            return xa
        if db == 0.0:
            return xb
        if da * db < 0:
            return _root(D, xa, xb)
        delta *= 0.1
    return None


def robin_spectrum(graph: StarGraph, tau: float, window: Sequence[float],
                   settings: SolverSettings | None = None) -> Spectrum:
    """Eigenvalues of the Robin operator in the closed window, with multiplicities and tags."""
    settings = settings or DEFAULT_SETTINGS
    tau = float(tau)
    if math.isinf(tau):
        tau = math.inf
    lo, hi = float(window[0]), float(window[1])
    if tau == 0.0:
        return decoupled_spectrum(graph, (lo, hi), settings)
    groups = _edge_poles(graph, (lo, hi), settings)
    poles = [float(np.mean([p[0] for p in g])) for g in groups]
    D = characteristic_function(graph, tau, settings)
    entries: list[SpectrumEntry] = []

    for g, p in zip(groups, poles):
        if len(g) >= 2:
            members = sorted({j for _, j in g})
            lam = _refine_common(graph, members, p, settings)
            entries.append(SpectrumEntry(lam, len(g) - 1, COMMON_POLE))

    for a, b in zip(poles[:-1], poles[1:]):
        r = _gap_root(D, a, b)
        if r is None:
            raise ScanError(f"no sign change of the characteristic function between poles {a:.15g} and {b:.15g}")
        entries.append(SpectrumEntry(r, 1, SIMPLE_ROBIN))

    # end pieces: m_tau increases from -inf to +inf between poles
    def m_at(x):
        return _m_tau_real(graph, tau, x, settings)

    if poles:
        if poles[0] > lo and m_at(lo) <= 0.0:
            r = lo if m_at(lo) == 0.0 else _end_root(D, lo, poles[0], left=True)
            if r is not None:
                entries.append(SpectrumEntry(r, 1, SIMPLE_ROBIN))
        if poles[-1] < hi and m_at(hi) >= 0.0:
            r = hi if m_at(hi) == 0.0 else _end_root(D, poles[-1], hi, left=False)
            if r is not None:
                entries.append(SpectrumEntry(r, 1, SIMPLE_ROBIN))
    else:
        ml, mh = m_at(lo), m_at(hi)
        if ml <= 0.0 <= mh:
            entries.append(SpectrumEntry(_root(D, lo, hi), 1, SIMPLE_ROBIN))

    entries = sorted((e for e in entries if lo <= e.lam <= hi), key=lambda e: e.lam)
    return Spectrum((lo, hi), entries, _descriptor(graph, tau))


def _end_root(D, a: float, b: float, left: bool) -> Optional[float]:
    """Root in an end piece; only the pole side is pulled in."""
    width = b - a
    delta = 1e-3 * width
    while delta > 1e-13 * max(1.0, abs(a), abs(b)):
        xa, xb = (a, b - delta) if left else (a + delta, b)
        da, db = D(xa), D(xb)
        if da == 0.0:
            return xa
        if db == 0.0:
            return xb
        if da * db < 0:
            return _root(D, xa, xb)
        delta *= 0.1
    return None


# ----------------------------------------------------------------------------
# Counting
# ----------------------------------------------------------------------------


def count(spec: Spectrum, interval: Sequence[float], tol: float = 1e-9) -> int:
    """Multiplicity-weighted number of eigenvalues in ``[a, b)``."""
    a, b = float(interval[0]), float(interval[1])
    if b <= a:
        return 0
    lo, hi = spec.window
    if a < lo - tol or b > hi + tol:
        raise ValueError(f"interval [{a}, {b}) is not inside the window [{lo}, {hi}]")
    lams = spec.distinct
    for end in (a, b):
        if lams.size and np.min(np.abs(lams - end)) <= tol * max(1.0, abs(end)):
            raise ValueError(f"interval endpoint {end} is an eigenvalue")
    mult = spec.multiplicities
    sel = (lams >= a) & (lams < b)
    return int(mult[sel].sum())


def d_R(spec: Spectrum, R: float) -> int:
    """``N([0, R)) - N([-R, 0))``."""
    R = float(R)
    lo, hi = spec.window
    if lo > -R or hi < R:
        raise ValueError(f"window {spec.window} does not contain [-{R}, {R}]")
    lams = spec.distinct
    if lams.size and np.min(np.abs(np.abs(lams) - R)) <= 1e-9 * max(1.0, R):
        raise ValueError(f"+-R={R} is an eigenvalue")
    mult = spec.multiplicities
    pos = int(mult[(lams >= 0) & (lams < R)].sum())
    neg = int(mult[(lams >= -R) & (lams < 0)].sum())
    return pos - neg


# ----------------------------------------------------------------------------
# Interlacing and monotonicity
# ----------------------------------------------------------------------------


@dataclass
class InterlacingReport:
    ok: bool
    intervals_checked: int
    max_difference: int
    violation: Optional[tuple[float, float, int, int]] = None

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "intervals_checked": self.intervals_checked,
            "max_difference": self.max_difference,
            "violation": self.violation,
        }


def check_interlacing(spec1: Spectrum, spec2: Spectrum) -> InterlacingReport:
    """Check ``|N([a,b); spec1) - N([a,b); spec2)| <= 1`` for all test intervals.

    Endpoints are the midpoints between consecutive distinct eigenvalues of the
    merged spectra together with the window ends when those are not eigenvalues.
    """
    d1, d2 = spec1.descriptor.get("graph"), spec2.descriptor.get("graph")
    if d1 is not None and d2 is not None and d1 != d2:
        raise ValueError("spectra belong to different graphs")
    if tuple(spec1.window) != tuple(spec2.window):
        raise ValueError("spectra have different windows")
    lo, hi = spec1.window
    merged = np.unique(np.concatenate([spec1.distinct, spec2.distinct]))
    ends = list(0.5 * (merged[:-1] + merged[1:]))
    tol = 1e-9
    if merged.size == 0 or np.min(np.abs(merged - lo)) > tol:
        ends.insert(0, lo)
    if merged.size == 0 or np.min(np.abs(merged - hi)) > tol:
        ends.append(hi)
    ends = np.array(sorted(ends))
    if ends.size < 2:
        return InterlacingReport(True, 0, 0)

    def cumulative(spec):
        lams, mult = spec.distinct, spec.multiplicities
        return np.array([int(mult[lams < e].sum()) for e in ends])

    diff = cumulative(spec1) - cumulative(spec2)
    # N1 - N2 on [e_a, e_b) is diff[b] - diff[a]
    n = ends.size
    worst = 0
    violation = None
    for i in range(n):
        d = diff[i + 1:] - diff[i]
        if d.size:
            k = int(np.argmax(np.abs(d)))
            if abs(int(d[k])) > worst:
                worst = abs(int(d[k]))
            if abs(int(d[k])) > 1 and violation is None:
                j = i + 1 + k
                a, b = float(ends[i]), float(ends[j])
                violation = (a, b, count(spec1, (a, b)), count(spec2, (a, b)))
    return InterlacingReport(violation is None, n * (n - 1) // 2, worst, violation)


@dataclass
class MonotonicityReport:
    ok: bool
    matched: int
    unmatched: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    common_pole_mismatch: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "matched": self.matched,
            "unmatched": self.unmatched,
            "violations": self.violations,
            "common_pole_mismatch": self.common_pole_mismatch,
        }


def _same_branch(t1: float, t2: float) -> bool:
    s1 = 1 if t1 > 0 else -1
    s2 = 1 if t2 > 0 else -1
    if math.isinf(t1) or math.isinf(t2):
        return True  # +-inf joins both half-lines
    return s1 == s2


def monotonicity_check(graph: StarGraph, tau1: float, tau2: float, window: Sequence[float],
                       settings: SolverSettings | None = None,
                       spectra: tuple[Spectrum, Spectrum] | None = None) -> MonotonicityReport:
    """SimpleRobin eigenvalues grow strictly from ``tau1`` to ``tau2`` inside each pole gap.

    Both parameters must lie in ``(0, inf]`` or both in ``[-inf, 0)`` with
    ``tau1 < tau2`` (``-inf`` counts as the left end of the negative branch).
    """
    settings = settings or DEFAULT_SETTINGS
    t1, t2 = float(tau1), float(tau2)
    if t1 == 0.0 or t2 == 0.0:
        raise ValueError("tau = 0 is not in a monotonicity interval")
    pos = t1 > 0 and t2 > 0
    neg = t1 < 0 and t2 < 0
    if not (pos or neg):
        raise ValueError("tau1 and tau2 must lie in the same half-line")
    if not t1 < t2:
        raise ValueError("need tau1 < tau2")
    lo, hi = float(window[0]), float(window[1])
    if spectra is None:
        s1 = robin_spectrum(graph, t1, (lo, hi), settings)
        s2 = robin_spectrum(graph, t2, (lo, hi), settings)
    else:
        s1, s2 = spectra
    poles = [float(np.mean([p[0] for p in g])) for g in _edge_poles(graph, (lo, hi), settings)]
    edges_ = [lo] + poles + [hi]
    report = MonotonicityReport(ok=True, matched=0)
    simple1 = [e.lam for e in s1.by_tag(SIMPLE_ROBIN)]
    simple2 = [e.lam for e in s2.by_tag(SIMPLE_ROBIN)]
    for a, b in zip(edges_[:-1], edges_[1:]):
        g1 = [x for x in simple1 if a < x < b or (a == lo and x == lo) or (b == hi and x == hi)]
        g2 = [x for x in simple2 if a < x < b or (a == lo and x == lo) or (b == hi and x == hi)]
        if len(g1) == 1 and len(g2) == 1:
            report.matched += 1
            if not g1[0] < g2[0]:
                report.violations.append((a, b, g1[0], g2[0]))
        elif g1 or g2:
            report.unmatched.append((a, b, g1, g2))
    c1 = sorted((e.lam, e.multiplicity) for e in s1.by_tag(COMMON_POLE))
    c2 = sorted((e.lam, e.multiplicity) for e in s2.by_tag(COMMON_POLE))
    if len(c1) != len(c2) or any(abs(x[0] - y[0]) > 10 * settings.root_tol or x[1] != y[1] for x, y in zip(c1, c2)):
        report.common_pole_mismatch = [c1, c2]
    report.ok = not report.violations and not report.common_pole_mismatch
    return report


# ----------------------------------------------------------------------------
# Eigenfunctions and Parseval
# ----------------------------------------------------------------------------


def eigenfunction(graph: StarGraph, tau: float, lam: float, settings: SolverSettings | None = None,
                  grids: Optional[list[np.ndarray]] = None, tol: float = 1e-6) -> GridFunction:
    """Normalized eigenfunction at a SimpleRobin eigenvalue ``lam``.

    Edge ``j`` carries ``u_j Y_j(x, lam) (-1, m_j(lam))^T`` where ``u`` spans the
    kernel of ``B_tau M(lam) - A_tau``.
    """
    settings = settings or DEFAULT_SETTINGS
    tau = float(tau)
    if tau == 0.0:
        raise ValueError("eigenfunctions are provided for tau != 0 only")
    samples = [char_entries(e, lam, settings, j, with_derivative=False) for j, e in enumerate(graph.edges)]
    if any(s.is_pole for s in samples):
        raise ValueError(f"lam={lam} is a pole of an edge Weyl function (CommonPole eigenvalues are not supported)")
    ms = np.array([s.m.real for s in samples])
    pair = robin_matrices(graph.n, tau)
    K = pair.B @ np.diag(ms) - pair.A
    _, sv, vh = np.linalg.svd(K)
    scale = max(1.0, float(sv[0]))
    if sv[-1] > tol * scale:
        raise ValueError(f"lam={lam} is not an eigenvalue (smallest singular value {sv[-1]:.3g})")
    u = vh[-1].conj()
    u = u / u[np.argmax(np.abs(u))]
    if grids is None:
        grids = [np.linspace(0.0, e.length, settings.grid_points) for e in graph.edges]
    values = []
    for e, g, mj, uj in zip(graph.edges, grids, ms, u):
        Ys = propagate_path(e, g, complex(lam), settings=settings).real
        vec = Ys @ np.array([-1.0, mj])
        values.append(uj * vec)
    gf = GridFunction(list(grids), values)
    return gf.scaled(1.0 / gf.norm())


def parseval_check(graph: StarGraph, tau: float, window: Sequence[float], g: GridFunction,
                   settings: SolverSettings | None = None, spectrum: Spectrum | None = None) -> float:
    """``||g||^2 - sum |(y_k, g)|^2`` over SimpleRobin eigenfunctions in the window."""
    settings = settings or DEFAULT_SETTINGS
    spec = spectrum or robin_spectrum(graph, tau, window, settings)
    total = g.inner(g).real
    for e in spec.by_tag(SIMPLE_ROBIN):
        y = eigenfunction(graph, tau, e.lam, settings, grids=g.grids)
        total -= abs(g.inner(y)) ** 2
    return float(total)
