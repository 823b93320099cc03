"""Star-graph data model and configuration I/O.

A star graph is an ordered tuple of edges that share the central vertex at
``x = 0``.  Each edge carries its length, the angle of the separated boundary
condition ``cos(alpha) f(l) + sin(alpha) fhat(l) = 0`` at the outer vertex and
a piecewise-linear potential ``V = [[p, q], [q, -p]]``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from scipy.integrate import simpson

__all__ = [
    "ConfigError",
    "EdgeSpec",
    "StarGraph",
    "Robin",
    "General",
    "MatchingCondition",
    "SolverSettings",
    "GridFunction",
    "load_config",
    "emit_config",
    "parse_angle",
    "parse_extended_real",
    "sample_potential",
    "random_graph",
]


class ConfigError(ValueError):
    """Raised for malformed or invalid configuration documents."""


# ----------------------------------------------------------------------------
# Edges and graphs
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class EdgeSpec:
    """One edge ``[0, length]`` of the star graph.

    ``potential`` holds ``(x, p, q)`` samples; the potential between samples is
    the linear interpolant.  An empty sample list means ``p = q = 0``.
    """

    length: float
    alpha: float
    potential: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        length = float(self.length)
        alpha = float(self.alpha)
        if not (math.isfinite(length) and length > 0):
            raise ConfigError(f"edge length must be positive and finite, got {self.length!r}")
        if not (0.0 <= alpha < math.pi):
            raise ConfigError(f"alpha must lie in [0, pi), got {self.alpha!r}")
        samples = tuple((float(x), float(p), float(q)) for x, p, q in self.potential)
        if samples:
            xs = [s[0] for s in samples]
            if len(samples) < 2:
                raise ConfigError("potential needs at least two samples (x=0 and x=length)")
            if xs[0] != 0.0 or xs[-1] != length:
                raise ConfigError(
                    f"potential samples must start at 0 and end at length={length}, "
                    f"got {xs[0]} .. {xs[-1]}"
                )
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ConfigError("potential sample positions must be strictly increasing")
            if not all(math.isfinite(v) for s in samples for v in s):
                raise ConfigError("potential samples must be finite")
        object.__setattr__(self, "length", length)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "potential", samples)

    @property
    def is_free(self) -> bool:
        return all(p == 0.0 and q == 0.0 for _, p, q in self.potential)

    @cached_property
    def knots(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sample positions and values as float arrays (free edge: two zero knots)."""
        if not self.potential:
            return (np.array([0.0, self.length]), np.zeros(2), np.zeros(2))
        arr = np.array(self.potential, dtype=float)
        return (arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy())

    @cached_property
    def potential_bound(self) -> float:
        """``max_x sqrt(p^2 + q^2)``; attained at a knot for linear interpolants."""
        _, ps, qs = self.knots
        return float(np.max(np.hypot(ps, qs)))


def sample_potential(edge: EdgeSpec, x: float) -> tuple[float, float]:
    """Evaluate ``(p(x), q(x))`` of the piecewise-linear potential."""
    if not (0.0 <= x <= edge.length):
        raise ValueError(f"x={x} outside edge [0, {edge.length}]")
    xs, ps, qs = edge.knots
    return float(np.interp(x, xs, ps)), float(np.interp(x, xs, qs))


@dataclass(frozen=True)
class StarGraph:
    edges: tuple[EdgeSpec, ...]

    def __post_init__(self):
        edges = tuple(self.edges)
        if len(edges) < 1:
            raise ConfigError("a star graph needs at least one edge")
        object.__setattr__(self, "edges", edges)

    @property
    def n(self) -> int:
        return len(self.edges)

    def __len__(self) -> int:
        return len(self.edges)

    def __iter__(self):
        return iter(self.edges)

    def __getitem__(self, j: int) -> EdgeSpec:
        return self.edges[j]

    @property
    def max_length(self) -> float:
        return max(e.length for e in self.edges)

    def fingerprint(self) -> str:
        """Short stable hash of the graph data, used in output manifests."""
        import hashlib

        doc = json.dumps([_edge_to_doc(e) for e in self.edges], sort_keys=True)
        return hashlib.sha256(doc.encode()).hexdigest()[:16]


# ----------------------------------------------------------------------------
# Matching conditions
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Robin:
    """Robin matching ``f_1(v) = ... = f_n(v) = tau * sum_j fhat_j(v)``.

    ``tau = 0`` is the decoupled Dirichlet condition; ``tau = +-inf`` both mean
    continuity of ``f`` plus ``sum_j fhat_j(v) = 0`` and are stored as ``+inf``.
    """

    tau: float

    def __post_init__(self):
        tau = float(self.tau)
        if math.isnan(tau):
            raise ConfigError("tau must not be NaN")
        if math.isinf(tau):
            tau = math.inf
        object.__setattr__(self, "tau", tau)


@dataclass(frozen=True, eq=False)
class General:
    """General vertex condition ``A f(v) + B fhat(v) = 0`` with ``A, B`` n x n."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=complex)
        B = np.array(self.B, dtype=complex)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
            raise ConfigError(f"A and B must be square of equal size, got {A.shape} and {B.shape}")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    def __eq__(self, other):
        if not isinstance(other, General):
            return NotImplemented
        return np.array_equal(self.A, other.A) and np.array_equal(self.B, other.B)

    def __hash__(self):
        return hash((self.A.tobytes(), self.B.tobytes()))


MatchingCondition = Union[Robin, General]


# ----------------------------------------------------------------------------
# Solver settings and grid functions
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverSettings:
    ode_rtol: float = 1e-10
    ode_atol: float = 1e-12
    root_tol: float = 1e-8
    grid_points: int = 513
    window: tuple[float, float] = (-10.0, 10.0)

    def __post_init__(self):
        lo, hi = (float(v) for v in self.window)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ConfigError(f"window must be a finite interval lo < hi, got {self.window!r}")
        if self.ode_rtol <= 0 or self.ode_atol <= 0 or self.root_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if int(self.grid_points) < 3:
            raise ConfigError("grid_points must be at least 3")
        object.__setattr__(self, "window", (lo, hi))
        object.__setattr__(self, "grid_points", int(self.grid_points))


@dataclass
class GridFunction:
    """Values of a 2-vector function on per-edge uniform grids.

    ``grids[j]`` has shape ``(M_j,)`` covering ``[0, l_j]``; ``values[j]`` has
    shape ``(M_j, 2)`` with columns ``(f_j, fhat_j)``.
    """

    grids: list[np.ndarray]
    values: list[np.ndarray]

    def __post_init__(self):
        if len(self.grids) != len(self.values):
            raise ValueError("grids and values must have the same number of edges")
        self.grids = [np.asarray(g, dtype=float) for g in self.grids]
        self.values = [np.asarray(v, dtype=complex) for v in self.values]
        for g, v in zip(self.grids, self.values):
            if v.shape != (g.size, 2):
                raise ValueError(f"values of shape {v.shape} do not match grid of size {g.size}")
            if not np.all(np.isfinite(v)):
                raise ValueError("grid function values must be finite")

    @classmethod
    def on_graph(cls, graph: StarGraph, points: int | Sequence[int], func=None) -> "GridFunction":
        """Uniform grids on every edge; ``func(j, x) -> (M, 2)`` fills values (zeros if None)."""
        if isinstance(points, int):
            points = [points] * graph.n
        grids = [np.linspace(0.0, e.length, m) for e, m in zip(graph.edges, points)]
        if func is None:
            values = [np.zeros((g.size, 2), dtype=complex) for g in grids]
        else:
            values = [np.asarray(func(j, g), dtype=complex).reshape(g.size, 2) for j, g in enumerate(grids)]
        return cls(grids, values)

    @property
    def n(self) -> int:
        return len(self.grids)

    def inner(self, other: "GridFunction") -> complex:
        """L^2(G) inner product ``(self, other) = sum_j int f . conj(g)`` (Simpson)."""
        total = 0.0 + 0.0j
        for g, a, b in zip(self.grids, self.values, other.values):
            total += simpson(np.sum(a * np.conj(b), axis=1), x=g)
        return complex(total)

    def norm(self) -> float:
        return math.sqrt(max(self.inner(self).real, 0.0))

    def scaled(self, c: complex) -> "GridFunction":
        return GridFunction(list(self.grids), [c * v for v in self.values])

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(list(self.grids), [a + b for a, b in zip(self.values, other.values)])

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(list(self.grids), [a - b for a, b in zip(self.values, other.values)])

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(v))) for v in self.values)


# ----------------------------------------------------------------------------
# Parsing helpers
# ----------------------------------------------------------------------------

_PI_TOKEN = re.compile(r"^\s*(?:(\d+)\s*\*\s*)?pi(?:\s*\*\s*(\d+))?(?:\s*/\s*(\d+))?\s*$")


def parse_angle(value) -> float:
    """Parse an angle given as a number or a token ``0``, ``pi/2``, ``pi*k/m``."""
    if isinstance(value, bool):
        raise ConfigError(f"invalid angle {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _PI_TOKEN.match(value)
        if m:
            k = int(m.group(1) or 1) * int(m.group(2) or 1)
            d = int(m.group(3) or 1)
            if d == 0:
                raise ConfigError(f"zero denominator in angle {value!r}")
            return math.pi * k / d
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"invalid angle {value!r}; use a decimal or 'pi*k/m'")


def parse_extended_real(value) -> float:
    """Parse a finite decimal or one of ``inf``, ``+inf``, ``-inf``."""
    if isinstance(value, bool):
        raise ConfigError(f"invalid number {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        token = value.strip().lower()
        if token in ("inf", "+inf", "infinity", "-inf", "-infinity"):
            return -math.inf if token.startswith("-") else math.inf
        try:
            return float(token)
        except ValueError:
            pass
    raise ConfigError(f"invalid extended real {value!r}")


def _complex_matrix(doc, name: str) -> np.ndarray:
    try:
        arr = np.array(doc, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"matrix {name} must be a nested list of [re, im] pairs") from exc
    if arr.ndim == 2:
        return arr.astype(complex)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ConfigError(f"matrix {name} must have shape (n, n, 2), got {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def _edge_from_doc(doc, index: int) -> EdgeSpec:
    if not isinstance(doc, dict):
        raise ConfigError(f"edges[{index}] must be an object")
    try:
        length = float(doc["length"])
        alpha = parse_angle(doc.get("alpha", 0.0))
    except KeyError as exc:
        raise ConfigError(f"edges[{index}] is missing key {exc}") from None
    samples = []
    for k, s in enumerate(doc.get("potential", [])):
        try:
            samples.append((float(s["x"]), float(s.get("p", 0.0)), float(s.get("q", 0.0))))
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"edges[{index}].potential[{k}] must be {{x, p, q}}") from None
    try:
        return EdgeSpec(length, alpha, tuple(samples))
    except ConfigError as exc:
        raise ConfigError(f"edges[{index}]: {exc}") from None


def _edge_to_doc(edge: EdgeSpec) -> dict:
    return {
        "length": edge.length,
        "alpha": edge.alpha,
        "potential": [{"x": x, "p": p, "q": q} for x, p, q in edge.potential],
    }


def load_config(text: str) -> tuple[StarGraph, MatchingCondition, SolverSettings]:
    """Parse and validate a JSON configuration document."""
    from .matching import BoundaryPair, validate_matching

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("top-level document must be an object")
    edges_doc = doc.get("edges")
    if not isinstance(edges_doc, list) or not edges_doc:
        raise ConfigError("'edges' must be a non-empty list")
    graph = StarGraph(tuple(_edge_from_doc(e, i) for i, e in enumerate(edges_doc)))

    mdoc = doc.get("matching", {"type": "robin", "tau": "inf"})
    kind = str(mdoc.get("type", "robin")).lower()
    if kind == "robin":
        matching: MatchingCondition = Robin(parse_extended_real(mdoc.get("tau", "inf")))
    elif kind == "general":
        if "A" not in mdoc or "B" not in mdoc:
            raise ConfigError("general matching needs matrices 'A' and 'B'")
        matching = General(_complex_matrix(mdoc["A"], "A"), _complex_matrix(mdoc["B"], "B"))
        if matching.A.shape[0] != graph.n:
            raise ConfigError(f"matching matrices are {matching.A.shape[0]}x{matching.A.shape[0]}, graph has {graph.n} edges")
        report = validate_matching(BoundaryPair(matching.A, matching.B))
        if not report.ok:
            raise ConfigError(f"invalid matching condition: {report.reason}")
    else:
        raise ConfigError(f"unknown matching type {kind!r}")

    sdoc = doc.get("solver", {})
    defaults = SolverSettings()
    ode_tol = sdoc.get("ode_tol", defaults.ode_rtol)
    if isinstance(ode_tol, (list, tuple)):
        rtol, atol = (float(v) for v in ode_tol)
    else:
        rtol = float(ode_tol)
        atol = float(sdoc.get("ode_atol", rtol * 1e-2))
    window = sdoc.get("window", list(defaults.window))
    settings = SolverSettings(
        ode_rtol=rtol,
        ode_atol=atol,
        root_tol=float(sdoc.get("root_tol", defaults.root_tol)),
        grid_points=int(sdoc.get("grid_points", defaults.grid_points)),
        window=(float(window[0]), float(window[1])),
    )
    return graph, matching, settings


def _tau_token(tau: float):
    return "inf" if math.isinf(tau) else tau


def emit_config(graph: StarGraph, matching: MatchingCondition, settings: SolverSettings | None = None) -> str:
    """Canonical JSON text; ``load_config(emit_config(...))`` reproduces the objects."""
    settings = settings or SolverSettings()
    if isinstance(matching, Robin):
        mdoc = {"type": "robin", "tau": _tau_token(matching.tau)}
    else:
        mdoc = {
            "type": "general",
            "A": [[[z.real, z.imag] for z in row] for row in matching.A],
            "B": [[[z.real, z.imag] for z in row] for row in matching.B],
        }
    doc = {
        "edges": [_edge_to_doc(e) for e in graph.edges],
        "matching": mdoc,
        "solver": {
            "ode_tol": [settings.ode_rtol, settings.ode_atol],
            "root_tol": settings.root_tol,
            "grid_points": settings.grid_points,
            "window": list(settings.window),
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def random_graph(rng: np.random.Generator, n_max: int = 4, n_min: int = 1,
                 length_range: tuple[float, float] = (0.5, 2.0), knots: int = 4,
                 amplitude: float = 2.0, alpha_choices: Sequence[float] | None = None) -> StarGraph:
    """Random star graph with piecewise-linear potentials (used by checks and the CLI)."""
    n = int(rng.integers(n_min, n_max + 1))
    edges = []
    for _ in range(n):
        length = float(rng.uniform(*length_range))
        if alpha_choices is None:
            alpha = float(rng.uniform(0.0, math.pi))
            alpha = min(alpha, math.nextafter(math.pi, 0.0))
        else:
            alpha = float(rng.choice(np.asarray(alpha_choices, dtype=float)))
        xs = np.linspace(0.0, length, knots)
        ps = rng.uniform(-amplitude, amplitude, knots)
        qs = rng.uniform(-amplitude, amplitude, knots)
        edges.append(EdgeSpec(length, alpha, tuple(zip(xs.tolist(), ps.tolist(), qs.tolist()))))
    return StarGraph(tuple(edges))
