"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line; the lines are printed during the
run (visible with ``-s``), collected in the pytest terminal summary, and
printed by ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from _support import (constant_edge, free_edge, graph_of, manufactured, manufactured_graph_case, random_edge,
                      random_valid_pair)

from diracstar.dislocation import (dislocation_report, kappa_counting, kappa_counting_details,
                                   kappa_from_eigenvalues, kappa_integral_details)
from diracstar.graph import General, Robin, random_graph
from diracstar.oracle import discretize, oracle_eigenvalues, oracle_spectrum
from diracstar.propagator import J, propagate_path, quadrature_nodes
from diracstar.resolvent import (apply_edge_resolvent, apply_operator, green_edge, robin_trace_quadrature,
                                 trace_edge_diff, trace_robin_diff)
from diracstar.spectrum import (COMMON_POLE, check_interlacing, edge_eigenvalues, monotonicity_check,
                                robin_spectrum)
from diracstar.weyl import nevanlinna_kernel

# tolerances pinned by the acceptance criteria
FREE_SPECTRUM_TOL = 1e-8
IDENTITY_TOL = 1e-8
GRAM_FLOOR = -1e-10
JUMP_TOL = 1e-8
MANUFACTURED_TOL = 1e-6
VERTEX_TOL = 1e-8
TRACE_QUADRATURE_TOL = 1e-7
TRACE_TAIL_FACTOR = 10.0
KAPPA_RESIDUAL_TOL = 1e-4
ORACLE_ORDER_MIN = 1.8
TIME_BUDGET = 60.0

RESULTS: dict[int, str] = {}


def _record(number: int, name: str, ok: bool, detail: str, elapsed: float) -> None:
    line = f"{'PASS' if ok else 'FAIL'} [{number:2d}] {name}: {detail} ({elapsed:.1f}s)"
    RESULTS[number] = line
    print(line)


def _run(number: int, name: str, body) -> None:
    t0 = time.perf_counter()
    try:
        ok, detail = body()
    except Exception as exc:  # recorded as a failure line, then re-raised
        _record(number, name, False, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0)
        raise
    elapsed = time.perf_counter() - t0
    if elapsed > TIME_BUDGET:
        ok = False
        detail += f"; exceeded the {TIME_BUDGET:.0f}s budget"
    _record(number, name, ok, detail, elapsed)
    assert ok, detail


# ----------------------------------------------------------------------------
# 1. free spectrum
# ----------------------------------------------------------------------------


def criterion_free_spectrum():
    combos = [(0.0, 1.0), (0.5 * math.pi, 1.0), (0.25 * math.pi, 0.5), (1.0, 2.0), (2.0, 1.5),
              (3.0, 0.75), (0.1, 1.3), (0.5 * math.pi, 2.5), (2.5, 0.9), (math.pi / 3, 1.1)]
    worst = 0.0
    for alpha, length in combos:
        eigs = edge_eigenvalues(free_edge(alpha, length), (-30.0, 30.0))
        ks = np.arange(math.ceil((-30.0 * length - alpha) / math.pi), math.floor((30.0 * length - alpha) / math.pi) + 1)
        exact = (alpha + ks * math.pi) / length
        exact = exact[(exact >= -30.0) & (exact <= 30.0)]
        if eigs.size != exact.size:
            return False, f"alpha={alpha}, l={length}: {eigs.size} eigenvalues, expected {exact.size}"
        worst = max(worst, float(np.max(np.abs(eigs - exact))))
    return worst <= FREE_SPECTRUM_TOL, f"10 (alpha, l) pairs, max error {worst:.2e} <= {FREE_SPECTRUM_TOL:g}"


# ----------------------------------------------------------------------------
# 2. symplectic and Lagrange identities
# ----------------------------------------------------------------------------


def criterion_identities():
    rng = np.random.default_rng(11)
    worst_lag = worst_basic = 0.0
    for _ in range(100):
        e = random_edge(rng)
        x = float(rng.uniform(0.05, 1.0)) * e.length
        z = complex(rng.uniform(-5, 5), rng.uniform(-2, 2))
        zeta = complex(rng.uniform(-5, 5), rng.uniform(-2, 2))
        Yz = propagate_path(e, [x], z)[0]
        Yzc = propagate_path(e, [x], z.conjugate())[0]
        worst_lag = max(worst_lag, float(np.linalg.norm(Yzc.conj().T @ J @ Yz - J, 2)))
        nodes, weights = quadrature_nodes(e, upper=x, z_scale=max(abs(z), abs(zeta)))
        Ya = propagate_path(e, nodes, z)
        Yb = propagate_path(e, nodes, zeta)
        integral = np.einsum("k,kji,kjl->il", weights, Yb.conj(), Ya)
        Yx_zeta = propagate_path(e, [x], zeta)[0]
        lhs = J - Yx_zeta.conj().T @ J @ Yz
        worst_basic = max(worst_basic, float(np.linalg.norm(lhs - (z - zeta.conjugate()) * integral, 2)))
    ok = worst_lag <= IDENTITY_TOL and worst_basic <= IDENTITY_TOL
    return ok, f"100 samples, symplectic {worst_lag:.2e}, Lagrange {worst_basic:.2e} <= {IDENTITY_TOL:g}"


# ----------------------------------------------------------------------------
# 3. Nevanlinna positivity
# ----------------------------------------------------------------------------


def criterion_nevanlinna():
    rng = np.random.default_rng(12)
    worst = math.inf
    for _ in range(20):
        e = random_edge(rng)
        for pts in ([1j, 2j, 1 + 1j],
                    [complex(rng.uniform(-4, 4), rng.uniform(0.1, 3)) for _ in range(3)]):
            G = np.array([[nevanlinna_kernel(e, za, zb) for zb in pts] for za in pts])
            herm = float(np.max(np.abs(G - G.conj().T)))
            if herm > 1e-8:
                return False, f"kernel matrix not Hermitian (defect {herm:.2e})"
            worst = min(worst, float(np.min(np.linalg.eigvalsh(0.5 * (G + G.conj().T)))))
    return worst >= GRAM_FLOOR, f"20 edges x 2 triples, min eigenvalue {worst:.3e} >= {GRAM_FLOOR:g}"


# ----------------------------------------------------------------------------
# 4. Green jump
# ----------------------------------------------------------------------------


def criterion_green_jump():
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(50):
        e = random_edge(rng)
        x = float(rng.uniform(0.0, e.length))
        z = complex(rng.uniform(-6, 6), rng.choice([-1, 1]) * rng.uniform(0.2, 3))
        above = green_edge(e, z, x, x, side="above")
        below = green_edge(e, z, x, x, side="below")
        worst = max(worst, float(np.linalg.norm(above - below + J, 2)))
    return worst <= JUMP_TOL, f"50 samples, max ||G(x,x+0)-G(x,x-0)+J|| = {worst:.2e} <= {JUMP_TOL:g}"


# ----------------------------------------------------------------------------
# 5. manufactured resolvent recovery
# ----------------------------------------------------------------------------


def criterion_manufactured():
    rng = np.random.default_rng(14)
    worst_edge = 0.0
    for _ in range(5):
        e = random_edge(rng)
        z = complex(rng.uniform(-4, 4), rng.uniform(0.3, 2))
        x = np.linspace(0.0, e.length, 2049)
        h, dh = manufactured(e, x, np.array([0.0, complex(rng.normal(), rng.normal())]), 1.0 + 0.5j, 0.7, -0.4j)
        g = apply_operator(e, x, h, dh) - z * h
        f = apply_edge_resolvent(e, z, (x, g))
        worst_edge = max(worst_edge, float(np.max(np.abs(f.values[0] - h))))
    worst_graph = worst_vertex = 0.0
    cases = [
        (graph_of(free_edge(), free_edge()), Robin(1.0), 1j),
        (graph_of(random_edge(rng), random_edge(rng), random_edge(rng)), Robin(-0.7), 0.5 + 1j),
        (graph_of(random_edge(rng), random_edge(rng)), Robin(math.inf), -1.0 + 0.5j),
    ]
    for n_pair, singular in ((3, False), (3, True)):
        pair = random_valid_pair(rng, n_pair, singular_b=singular)
        g3 = graph_of(*(random_edge(rng) for _ in range(n_pair)))
        cases.append((g3, General(pair.A, pair.B), 0.8 + 0.6j))
    for graph, matching, z in cases:
        err, vres = manufactured_graph_case(graph, matching, z, rng)
        worst_graph = max(worst_graph, err)
        worst_vertex = max(worst_vertex, vres)
    ok = worst_edge <= MANUFACTURED_TOL and worst_graph <= MANUFACTURED_TOL and worst_vertex <= VERTEX_TOL
    return ok, (f"edge {worst_edge:.2e}, graph {worst_graph:.2e} <= {MANUFACTURED_TOL:g}; "
                f"vertex residual {worst_vertex:.2e} <= {VERTEX_TOL:g}")


# ----------------------------------------------------------------------------
# 6. trace formulas
# ----------------------------------------------------------------------------


def criterion_traces():
    rng = np.random.default_rng(15)
    z1, z2 = 0.3 + 1.0j, -0.7 + 0.5j
    edges = [free_edge(), constant_edge(1.0), random_edge(rng), random_edge(rng)]
    worst_ratio = 0.0
    for e in edges:
        value = trace_edge_diff(e, z1, z2)
        for R in (50.0, 100.0):
            mu = edge_eigenvalues(e, (-R, R))
            partial = np.sum(1.0 / (mu - z1) - 1.0 / (mu - z2))
            bound = TRACE_TAIL_FACTOR * (4.0 * e.length / math.pi) * abs(z1 - z2) / R
            worst_ratio = max(worst_ratio, abs(value - partial) / bound)
    worst_quad = 0.0
    for _ in range(6):
        g = random_graph(rng, n_max=3)
        tau = float(rng.choice([math.inf, 1.0, -2.0, 0.3]))
        z = complex(rng.uniform(-3, 3), rng.uniform(0.3, 2))
        worst_quad = max(worst_quad, abs(trace_robin_diff(g, tau, z) - robin_trace_quadrature(g, tau, z)))
    ok = worst_ratio <= 1.0 and worst_quad <= TRACE_QUADRATURE_TOL
    return ok, (f"edge trace vs eigenvalue sums at R=50,100: worst error/bound {worst_ratio:.3f} <= 1; "
                f"Robin trace vs quadrature {worst_quad:.2e} <= {TRACE_QUADRATURE_TOL:g}")


# ----------------------------------------------------------------------------
# 7. multiplicity law
# ----------------------------------------------------------------------------


def criterion_multiplicity():
    rng = np.random.default_rng(16)
    bumpy = random_edge(rng, length_range=(0.8, 1.2))
    window = (-6.0, 6.0)
    checked = 0
    for base in (free_edge(), bumpy):
        for n in (2, 3):
            graph = graph_of(*([base] * n))
            for tau in (math.inf, 1.0):
                spec = robin_spectrum(graph, tau, window)
                commons = spec.by_tag(COMMON_POLE)
                if not commons:
                    return False, f"no CommonPole eigenvalues for n={n}"
                if any(c.multiplicity != n - 1 for c in commons):
                    return False, f"n={n}, tau={tau}: multiplicities {[c.multiplicity for c in commons]}"
                groups = oracle_spectrum(discretize(graph, Robin(tau), 128), window)
                for c in commons:
                    near = [k for lam, k in groups if abs(lam - c.lam) < 5e-3 * (1 + abs(c.lam))]
                    if near != [n - 1]:
                        return False, f"n={n}, tau={tau}, lambda={c.lam:.6f}: oracle clusters {near}"
                    checked += 1
    return True, f"{checked} CommonPole eigenvalues with multiplicity n-1 (n=2,3), confirmed by oracle clusters"


# ----------------------------------------------------------------------------
# 8. interlacing and monotonicity
# ----------------------------------------------------------------------------


def criterion_interlacing():
    rng = np.random.default_rng(17)
    window = (-12.0, 12.0)
    pairs = [(1.0, math.inf), (0.5, 5.0), (-3.0, -0.2), (-math.inf, -1.0), (0.0, 2.0), (-1.0, 1.0)]
    bad = []
    multiple_runs = 0
    for i in range(30):
        g = random_graph(rng, n_max=3)
        if i % 3 == 0:
            g = graph_of(*(g.edges + (g.edges[0], g.edges[0])))  # triple edge: double eigenvalues
        t1, t2 = pairs[i % len(pairs)]
        s1, s2 = robin_spectrum(g, t1, window), robin_spectrum(g, t2, window)
        inter = check_interlacing(s1, s2)
        if not inter.ok:
            bad.append(f"graph {i}: interlacing {inter.violation}")
        if (t1 > 0 and t2 > 0) or (t1 < 0 and t2 < 0):
            mono = monotonicity_check(g, t1, t2, window, spectra=(s1, s2))
            if not mono.ok:
                bad.append(f"graph {i}: monotonicity {mono.violations} {mono.common_pole_mismatch}")
        for s, t in ((s1, t1), (s2, t2)):
            if t == 0.0:
                continue
            m = s.multiplicities
            if np.any((m[:-1] > 1) & (m[1:] > 1)):
                bad.append(f"graph {i}: consecutive multiple eigenvalues at tau={t}")
            multiple_runs += int(np.sum(m > 1))
    if bad:
        return False, "; ".join(bad[:3])
    return True, (f"30 graphs: counting bound, strict tau-monotonicity, no consecutive multiple eigenvalues "
                  f"({multiple_runs} multiple eigenvalues seen)")


# ----------------------------------------------------------------------------
# 9. dislocation
# ----------------------------------------------------------------------------


def criterion_dislocation():
    rng = np.random.default_rng(18)
    for alpha, length in ((0.0, 1.0), (0.5 * math.pi, 1.0), (1.0, 2.0), (2.5, 0.7)):
        e = free_edge(alpha, length)
        kc, ki = kappa_counting(e), kappa_integral_details(e)
        if kc != 0 or ki.kappa != 0 or ki.residual > KAPPA_RESIDUAL_TOL:
            return False, f"free edge alpha={alpha}, l={length}: counting {kc}, integral {ki.value}"
    e = constant_edge(1.0)
    kc = kappa_counting(e)
    details = kappa_counting_details(e)
    integrals = [kappa_integral_details(e, omega) for omega in (-0.5, 0.5, None)]
    eigs = oracle_eigenvalues(discretize(graph_of(e), Robin(0.0), 256), (-20.0, 20.0))
    ko = kappa_from_eigenvalues(e, eigs, details.K + 2)
    if not (kc == ko == -2 and all(i.kappa == -2 and i.residual <= KAPPA_RESIDUAL_TOL for i in integrals)):
        return False, f"constant edge: counting {kc}, oracle {ko}, integrals {[i.value for i in integrals]}"
    for _ in range(8):
        e = random_edge(rng)
        kc, ki = kappa_counting(e), kappa_integral_details(e)
        if kc % 2 or kc != ki.kappa or ki.residual > KAPPA_RESIDUAL_TOL:
            return False, f"random edge: counting {kc}, integral {ki.value}"
    failures = 0
    odd = 0
    for _ in range(50):
        g = random_graph(rng, n_max=4)
        tau = float(rng.choice([math.inf, 1.0, -1.0, 0.5]))
        rep = dislocation_report(g, tau, [40.0, 80.0])
        failures += int(not all(rep.bound_ok))
        odd += sum(k % 2 for k in rep.kappa)
    ok = failures == 0 and odd == 0
    return ok, (f"free kappa 0; constant edge kappa -2 by counting, integral and oracle; "
                f"bound held on {50 - failures}/50 graphs at R=40,80; odd kappas {odd}")


# ----------------------------------------------------------------------------
# 10. oracle convergence
# ----------------------------------------------------------------------------


def criterion_oracle_convergence():
    window = (-8.0, 8.0)
    lines = []
    ok = True
    for name, e in (("free", free_edge()), ("constant", constant_edge(1.0))):
        ref = edge_eigenvalues(e, window)
        errs = []
        for M in (64, 128, 256):
            vals = oracle_eigenvalues(discretize(graph_of(e), Robin(0.0), M), window)
            if vals.size != ref.size:
                return False, f"{name} edge, M={M}: {vals.size} oracle eigenvalues, expected {ref.size}"
            errs.append(float(np.max(np.abs(vals - ref))))
        C = errs[0] * 64 ** 2
        orders = [math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2])]
        within = all(err <= 1.05 * C / M ** 2 for err, M in zip(errs, (64, 128, 256)))
        ok = ok and within and min(orders) >= ORACLE_ORDER_MIN
        lines.append(f"{name}: C={C:.2f}, orders {orders[0]:.2f}/{orders[1]:.2f}")
    return ok, "; ".join(lines)


# ----------------------------------------------------------------------------
# pytest entry points
# ----------------------------------------------------------------------------

CRITERIA = [
    (1, "free spectrum exactness", criterion_free_spectrum),
    (2, "symplectic and Lagrange identities", criterion_identities),
    (3, "Nevanlinna positivity", criterion_nevanlinna),
    (4, "Green jump", criterion_green_jump),
    (5, "manufactured resolvent recovery", criterion_manufactured),
    (6, "trace formulas", criterion_traces),
    (7, "multiplicity law", criterion_multiplicity),
    (8, "interlacing and monotonicity", criterion_interlacing),
    (9, "dislocation index", criterion_dislocation),
    (10, "oracle convergence", criterion_oracle_convergence),
]


@pytest.mark.parametrize("number,name,body", CRITERIA, ids=[f"criterion_{n:02d}" for n, _, _ in CRITERIA])
def test_acceptance(number, name, body):
    _run(number, name, body)


if __name__ == "__main__":
    failed = 0
    for number, name, body in CRITERIA:
        try:
            _run(number, name, body)
        except Exception:
            failed += 1
    raise SystemExit(1 if failed else 0)
