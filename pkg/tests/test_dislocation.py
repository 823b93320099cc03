import math

import numpy as np
import pytest

from diracstar.dislocation import (StabilizationError, central_gap, dislocation_report, kappa_counting,
                                   kappa_counting_details, kappa_from_eigenvalues, kappa_integral,
                                   kappa_integral_details)
from diracstar.graph import Robin
from diracstar.oracle import discretize, oracle_eigenvalues
from diracstar.spectrum import edge_eigenvalues

from _support import constant_edge, free_edge, graph_of, random_edge

PI = math.pi


@pytest.mark.parametrize("alpha, length", [(PI / 2, 1.0), (0.0, 1.0), (0.3, 2.5), (2.7, 0.8)])
def test_free_edge_has_zero_kappa(alpha, length):
    e = free_edge(alpha, length)
    assert kappa_counting(e) == 0
    assert kappa_integral(e) == 0


def test_constant_mass_edge_kappa_minus_two():
    # spectrum -1 and +-sqrt(1 + (k pi)^2): one extra negative eigenvalue against the free alpha=0 edge
    e = constant_edge(1.0)
    assert kappa_counting(e) == -2
    det = kappa_integral_details(e)
    assert det.kappa == -2 and det.residual <= 1e-3
    assert kappa_from_eigenvalues(e, edge_eigenvalues(e, (-40, 40)), 5) == -2


def test_kappa_from_oracle_eigenvalues():
    e = constant_edge(1.0)
    op = discretize(graph_of(e), Robin(0.0), M=256)
    eigs = oracle_eigenvalues(op, (-30, 30))
    assert kappa_from_eigenvalues(e, eigs, 5) == -2


def test_kappa_from_closed_form_eigenvalues():
    e = free_edge(0.3, 2.5)
    eigs = [(0.3 + k * PI) / 2.5 for k in range(-20, 20)]
    assert kappa_from_eigenvalues(e, eigs, 6) == 0


def test_central_gap():
    lo, hi = central_gap(constant_edge(1.0))
    assert lo == pytest.approx(-1.0, abs=1e-9)
    assert hi == pytest.approx(math.sqrt(1 + PI ** 2), abs=1e-9)


def test_integral_independent_of_omega():
    e = constant_edge(1.0)
    lo, hi = central_gap(e)
    values = [kappa_integral_details(e, lo + f * (hi - lo)) for f in (0.2, 0.45, 0.8)]
    assert {v.kappa for v in values} == {-2}
    assert max(v.residual for v in values) <= 1e-3


def test_counting_agrees_for_half_delta():
    rng = np.random.default_rng(1)
    for _ in range(3):
        e = random_edge(rng)
        d = PI / (4 * e.length)
        assert kappa_counting_details(e, d).kappa == kappa_counting_details(e, 0.5 * d).kappa


def test_routes_agree_and_kappa_is_even():
    rng = np.random.default_rng(2)
    for _ in range(6):
        e = random_edge(rng)
        k = kappa_counting(e)
        assert k % 2 == 0
        assert kappa_integral(e) == k


def test_twin_free_report():
    rep = dislocation_report(graph_of(free_edge(), free_edge()), math.inf, [20.0, 50.0])
    assert rep.kappa == [0, 0] and rep.kappa0 == 0
    assert rep.n_ge == 2 and rep.n_le == 2
    # simple eigenvalues k pi include 0 on the nonnegative side
    assert rep.d_R == [(20.0, 1), (50.0, 1)]
    assert rep.ok and all(abs(d) <= 4 for _, d in rep.d_R)
    d = rep.to_dict()
    assert d["schema"] == "dislocation-report/1" and d["ok"] is True


def test_report_kappa0_is_sum():
    rng = np.random.default_rng(3)
    edges = [constant_edge(1.0), random_edge(rng), free_edge(0.4)]
    rep = dislocation_report(graph_of(*edges), 1.5, [15.0, 30.0])
    assert rep.kappa0 == sum(rep.kappa) == sum(kappa_counting(e) for e in edges)
    assert rep.ok


@pytest.mark.parametrize("alpha, allowed", [(0.3, {0, 1}), (PI / 2, {-1, 0, 1}), (2.5, {-1, 0})])
def test_edge_deviation_by_boundary_angle(alpha, allowed):
    g = graph_of(free_edge(alpha), constant_edge(1.0, alpha=alpha), constant_edge(-0.5, 0.7, alpha=alpha))
    rep = dislocation_report(g, 1.0, [10.3, 20.7, 30.1, 41.9], edge_details=True)
    assert {d for row in rep.edge_deviation for d in row} <= allowed


def test_argument_errors():
    e = constant_edge(1.0)
    with pytest.raises(ValueError):
        kappa_counting_details(e, 0.0)
    with pytest.raises(ValueError):
        kappa_counting_details(e, PI / (2 * e.length))
    with pytest.raises(ValueError):
        kappa_integral_details(e, omega=5.0)
    with pytest.raises(ValueError):
        kappa_integral_details(free_edge(PI / 2), omega=PI / 2 - 1e-12)
    with pytest.raises(StabilizationError):
        kappa_counting_details(e, k_max=3)
    with pytest.raises(ValueError):
        dislocation_report(graph_of(e), 1.0, [20.0, 10.0])
