import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import HAM, random_source
from oracles import h2
from relayrd import cascade, dscd, rdsolve, regions
from relayrd.dscd import RateTuple
from relayrd.probcore import doubly_symmetric_binary, entropy
from relayrd.rdsolve import InfeasibleError, SolverConfig
from relayrd.regions import Problem, RegionSample

CFG = SolverConfig(restarts=3, seed=0)
H25 = float(h2(0.25))


def tup(r, budgets=(0.1, 0.1)):
    return RateTuple(*[float(v) for v in r], 0.0, 0.0, *budgets)


def sample(points, budgets=(0.1, 0.1)):
    return RegionSample("dscd_inner", [tup(p, budgets) for p in points], budgets)


# ---------------------------------------------------------------- weights and sampling


def test_default_weights():
    ws = regions.default_weights(0)
    assert len(ws) == 16
    np.testing.assert_array_equal(np.array(ws[:4]), np.eye(4))
    assert all(abs(sum(w) - 1) < 1e-12 and min(w) >= 0 for w in ws)
    assert ws == regions.default_weights(0)
    assert ws[4:] != regions.default_weights(1)[4:]


def test_sample_region_shapes(dsbs):
    prob = Problem(dsbs, HAM, HAM, 0.1, 0.1)
    units = [tuple(r) for r in np.eye(4)]
    s = regions.sample_region("dscd_inner", prob, units, CFG)
    assert len(s.tuples) == 4 and not s.failures and s.budgets == (0.1, 0.1)
    # each unit vector minimises its own rate: no other corner does better there
    for i, t in enumerate(s.tuples):
        assert t.rates[i] <= min(u.rates[i] for u in s.tuples) + 1e-3
    one = regions.sample_region("dscd_cutset", prob, [(1, 1, 1, 1)], CFG)
    assert len(one.tuples) == 1 and one.systems == [None]
    with pytest.raises(ValueError):
        regions.sample_region("dscd_inner", prob, [], CFG)
    with pytest.raises(ValueError):
        regions.sample_region("nonsense", prob, units, CFG)
    with pytest.raises(ValueError):
        regions.sample_region("dscd_inner", prob, [(0, 0, 0, 0)], CFG)
    with pytest.raises(ValueError):
        Problem(dsbs, HAM, HAM, -0.1, 0.1)


def test_failures_are_recorded(dsbs):
    prob = Problem(dsbs, HAM, HAM, 0.1, 0.1)
    s = regions.sample_region("kaspi", prob, [(0, 0, 1, 0), (1, 1, 0, 0)], CFG)
    assert len(s.tuples) == 1 and len(s.failures) == 1
    bad = Problem(dsbs, rdsolve.DistortionMeasure(np.array([[0.5, 1.0], [1.0, 0.5]])), HAM, 0.1, 0.1)
    with pytest.raises(InfeasibleError):
        regions.sample_region("dscd_inner", bad, [(1, 1, 1, 1)], CFG)


def test_threads_do_not_change_results():
    prob = Problem(random_source(0), HAM, HAM, 0.12, 0.12)
    ws = regions.default_weights(3, n_random=4)
    a = regions.sample_region("dscd_outer", prob, ws, CFG, threads=1)
    b = regions.sample_region("dscd_outer", prob, ws, CFG, threads=3)
    np.testing.assert_array_equal(a.points, b.points)


def test_spread_hull_contains_generators(dsbs):
    prob = Problem(dsbs, HAM, HAM, 0.1, 0.1)
    s = regions.sample_region("dscd_inner", prob, regions.default_weights(0), CFG)
    assert len(s.tuples) == 16
    hull = regions.convex_hull(s)
    assert all(regions.contains(hull, t.rates, 1e-9) for t in s.tuples)


# ---------------------------------------------------------------- hulls


def test_hull_examples():
    one = sample([(1, 2, 3, 4)])
    assert regions.convex_hull(one).points.tolist() == [[1, 2, 3, 4]]
    two = sample([(1, 0, 0, 0), (0, 1, 0, 0)])
    h = regions.convex_hull(two)
    assert len(h.tuples) == 2 and h.hulled
    assert regions.contains(h, (0.5, 0.5, 0, 0))
    assert not regions.contains(h, (0.4, 0.4, 0, 0))
    corners = [tuple(r) for r in np.eye(4)]
    h = regions.convex_hull(sample(corners + [(0.3, 0.3, 0.3, 0.3)]))
    assert sorted(map(tuple, h.points)) == sorted(corners)
    # dominated and duplicate points go as well
    h = regions.convex_hull(sample([(1, 1, 1, 1), (2, 1, 1, 1), (1, 1, 1, 1)]))
    assert h.points.tolist() == [[1, 1, 1, 1]]


points4 = st.lists(st.tuples(*[st.floats(0, 1)] * 4), min_size=1, max_size=7)


@settings(max_examples=40, deadline=None)
@given(points4)
def test_hull_idempotent_and_contains_generators(pts):
    s = sample(pts)
    h = regions.convex_hull(s)
    hh = regions.convex_hull(h)
    assert sorted(map(tuple, h.points)) == sorted(map(tuple, hh.points))
    for p in pts:
        assert regions.contains(h, p, 1e-9)


# ---------------------------------------------------------------- dominance


def test_dominates_examples():
    a = tup((0.1, 0.2, 0.3, 0.4))
    assert regions.dominates(a, a)
    tol = 1e-3
    b = tup((0.1, 0.2, 0.3 + 2 * tol, 0.4))
    assert regions.dominates(a, b, tol) and not regions.dominates(b, a, tol)
    with pytest.raises(ValueError):
        regions.dominates(a, tup((0.1, 0.2, 0.3, 0.4), (0.2, 0.1)))


def test_cutset_dominates_outer_tuple():
    js = random_source(1)
    cut = dscd.cutset_dscd(js, HAM, HAM, 0.12, 0.12, CFG)
    outer, _ = dscd.outer_bound_dscd(dscd.BoundRequest(js, HAM, HAM, 0.12, 0.12, (1, 1, 1, 1), CFG))
    assert regions.dominates(cut, outer, 1e-2)


@settings(max_examples=60, deadline=None)
@given(*[st.tuples(*[st.floats(0, 1)] * 4)] * 3)
def test_dominance_preorder(a, b, c):
    tol = 1e-3
    A, B, C = tup(a), tup(b), tup(c)
    assert regions.dominates(A, A, tol)
    if regions.dominates(A, B, tol) and regions.dominates(B, C, tol):
        assert regions.dominates(A, C, 2 * tol)


# ---------------------------------------------------------------- scenarios


def test_case1_lossless(dsbs):
    rep = regions.scenario_case1(dsbs, HAM, HAM, 0.0, 0.0, CFG)
    inner = rep.tuples["dscd_inner"]
    assert inner.R_RA == pytest.approx(H25, abs=1e-3) and inner.R_RB == pytest.approx(H25, abs=1e-3)
    assert rep.thresholds["H(X|Z)"] == pytest.approx(1.0, abs=1e-10)
    assert rep.thresholds["H(Y|Z)"] == pytest.approx(1.0, abs=1e-10)
    assert rep.checks["tightness_RA"] <= 1e-3 and rep.checks["tightness_RB"] <= 1e-3
    assert rep.tolerances["dominance"] == regions.DEFAULT_TOL


def test_case1_lossy_verdict(dsbs):
    rep = regions.scenario_case1(dsbs, HAM, HAM, 0.1, 0.1, CFG)
    assert rep.verdict == "dscd point outside cascade outer bound"
    assert rep.checks["tightness_RA"] <= 1e-3 and rep.checks["tightness_RB"] <= 1e-3
    for name, (t, g) in {"H(X|Z)": ("X", "Z"), "H(Y|Z)": ("Y", "Z")}.items():
        assert rep.thresholds[name] == pytest.approx(entropy(dsbs, t, g), abs=1e-10)


def test_case1_omniscient_relay_and_degenerate():
    js = doubly_symmetric_binary(0.25, z_size=4, z_of=lambda x, y: 2 * x + y)
    rep = regions.scenario_case1(js, HAM, HAM, 0.1, 0.1, CFG)
    assert rep.thresholds["H(X|Z)"] <= 1e-12 and rep.thresholds["H(Y|Z)"] <= 1e-12
    assert rep.tuples["dscd_inner"].R_RA == pytest.approx(
        rdsolve.conditional_rd(js, HAM, 0.1, source="Y", side=("X",)).rate, abs=1e-3)
    rep = regions.scenario_case1(js, HAM, HAM, 0.25, 0.25, CFG)
    assert rep.verdict == "degenerate-equal"


def test_case2(dsbs):
    rep = regions.scenario_case2(dsbs, HAM, HAM, 0.1, 0.1, CFG)
    wz = rdsolve.wyner_ziv(dsbs, HAM, 0.1, CFG, source="X", side=("Y",)).rate
    assert rep.tuples["kaspi_restricted"].R_AR == pytest.approx(wz, abs=1e-2)
    assert rep.checks["match_AR"] <= 1e-2 and rep.checks["match_BR"] <= 1e-2
    assert rep.verdict in ("interaction lowers rates", "no improvement found")
    ra, rb = cascade.kaspi_thresholds(dsbs)
    assert rep.thresholds == {"H(Y,Z|X)": ra, "H(X,Z|Y)": rb}
    assert "one-directional" in rep.notes


def test_case2_degenerate_and_identical():
    js = random_source(5)
    DA = rdsolve.dmax(js, HAM, ("X", "Z"), "Y")
    DB = rdsolve.dmax(js, HAM, ("Y", "Z"), "X")
    assert regions.scenario_case2(js, HAM, HAM, DA, DB, CFG).verdict == "degenerate"
    same = doubly_symmetric_binary(0.0)
    rep = regions.scenario_case2(same, HAM, HAM, 0.0, 0.0, CFG)
    assert rep.tuples["kaspi"].R_AR <= 1e-6
