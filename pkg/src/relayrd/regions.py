"""Rate-region samples by weighted scalarisation, upward convex hulls,
dominance checks and the two extreme-regime comparisons."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from . import cascade, dscd, rdsolve
from .dscd import RateTuple
from .probcore import JointSource, entropy
from .rdsolve import DistortionMeasure, InfeasibleError, SolverConfig

SCHEMES = ("dscd_inner", "dscd_outer", "dscd_cutset", "cascade_inner", "cascade_outer", "kaspi")
DEFAULT_TOL = 1e-3
# weight vectors solved together; fixed so results do not depend on the thread count
CHUNK = 4


@dataclass(frozen=True)
class Problem:
    js: JointSource
    d_A: DistortionMeasure
    d_B: DistortionMeasure
    D_A: float
    D_B: float

    def __post_init__(self):
        dscd.check_problem(self.js, self.d_A, self.d_B, self.D_A, self.D_B)


@dataclass
class RegionSample:
    scheme: str
    tuples: list[RateTuple]
    budgets: tuple[float, float]
    hulled: bool = False
    # weight vectors whose solve failed, with the reason
    failures: list[tuple[tuple[float, ...], str]] = field(default_factory=list)
    # optimising auxiliary system per tuple (None for closed-form bounds)
    systems: list = field(default_factory=list, repr=False)

    @property
    def points(self) -> np.ndarray:
        return np.array([t.rates for t in self.tuples]).reshape(-1, 4)


def default_weights(seed: int = 0, n_random: int = 12) -> list[tuple[float, ...]]:
    """The four unit vectors plus ``n_random`` random nonnegative directions."""
    rng = np.random.Generator(np.random.Philox(seed))
    ws = [tuple(float(v) for v in row) for row in np.eye(4)]
    for row in rng.exponential(size=(n_random, 4)):
        ws.append(tuple(float(v) for v in row / row.sum()))
    return ws


def _chunk_solve(scheme: str, prob: Problem, ws, cfg: SolverConfig, opts: dict):
    if scheme in ("dscd_inner", "dscd_outer"):
        kind = "inner" if scheme == "dscd_inner" else "outer"
        res = dscd.solve_batch(kind, prob.js, prob.d_A, prob.d_B, prob.D_A, prob.D_B, ws, cfg,
                               opts.get("cards"))
        return res
    if scheme == "cascade_inner":
        res = cascade.solve_batch(prob.js, prob.d_A, prob.d_B, prob.D_A, prob.D_B, ws,
                                  opts.get("template", "full"), cfg, opts.get("cards"))
        return res
    if scheme == "kaspi":
        out = []
        for w in ws:
            if w[0] == 0 and w[1] == 0:
                out.append(ValueError("kaspi weights need a positive entry on R_AR or R_BR"))
                continue
            out.append(cascade.kaspi_two_round(prob.js, prob.d_A, prob.d_B, prob.D_A, prob.D_B, w, cfg,
                                               restricted=opts.get("restricted", False)))
        return out
    raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


def sample_region(scheme: str, prob: Problem, weights: Sequence[Sequence[float]] | None = None,
                  cfg: SolverConfig | None = None, threads: int = 1, **opts) -> RegionSample:
    """One rate tuple per weight vector; failed solves are recorded and left out."""
    cfg = cfg or SolverConfig()
    weights = [dscd.check_weights(w) for w in (weights if weights is not None else default_weights(cfg.seed))]
    if not weights:
        raise ValueError("weight set is empty")
    budgets = (prob.D_A, prob.D_B)
    if scheme in ("dscd_cutset", "cascade_outer"):
        fn = dscd.cutset_dscd if scheme == "dscd_cutset" else cascade.outer_bound_cascade
        t = fn(prob.js, prob.d_A, prob.d_B, prob.D_A, prob.D_B, cfg, opts.get("reading", "wyner_ziv"))
        tuples = []
        for w in weights:
            c = RateTuple(**{**t.__dict__, "weights": w})
            tuples.append(c)
        return RegionSample(scheme, tuples, budgets, systems=[None] * len(tuples))
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    chunks = [weights[i:i + CHUNK] for i in range(0, len(weights), CHUNK)]

    def run(ws):
        try:
            return _chunk_solve(scheme, prob, ws, cfg, opts)
        except (InfeasibleError, ValueError) as exc:
            return [exc] * len(ws)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]
    tuples, failures, systems = [], [], []
    for ws, res in zip(chunks, results):
        for w, r in zip(ws, res):
            if isinstance(r, tuple):
                tuples.append(r[0])
                systems.append(r[1])
            else:
                failures.append((w, str(r) if r is not None else "no feasible point found"))
    if not tuples:
        raise InfeasibleError(f"every {scheme} solve failed: {failures[0][1]}")
    return RegionSample(scheme, tuples, budgets, failures=failures, systems=systems)


# ---------------------------------------------------------------- hulls and dominance


def _combination_below(others: np.ndarray, p: np.ndarray, tol: float) -> bool:
    """Is some convex combination of ``others`` componentwise <= p + tol?"""
    if len(others) == 0:
        return False
    n, m = others.shape
    # minimise the worst excess t over the simplex, then recheck the witness exactly
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.hstack([others.T, -np.ones((m, 1))])
    A_eq = np.concatenate([np.ones(n), [0.0]])[None]
    res = linprog(c, A_ub=A_ub, b_ub=p, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * n + [(None, None)], method="highs")
    if res.status != 0:
        return False
    x = np.maximum(res.x[:n], 0.0)
    x /= x.sum()
    return bool(np.max(others.T @ x - p) <= tol)


def contains(sample: RegionSample, rates: Sequence[float], tol: float = 1e-9) -> bool:
    """Whether ``rates`` lies in the upward-closed convex hull of the sample."""
    return _combination_below(sample.points, np.asarray(rates, dtype=float), tol)


def convex_hull(sample: RegionSample, tol: float = 1e-12) -> RegionSample:
    """Upward-closed convex hull, keeping only points no other points' mixture dominates."""
    keep = list(range(len(sample.tuples)))
    pts = sample.points
    # drop exact repeats first so two copies cannot eliminate each other
    uniq = []
    for i in keep:
        if not any(np.all(np.abs(pts[i] - pts[j]) <= tol) for j in uniq):
            uniq.append(i)
    keep = uniq
    changed = True
    while changed:
        changed = False
        for i in list(keep):
            rest = [j for j in keep if j != i]
            if _combination_below(pts[rest], pts[i], tol):
                keep.remove(i)
                changed = True
    systems = [sample.systems[i] for i in keep] if sample.systems else []
    return RegionSample(sample.scheme, [sample.tuples[i] for i in keep], sample.budgets, True,
                        list(sample.failures), systems)


def dominates(a: RateTuple, b: RateTuple, tol: float = DEFAULT_TOL) -> bool:
    """a <= b + tol on all four rates (so ``a`` is at least as good as ``b``)."""
    if not np.allclose(a.budgets, b.budgets, rtol=0, atol=1e-12):
        raise ValueError(f"budget mismatch: {a.budgets} vs {b.budgets}")
    return bool(np.all(a.rates <= b.rates + tol))


# ---------------------------------------------------------------- scenarios


@dataclass
class ScenarioReport:
    scenario: str
    thresholds: dict[str, float]
    tuples: dict[str, RateTuple]
    verdict: str
    tolerances: dict[str, float]
    checks: dict[str, float] = field(default_factory=dict)
    notes: str = ""


def scenario_case1(js: JointSource, d_A: DistortionMeasure, d_B: DistortionMeasure, D_A: float, D_B: float,
                   cfg: SolverConfig | None = None, tol: float = DEFAULT_TOL) -> ScenarioReport:
    """Relay links from the terminals wide enough to carry both sources losslessly.

    Only the delivery rates matter: the inner bound is solved with zero
    weight on R_AR and R_BR and compared with the conditional
    rate-distortion functions (tightness), and with the cascade outer bound
    on the relay-to-terminal links.
    """
    cfg = cfg or SolverConfig()
    thresholds = {"H(X|Z)": entropy(js, "X", "Z"), "H(Y|Z)": entropy(js, "Y", "Z")}
    inner, _ = dscd.inner_bound_dscd(dscd.BoundRequest(js, d_A, d_B, D_A, D_B, (0, 0, 1, 1), cfg))
    r_ya = rdsolve.conditional_rd(js, d_A, D_A, source="Y", side=("X",)).rate
    r_xb = rdsolve.conditional_rd(js, d_B, D_B, source="X", side=("Y",)).rate
    outer = cascade.outer_bound_cascade(js, d_A, d_B, D_A, D_B, cfg)
    checks = {"tightness_RA": abs(inner.R_RA - r_ya), "tightness_RB": abs(inner.R_RB - r_xb),
              "cascade_gap_RA": outer.R_RA - inner.R_RA, "cascade_gap_RB": outer.R_RB - inner.R_RB}
    rates = [inner.R_RA, inner.R_RB, outer.R_RA, outer.R_RB]
    if max(rates) <= tol:
        verdict = "degenerate-equal"
    elif max(checks["cascade_gap_RA"], checks["cascade_gap_RB"]) > tol:
        verdict = "dscd point outside cascade outer bound"
    elif min(checks["cascade_gap_RA"], checks["cascade_gap_RB"]) >= -tol:
        verdict = "on boundary"
    else:
        verdict = "inside"
    return ScenarioReport("case1", thresholds, {"dscd_inner": inner, "cascade_outer": outer}, verdict,
                          {"dominance": tol}, checks,
                          "relay rates compared; R_AR and R_BR assumed above the thresholds")


def scenario_case2(js: JointSource, d_A: DistortionMeasure, d_B: DistortionMeasure, D_A: float, D_B: float,
                   cfg: SolverConfig | None = None, tol: float = DEFAULT_TOL,
                   match_tol: float = 1e-2) -> ScenarioReport:
    """Relay-to-terminal links wide enough to forward everything the relay holds.

    The cascade reduces to two-message interactive coding.  With the second
    description independent of the first it meets the cut-set rates of the
    distributed scheme; the unrestricted solve (warm-started there) shows
    whether interaction lowers them.  Evidence is one-directional: the
    inner bound need not be tight here.
    """
    cfg = cfg or SolverConfig()
    ra, rb = cascade.kaspi_thresholds(js)
    thresholds = {"H(Y,Z|X)": ra, "H(X,Z|Y)": rb}
    restricted, sys = cascade.kaspi_two_round(js, d_A, d_B, D_A, D_B, (1, 1), cfg, restricted=True)
    free, _ = cascade.kaspi_two_round(js, d_A, d_B, D_A, D_B, (1, 1), cfg, restricted=False, warm=sys)
    cut = dscd.cutset_dscd(js, d_A, d_B, D_A, D_B, cfg)
    checks = {"match_AR": abs(restricted.R_AR - cut.R_AR), "match_BR": abs(restricted.R_BR - cut.R_BR),
              "improvement": restricted.R_AR + restricted.R_BR - free.R_AR - free.R_BR}
    if max(restricted.R_AR, restricted.R_BR, free.R_AR, free.R_BR) <= tol:
        verdict = "degenerate"
    elif checks["improvement"] > tol:
        verdict = "interaction lowers rates"
    else:
        verdict = "no improvement found"
    return ScenarioReport("case2", thresholds, {"kaspi_restricted": restricted, "kaspi": free, "dscd_cutset": cut},
                          verdict, {"dominance": tol, "match": match_tol}, checks,
                          "one-directional evidence: the two-round inner bound may not be tight")
