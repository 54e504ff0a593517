"""Invariant suite run by ``relayrd verify`` on a configured problem.

Every check reports a measured violation that must not exceed its
tolerance (a negative value means slack to spare).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import cascade, dscd, rdsolve, regions
from .probcore import ConditionalChannel, entropy, extend, marginal
from .rdsolve import SolverConfig


@dataclass
class Check:
    name: str
    measured: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.measured) and self.measured <= self.tolerance)


def _chain(prob: regions.Problem, cfg: SolverConfig) -> list[Check]:
    js, d, D = prob.js, prob.d_B, prob.D_B
    wz = rdsolve.wyner_ziv(js, d, D, cfg, source="X", side=("Y",)).rate
    enc = rdsolve.wz_star(js, d, D, rdsolve.ENC_ONLY, cfg).rate
    encdec = rdsolve.wz_star(js, d, D, rdsolve.ENC_AND_DEC, cfg).rate
    cond = rdsolve.conditional_rd(js, d, D, source="X", side=("Y", "Z")).rate
    return [Check("chain_wz_ge_wzstar_enc", enc - wz, 1e-2),
            Check("chain_wzstar_enc_ge_encdec", encdec - enc, 1e-2),
            Check("chain_encdec_ge_conditional", cond - encdec, 1e-2)]


def _probability(prob: regions.Problem, cfg: SolverConfig) -> list[Check]:
    js = prob.js
    chain = abs(entropy(js, ("X", "Y")) - entropy(js, "X") - entropy(js, "Y", "X"))
    rng = cfg.rng(10_000)
    m = rng.gamma(1.0, size=(js.size("X"), 3))
    ch = ConditionalChannel.new("U", 3, ("X",), m / m.sum(axis=1, keepdims=True))
    back = marginal(extend(js, ch), ("X", "Y", "Z")).pmf
    # decoder optimality: no single-symbol change of the optimal decoder helps
    dec, base = rdsolve.optimal_decoder(js, ("Y",), "X", prob.d_B)
    p = rdsolve.pair_table(js, ("Y",), ("X",))
    worst = -np.inf
    for y in range(dec.size):
        for xh in range(prob.d_B.recon_size):
            alt = dec.copy()
            alt[y] = xh
            dist = float(sum(p[i] @ prob.d_B.matrix[:, alt[i]] for i in range(dec.size)))
            worst = max(worst, base - dist)
    return [Check("entropy_chain_rule", chain, 1e-10),
            Check("extend_then_marginal", float(np.abs(back - js.pmf).max()), 1e-14),
            Check("decoder_optimality", worst, 1e-12)]


def _dscd(prob: regions.Problem, cfg: SolverConfig, weights, threads: int) -> list[Check]:
    inner = regions.sample_region("dscd_inner", prob, weights, cfg, threads)
    outer = regions.sample_region("dscd_outer", prob, weights, cfg, threads)
    cut = dscd.cutset_dscd(prob.js, prob.d_A, prob.d_B, prob.D_A, prob.D_B, cfg)
    by_w = {t.weights: t for t in outer.tuples}
    cut_gap = max((cut.weighted(w) - by_w[w].weighted(w) for w in by_w), default=-np.inf)
    # outer bound warm-started at every inner solution
    res = list(zip(inner.tuples, inner.systems))
    warm = inner.systems
    cards = warm[0].cards
    again = dscd.solve_batch("outer", prob.js, prob.d_A, prob.d_B, prob.D_A, prob.D_B,
                             [t.weights for t in inner.tuples], cfg, cards, warm)
    contain = max(o[0].weighted() - i[0].weighted() for i, o in zip(res, again))
    feas, markov = -np.inf, -np.inf
    for rt, sys in res:
        _, (dA, dB) = dscd.evaluate_system("inner", prob.js, prob.d_A, prob.d_B, sys)
        feas = max(feas, dA - prob.D_A, dB - prob.D_B)
        markov = max(markov, *sys.markov_slacks(prob.js))
    hull = regions.convex_hull(inner)
    cover = max(0.0 if regions.contains(hull, t.rates, 1e-9) else 1.0 for t in inner.tuples)
    return [Check("cutset_below_outer", cut_gap, 1e-2),
            Check("outer_below_inner_warm", contain, 1e-2),
            Check("inner_feasible_recomputed", feas, 1e-6),
            Check("dscd_markov_chains", markov, 1e-9),
            Check("hull_contains_generators", cover, 0.0)]


def _degenerate(prob: regions.Problem, cfg: SolverConfig) -> list[Check]:
    js = prob.js
    DA = rdsolve.dmax(js, prob.d_A, ("X",), "Y")
    DB = rdsolve.dmax(js, prob.d_B, ("Y",), "X")
    w = [(1, 1, 1, 1)]
    worst = 0.0
    for kind in ("inner", "outer"):
        rt, _ = dscd.solve_batch(kind, js, prob.d_A, prob.d_B, DA, DB, w, cfg)[0]
        worst = max(worst, rt.rates.max())
    worst = max(worst, dscd.cutset_dscd(js, prob.d_A, prob.d_B, DA, DB, cfg).rates.max())
    worst = max(worst, cascade.outer_bound_cascade(js, prob.d_A, prob.d_B, DA, DB, cfg).rates.max())
    rt, _ = cascade.kaspi_two_round(js, prob.d_A, prob.d_B, DA, DB, (1, 1), cfg)
    worst = max(worst, rt.R_AR, rt.R_BR)
    return [Check("zero_rates_at_dmax", float(worst), 1e-6)]


def _cascade(prob: regions.Problem, cfg: SolverConfig) -> list[Check]:
    rt, sys = cascade.inner_bound_cascade(prob.js, prob.d_A, prob.d_B, prob.D_A, prob.D_B, (1, 1, 1, 1),
                                          "recover_forward", cfg)
    audit = cascade.rate_audit(prob.js, sys)
    diff = max(abs(audit[k] - getattr(rt, k)) for k in dscd.RATE_NAMES)
    return [Check("cascade_rate_audit", diff, 1e-12)]


SUITE: list[tuple[str, Callable]] = [("chain", _chain), ("probability", _probability), ("dscd", _dscd),
                                     ("degenerate", _degenerate), ("cascade", _cascade)]


def run_suite(prob: regions.Problem, cfg: SolverConfig, weights=None, threads: int = 1) -> list[Check]:
    weights = weights or [tuple(r) for r in np.eye(4)] + [(1.0, 1.0, 1.0, 1.0)]
    out: list[Check] = []
    for name, fn in SUITE:
        out += fn(prob, cfg, weights, threads) if name == "dscd" else fn(prob, cfg)
    return out
