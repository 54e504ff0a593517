"""Bounds for the scheme where both terminals describe their sources to the
relay, which then delivers descriptions back (distributed coding + delivery).

Outer bound: minimise a weighted sum of
    I(X;U1|Z,Y), I(Y;U2|Z,X), I(Y;V2|X,U1), I(X;V1|Y,U2)
over p(u1|x) p(u2|y) p(v1,v2|z,u1,u2) with decoders psi_A(X,U1,V2) for Y
and psi_B(Y,U2,V1) for X.

Inner bound: the same factorisation with Berger-Tung rates at the relay,
    R_AR >= I(X;U1|Z,U2), R_BR >= I(Y;U2|Z,U1), R_AR+R_BR >= I(X,Y;U1,U2|Z),
    R_RA >= I(U2,Z;V2|X,U1), R_RB >= I(U1,Z;V1|Y,U2),
and decoders psi_A(X,V2), psi_B(Y,V1).  Time sharing is left to the hull
taken in :mod:`relayrd.regions`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import rdsolve
from .auxopt import AuxModel, Block, Budget
from .probcore import ConditionalChannel, JointSource, SourceError, extend, markov_slack, mutual_information
from .rdsolve import FEAS_TOL, DistortionMeasure, InfeasibleError, SolverConfig

RATE_NAMES = ("R_AR", "R_BR", "R_RA", "R_RB")
MARKOV_TOL = 1e-9


@dataclass
class RateTuple:
    """Rates in bits/symbol, ordered (R_AR, R_BR, R_RA, R_RB) throughout."""

    R_AR: float
    R_BR: float
    R_RA: float
    R_RB: float
    D_A: float
    D_B: float
    budget_A: float
    budget_B: float
    weights: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0)
    feasible: bool = True
    # every constraint right-hand side, for bounds with more than four
    profile: dict[str, float] = field(default_factory=dict)

    @property
    def rates(self) -> np.ndarray:
        return np.array([self.R_AR, self.R_BR, self.R_RA, self.R_RB])

    def weighted(self, w=None) -> float:
        w = np.asarray(self.weights if w is None else w, dtype=float)
        return float(w @ self.rates)

    @property
    def budgets(self) -> tuple[float, float]:
        return (self.budget_A, self.budget_B)


@dataclass
class DscdAuxSystem:
    """p(u1|x), p(u2|y) and the joint delivery channel p(v1,v2|z,u1,u2)."""

    u1: ConditionalChannel
    u2: ConditionalChannel
    v: ConditionalChannel

    @property
    def cards(self) -> dict[str, int]:
        return {"U1": self.u1.output_sizes[0], "U2": self.u2.output_sizes[0],
                "V1": self.v.output_sizes[0], "V2": self.v.output_sizes[1]}

    def joint(self, js: JointSource) -> JointSource:
        return extend(extend(extend(js, self.u1), self.u2), self.v)

    def markov_slacks(self, js: JointSource) -> tuple[float, float, float]:
        j = self.joint(js)
        return (markov_slack(j, "U1", "X", ("Y", "Z")),
                markov_slack(j, "U2", "Y", ("X", "Z")),
                markov_slack(j, ("V1", "V2"), ("Z", "U1", "U2"), ("X", "Y")))


@dataclass
class BoundRequest:
    js: JointSource
    d_A: DistortionMeasure
    d_B: DistortionMeasure
    D_A: float
    D_B: float
    weights: Sequence[float] = (1.0, 1.0, 1.0, 1.0)
    cfg: SolverConfig = field(default_factory=SolverConfig)
    warm_start: DscdAuxSystem | None = None
    # per-auxiliary alphabet sizes; missing entries use the defaults
    cards: dict[str, int] | None = None

    def __post_init__(self):
        check_problem(self.js, self.d_A, self.d_B, self.D_A, self.D_B)
        self.weights = check_weights(self.weights)


def check_problem(js, d_A, d_B, D_A, D_B):
    if tuple(js.labels[:3]) != ("X", "Y", "Z") or len(js.labels) != 3:
        raise SourceError(f"expected a source over (X, Y, Z), got labels {js.labels}")
    if d_A.source_size != js.size("Y"):
        raise SourceError(f"d_A has {d_A.source_size} rows but |Y| = {js.size('Y')}")
    if d_B.source_size != js.size("X"):
        raise SourceError(f"d_B has {d_B.source_size} rows but |X| = {js.size('X')}")
    if D_A < 0 or D_B < 0:
        raise ValueError("distortion budgets must be >= 0")


def check_weights(w) -> tuple[float, ...]:
    w = tuple(float(v) for v in w)
    if len(w) != 4 or any(v < 0 or not np.isfinite(v) for v in w) or not any(w):
        raise ValueError(f"weights must be 4 nonnegative numbers, not all zero; got {w}")
    return w


def min_distortions(js: JointSource, d_A: DistortionMeasure, d_B: DistortionMeasure) -> tuple[float, float]:
    """Distortions reached when each terminal learns the other's source exactly."""
    py, px = js.table("Y"), js.table("X")
    return rdsolve.dmin(py, d_A.matrix), rdsolve.dmin(px, d_B.matrix)


def check_reachable(js, d_A, d_B, D_A, D_B):
    lo_A, lo_B = min_distortions(js, d_A, d_B)
    if D_A < lo_A - FEAS_TOL:
        raise InfeasibleError(f"D_A = {D_A} is below the minimum achievable distortion {lo_A}")
    if D_B < lo_B - FEAS_TOL:
        raise InfeasibleError(f"D_B = {D_B} is below the minimum achievable distortion {lo_B}")


def default_cards(js: JointSource, d_A: DistortionMeasure, d_B: DistortionMeasure,
                  cfg: SolverConfig, cards: dict[str, int] | None = None) -> dict[str, int]:
    base = {"U1": js.size("X") + 2, "U2": js.size("Y") + 2,
            "V1": d_B.recon_size + 1, "V2": d_A.recon_size + 1}
    if cfg.card is not None:
        base = {k: min(v, cfg.card) for k, v in base.items()}
    base.update(cards or {})
    return base


# ---------------------------------------------------------------- models

_BLOCKS = [Block(("U1",), ("X",)), Block(("U2",), ("Y",)), Block(("V1", "V2"), ("Z", "U1", "U2"))]
_OUTER_TERMS = [(("X",), ("U1",), ("Z", "Y")), (("Y",), ("U2",), ("Z", "X")),
                (("Y",), ("V2",), ("X", "U1")), (("X",), ("V1",), ("Y", "U2"))]
_INNER_TERMS = [(("X",), ("U1",), ("Z", "U2")), (("Y",), ("U2",), ("Z", "U1")),
                (("X", "Y"), ("U1", "U2"), ("Z",)),
                (("U2", "Z"), ("V2",), ("X", "U1")), (("U1", "Z"), ("V1",), ("Y", "U2"))]


def _model(kind: str, js, d_A, d_B, D_A, D_B, cards) -> AuxModel:
    if kind == "outer":
        terms = _OUTER_TERMS
        budgets = [Budget("Y", ("X", "U1", "V2"), d_A.matrix, D_A), Budget("X", ("Y", "U2", "V1"), d_B.matrix, D_B)]
    else:
        terms = _INNER_TERMS
        budgets = [Budget("Y", ("X", "V2"), d_A.matrix, D_A), Budget("X", ("Y", "V1"), d_B.matrix, D_B)]
    order = {k: cards[k] for k in ("U1", "U2", "V1", "V2")}
    return AuxModel(js, order, _BLOCKS, terms, budgets)


def inner_coefficients(w: Sequence[float]) -> np.ndarray:
    """Weights on (a, b, s, R_RA, R_RB) giving the minimum of w.R over the
    Berger-Tung polymatroid {R_AR >= a, R_BR >= b, R_AR + R_BR >= s}."""
    m = min(w[0], w[1])
    return np.array([w[0] - m, w[1] - m, m, w[2], w[3]])


def inner_rates(terms: np.ndarray, w: Sequence[float]) -> tuple[float, float, float, float]:
    """Vertex of the polymatroid selected by ``w`` plus the delivery rates."""
    a, b, s, ra, rb = (max(float(t), 0.0) for t in terms)
    if w[0] >= w[1]:
        r_ar, r_br = a, max(s - a, 0.0)
    else:
        r_ar, r_br = max(s - b, 0.0), b
    return r_ar, r_br, ra, rb


def _best_index(d: DistortionMeasure) -> np.ndarray:
    return d.matrix.argmin(axis=1)


def structured_inits(model: AuxModel, js: JointSource, d_A, d_B) -> list[list[np.ndarray]]:
    """Constant, lossless and half-lossless starting systems."""
    bx, by = _best_index(d_B), _best_index(d_A)
    u1_id = model.channel_from_fn(0, lambda s: (s["X"],))
    u2_id = model.channel_from_fn(1, lambda s: (s["Y"],))
    const = model.constant_channels()
    nx, ny = js.size("X"), js.size("Y")

    def deliver(s):
        # forward the best reconstruction of each source when U carries it exactly
        v1 = bx[s["U1"]] if s["U1"] < nx else 0
        v2 = by[s["U2"]] if s["U2"] < ny else 0
        return (v1, v2)

    v_id = model.channel_from_fn(2, deliver)
    return [const, [u1_id, u2_id, v_id], [u1_id, u2_id, const[2]],
            [u1_id, const[1], model.channel_from_fn(2, lambda s: (deliver(s)[0], 0))],
            [const[0], u2_id, model.channel_from_fn(2, lambda s: (0, deliver(s)[1]))]]


def _system(model: AuxModel, chans: Sequence[np.ndarray]) -> DscdAuxSystem:
    c = model.sizes
    lab = model.labels
    size = {a: c[i] for i, a in enumerate(lab)}
    u1 = ConditionalChannel.new("U1", size["U1"], ("X",), model.to_matrix(0, chans[0]))
    u2 = ConditionalChannel.new("U2", size["U2"], ("Y",), model.to_matrix(1, chans[1]))
    v = ConditionalChannel.new(("V1", "V2"), (size["V1"], size["V2"]), ("Z", "U1", "U2"), model.to_matrix(2, chans[2]))
    return DscdAuxSystem(u1, u2, v)


def _warm(model: AuxModel, sys: DscdAuxSystem) -> list[np.ndarray]:
    if sys.cards != {k: model.sizes[model.labels.index(k)] for k in ("U1", "U2", "V1", "V2")}:
        raise SourceError(f"warm start cardinalities {sys.cards} do not match the model")
    return [model.from_matrix(0, sys.u1.matrix), model.from_matrix(1, sys.u2.matrix),
            model.from_matrix(2, sys.v.matrix)]


def solve_batch(kind: str, js, d_A, d_B, D_A, D_B, weight_list: Sequence[Sequence[float]],
                cfg: SolverConfig, cards: dict[str, int] | None = None,
                warm: Sequence[DscdAuxSystem | None] | None = None) -> list[tuple[RateTuple, DscdAuxSystem] | None]:
    """Solve one bound for several weight vectors in one batch.

    Every weight vector gets the same structured and random starting points
    (random restart ``i`` draws from ``cfg.rng(i)``) plus its own warm start.
    Entries are ``None`` when no feasible system was found.
    """
    check_problem(js, d_A, d_B, D_A, D_B)
    check_reachable(js, d_A, d_B, D_A, D_B)
    weight_list = [check_weights(w) for w in weight_list]
    cards = default_cards(js, d_A, d_B, cfg, cards)
    model = _model(kind, js, d_A, d_B, D_A, D_B, cards)
    base = structured_inits(model, js, d_A, d_B)
    base += [model.random_channels(cfg.rng(i)) for i in range(cfg.restarts)]
    inits, groups = [], []
    for g, w in enumerate(weight_list):
        own = list(base)
        if warm is not None and warm[g] is not None:
            own.insert(0, _warm(model, warm[g]))
        inits += own
        groups += [g] * len(own)
    coef = np.array([w if kind == "outer" else inner_coefficients(w) for w in weight_list])
    sols = model.solve(coef, inits, np.array(groups), cfg)
    out = []
    for w, sol in zip(weight_list, sols):
        if sol is None:
            out.append(None)
            continue
        terms = np.maximum(sol.terms, 0.0)
        if kind == "outer":
            rates = tuple(float(t) for t in terms)
            profile = dict(zip(RATE_NAMES, rates))
        else:
            rates = inner_rates(terms, w)
            profile = dict(zip(("R_AR", "R_BR", "R_AR+R_BR", "R_RA", "R_RB"), (float(t) for t in terms)))
        rt = RateTuple(*rates, float(sol.distortions[0]), float(sol.distortions[1]), D_A, D_B, tuple(w),
                       True, profile)
        out.append((rt, _system(model, sol.channels)))
    return out


def _single(kind: str, req: BoundRequest) -> tuple[RateTuple, DscdAuxSystem]:
    res = solve_batch(kind, req.js, req.d_A, req.d_B, req.D_A, req.D_B, [req.weights], req.cfg, req.cards,
                      [req.warm_start])[0]
    if res is None:
        raise InfeasibleError("no feasible auxiliary system found for the requested budgets")
    return res


def outer_bound_dscd(req: BoundRequest) -> tuple[RateTuple, DscdAuxSystem]:
    """Best feasible point found for the outer bound (an upper estimate of its support value)."""
    if req.warm_start is not None and req.cards is None:
        req = replace(req, cards=req.warm_start.cards)
    return _single("outer", req)


def inner_bound_dscd(req: BoundRequest) -> tuple[RateTuple, DscdAuxSystem]:
    """Achievable point minimising the weighted rate; ``profile`` holds all five constraints."""
    if req.warm_start is not None and req.cards is None:
        req = replace(req, cards=req.warm_start.cards)
    return _single("inner", req)


def evaluate_system(kind: str, js: JointSource, d_A, d_B, sys: DscdAuxSystem,
                    w: Sequence[float] = (1, 1, 1, 1)) -> tuple[np.ndarray, tuple[float, float]]:
    """Bound terms and optimal-decoder distortions of a fixed system, from scratch."""
    j = sys.joint(js)
    if kind == "outer":
        terms = np.array([mutual_information(j, *t) for t in _OUTER_TERMS])
        ctx_A, ctx_B = ("X", "U1", "V2"), ("Y", "U2", "V1")
    else:
        terms = np.array([mutual_information(j, *t) for t in _INNER_TERMS])
        ctx_A, ctx_B = ("X", "V2"), ("Y", "V1")
    dA = rdsolve.optimal_decoder(j, ctx_A, "Y", d_A)[1]
    dB = rdsolve.optimal_decoder(j, ctx_B, "X", d_B)[1]
    return terms, (dA, dB)


CUTSET_READINGS = ("wyner_ziv", "conditional")


def cutset_dscd(js: JointSource, d_A: DistortionMeasure, d_B: DistortionMeasure, D_A: float, D_B: float,
                cfg: SolverConfig | None = None, reading: str = "wyner_ziv") -> RateTuple:
    """Each rate bounded separately across the cut around one terminal.

    ``reading`` selects how the first two terms are evaluated: Wyner-Ziv with
    the pair of remaining sources at the decoder only, or conditional
    rate-distortion with that pair at both ends.
    """
    cfg = cfg or SolverConfig()
    check_problem(js, d_A, d_B, D_A, D_B)
    if reading == "wyner_ziv":
        r_ar = rdsolve.wyner_ziv(js, d_B, D_B, cfg, source="X", side=("Y", "Z"))
        r_br = rdsolve.wyner_ziv(js, d_A, D_A, cfg, source="Y", side=("X", "Z"))
    elif reading == "conditional":
        r_ar = rdsolve.conditional_rd(js, d_B, D_B, source="X", side=("Y", "Z"))
        r_br = rdsolve.conditional_rd(js, d_A, D_A, source="Y", side=("X", "Z"))
    else:
        raise ValueError(f"unknown reading {reading!r}; choose from {CUTSET_READINGS}")
    r_ra = rdsolve.conditional_rd(js, d_A, D_A, source="Y", side=("X",))
    r_rb = rdsolve.conditional_rd(js, d_B, D_B, source="X", side=("Y",))
    return RateTuple(r_ar.rate, r_br.rate, r_ra.rate, r_rb.rate,
                     max(r_br.distortion, r_ra.distortion), max(r_ar.distortion, r_rb.distortion), D_A, D_B)
