"""Bounds for two cascaded rounds: A -> R -> B, then B -> R -> A.

The inner bound uses nine auxiliaries generated by
    p(u0,u1,v1,w1|x) p(s1|z,u0,u1,w1) p(u2,v2,w2|y,u1,v1,s1) p(s2|z,u0,u1,w1,s1,u2,w2)
with decoders psi_B(Y,U1,V1,S1) for X and psi_A(X,U0,U1,V1,W1,U2,V2,S2) for Y,
and the four rates evaluated exactly as the sums below (``RATE_TERMS``).
Flow templates switch groups of auxiliaries off by giving them a single
symbol.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import rdsolve
from .auxopt import AuxModel, Block, Budget
from .dscd import RateTuple, check_problem, check_reachable, check_weights
from .probcore import ZERO_FLOOR, ConditionalChannel, JointSource, SourceError, entropy, extend, mutual_information
from .rdsolve import DistortionMeasure, InfeasibleError, SolverConfig

AUX = ("U0", "U1", "V1", "W1", "S1", "U2", "V2", "W2", "S2")
MAX_ALPHABET = 4096

BLOCKS = [Block(("U0", "U1", "V1", "W1"), ("X",)),
          Block(("S1",), ("Z", "U0", "U1", "W1")),
          Block(("U2", "V2", "W2"), ("Y", "U1", "V1", "S1")),
          Block(("S2",), ("Z", "U0", "U1", "W1", "S1", "U2", "W2"))]

CTX_B = ("Y", "U1", "V1", "S1")
CTX_A = ("X", "U0", "U1", "V1", "W1", "U2", "V2", "S2")

# (rate, mutual-information terms summed into it)
RATE_TERMS = {
    "R_AR": [(("X",), ("U0", "U1", "W1"), ("Z",)), (("X",), ("V1",), ("Y", "U1"))],
    "R_RB": [(("X",), ("U1", "V1"), ("Y",)), (("Z", "W1"), ("S1",), ("Y", "U1", "V1"))],
    "R_BR": [(("Y",), ("U2", "W2"), ("Z", "U0", "U1", "W1", "S1")),
             (("Y",), ("V2",), ("X", "U0", "U1", "V1", "W1", "U2"))],
    "R_RA": [(("Y",), ("U2", "V2"), ("X", "U0", "U1", "V1", "W1")),
             (("Z", "W2"), ("S2",), ("X", "U0", "U1", "V1", "W1", "U2", "V2"))],
}
_ORDER = ("R_AR", "R_BR", "R_RA", "R_RB")
_TERMS = [t for name in _ORDER for t in RATE_TERMS[name]]


@dataclass(frozen=True)
class FlowTemplate:
    name: str
    pinned: frozenset

    @property
    def active(self) -> tuple[str, ...]:
        return tuple(a for a in AUX if a not in self.pinned)


def _template(name, active):
    return FlowTemplate(name, frozenset(a for a in AUX if a not in active))


TEMPLATES = {
    "private": _template("private", ("U0",)),
    "simple_forward": _template("simple_forward", ("V1", "V2")),
    "recover_forward": _template("recover_forward", ("U1", "U2")),
    "recompress": _template("recompress", ("W1", "S1", "W2", "S2")),
    "full": _template("full", AUX),
}


def template(t: FlowTemplate | str) -> FlowTemplate:
    if isinstance(t, FlowTemplate):
        return t
    try:
        return TEMPLATES[t]
    except KeyError:
        raise ValueError(f"unknown flow template {t!r}; choose from {sorted(TEMPLATES)}") from None


@dataclass
class CascadeAuxSystem:
    first: ConditionalChannel    # p(u0,u1,v1,w1|x)
    relay1: ConditionalChannel   # p(s1|z,u0,u1,w1)
    second: ConditionalChannel   # p(u2,v2,w2|y,u1,v1,s1)
    relay2: ConditionalChannel   # p(s2|z,u0,u1,w1,s1,u2,w2)

    @property
    def channels(self) -> list[ConditionalChannel]:
        return [self.first, self.relay1, self.second, self.relay2]

    @property
    def cards(self) -> dict[str, int]:
        out = {}
        for ch in self.channels:
            out.update(zip(ch.outputs, ch.output_sizes))
        return {a: out[a] for a in AUX}

    def joint(self, js: JointSource) -> JointSource:
        for ch in self.channels:
            js = extend(js, ch)
        return js


def rate_audit(js: JointSource, sys: CascadeAuxSystem) -> dict[str, float]:
    """The four rates of a fixed system, recomputed from the extended joint."""
    j = sys.joint(js)
    return {name: sum(mutual_information(j, *t) for t in terms) for name, terms in RATE_TERMS.items()}


def resolve_cards(tpl: FlowTemplate, cfg: SolverConfig, cards: dict[str, int] | None = None) -> dict[str, int]:
    out = {a: (cfg.card or 2) for a in AUX}
    out.update(cards or {})
    for a in tpl.pinned:
        out[a] = 1
    return out


def _model(js, d_A, d_B, D_A, D_B, cards, max_alphabet) -> AuxModel:
    budgets = [Budget("Y", CTX_A, d_A.matrix, D_A), Budget("X", CTX_B, d_B.matrix, D_B)]
    return AuxModel(js, {a: cards[a] for a in AUX}, BLOCKS, _TERMS, budgets, max_alphabet=max_alphabet)


def _coefficients(w: Sequence[float]) -> np.ndarray:
    return np.repeat(np.asarray(w, dtype=float), 2)


def _system(model: AuxModel, chans) -> CascadeAuxSystem:
    size = dict(zip(model.labels, model.sizes))
    chs = [ConditionalChannel.new(b.outputs, [size[a] for a in b.outputs], b.parents, model.to_matrix(k, chans[k]))
           for k, b in enumerate(model.blocks)]
    return CascadeAuxSystem(*chs)


def _lift(model: AuxModel, sys: CascadeAuxSystem) -> list[np.ndarray]:
    """Block arrays of ``sys`` (whose alphabets may be smaller) for ``model``."""
    small = {a: s for a, s in sys.cards.items()}
    if any(small[a] > model.sizes[model.labels.index(a)] for a in AUX):
        raise SourceError(f"warm start cardinalities {small} exceed the model's")
    src = JointSource(model.labels[:3], model.sizes[:3], np.ones(model.sizes[:3]) / np.prod(model.sizes[:3]))
    shell = AuxModel(src, small, BLOCKS, [], [])
    return [model.embed(k, shell.from_matrix(k, ch.matrix)) for k, ch in enumerate(sys.channels)]


def structured_inits(model: AuxModel) -> list[list[np.ndarray]]:
    """Constant systems and lossless versions of each flow."""
    const = model.constant_channels()
    f = model.channel_from_fn
    first_rec = f(0, lambda s: (0, s["X"], 0, 0))
    first_fwd = f(0, lambda s: (0, 0, s["X"], 0))
    first_cmp = f(0, lambda s: (0, 0, 0, s["X"]))
    relay1_cmp = f(1, lambda s: (s["W1"],))
    second_rec = f(2, lambda s: (s["Y"], 0, 0))
    second_fwd = f(2, lambda s: (0, s["Y"], 0))
    second_cmp = f(2, lambda s: (0, 0, s["Y"]))
    relay2_cmp = f(3, lambda s: (s["W2"],))
    return [const,
            [first_rec, const[1], second_rec, const[3]],
            [first_fwd, const[1], second_fwd, const[3]],
            [first_cmp, relay1_cmp, second_cmp, relay2_cmp],
            [first_rec, const[1], second_fwd, const[3]],
            [first_fwd, const[1], second_rec, const[3]],
            [first_rec, const[1], const[2], const[3]],
            [const[0], const[1], second_rec, const[3]]]


def solve_batch(js, d_A, d_B, D_A, D_B, weight_list, tpl: FlowTemplate | str = "full",
                cfg: SolverConfig | None = None, cards: dict[str, int] | None = None,
                warm: Sequence[Sequence[CascadeAuxSystem]] | None = None,
                max_alphabet: int = MAX_ALPHABET) -> list[tuple[RateTuple, CascadeAuxSystem] | None]:
    """Inner bound for several weight vectors; ``warm[g]`` lists warm starts for weight ``g``."""
    cfg = cfg or SolverConfig()
    tpl = template(tpl)
    check_problem(js, d_A, d_B, D_A, D_B)
    check_reachable(js, d_A, d_B, D_A, D_B)
    weight_list = [check_weights(w) for w in weight_list]
    cards = resolve_cards(tpl, cfg, cards)
    model = _model(js, d_A, d_B, D_A, D_B, cards, max_alphabet)
    base = structured_inits(model)
    base += [model.random_channels(cfg.rng(i)) for i in range(cfg.restarts)]
    inits, groups = [], []
    for g in range(len(weight_list)):
        own = [_lift(model, s) for s in (warm[g] if warm is not None else [])] + base
        inits += own
        groups += [g] * len(own)
    coef = np.array([_coefficients(w) for w in weight_list])
    sols = model.solve(coef, inits, np.array(groups), cfg)
    out = []
    for w, sol in zip(weight_list, sols):
        if sol is None:
            out.append(None)
            continue
        t = np.maximum(sol.terms, 0.0)
        rates = [float(t[2 * i] + t[2 * i + 1]) for i in range(4)]
        profile = {f"{name}[{j}]": float(t[2 * i + j]) for i, name in enumerate(_ORDER) for j in range(2)}
        rt = RateTuple(*rates, float(sol.distortions[0]), float(sol.distortions[1]), D_A, D_B, tuple(w), True,
                       profile)
        out.append((rt, _system(model, sol.channels)))
    return out


def inner_bound_cascade(js, d_A, d_B, D_A, D_B, weights=(1, 1, 1, 1), tpl: FlowTemplate | str = "full",
                        cfg: SolverConfig | None = None, cards: dict[str, int] | None = None,
                        warm: Sequence[CascadeAuxSystem] = (),
                        max_alphabet: int = MAX_ALPHABET) -> tuple[RateTuple, CascadeAuxSystem]:
    res = solve_batch(js, d_A, d_B, D_A, D_B, [weights], tpl, cfg, cards, [list(warm)], max_alphabet)[0]
    if res is None:
        raise InfeasibleError("no feasible auxiliary system found for the requested budgets")
    return res


def outer_bound_cascade(js: JointSource, d_A: DistortionMeasure, d_B: DistortionMeasure, D_A: float, D_B: float,
                        cfg: SolverConfig | None = None, reading: str = "wyner_ziv") -> RateTuple:
    """Per-link cut bounds; ``reading`` as in :func:`relayrd.dscd.cutset_dscd` for the A -> R link."""
    cfg = cfg or SolverConfig()
    check_problem(js, d_A, d_B, D_A, D_B)
    if reading == "wyner_ziv":
        r_ar = rdsolve.wyner_ziv(js, d_B, D_B, cfg, source="X", side=("Y", "Z"))
    elif reading == "conditional":
        r_ar = rdsolve.conditional_rd(js, d_B, D_B, source="X", side=("Y", "Z"))
    else:
        raise ValueError(f"unknown reading {reading!r}")
    r_rb = rdsolve.wz_star(js, d_B, D_B, rdsolve.ENC_ONLY, cfg, source="X", enc_side="Z", dec_side="Y")
    r_br = rdsolve.wz_star(js, d_A, D_A, rdsolve.ENC_AND_DEC, cfg, source="Y", enc_side="X", dec_side="Z")
    r_ra = rdsolve.conditional_rd(js, d_A, D_A, source="Y", side=("X",))
    return RateTuple(r_ar.rate, r_br.rate, r_ra.rate, r_rb.rate,
                     max(r_br.distortion, r_ra.distortion), max(r_ar.distortion, r_rb.distortion), D_A, D_B)


# ---------------------------------------------------------------- two rounds with lossless relay links

def kaspi_thresholds(js: JointSource) -> tuple[float, float]:
    """Relay rates that forward everything the relay holds: H(Y,Z|X), H(X,Z|Y)."""
    return entropy(js, ("Y", "Z"), ("X",)), entropy(js, ("X", "Z"), ("Y",))


@dataclass
class KaspiSystem:
    u1: ConditionalChannel
    u2: ConditionalChannel


def _kaspi_model(js, d_A, d_B, D_A, D_B, cards, restricted):
    par2 = ("Y",) if restricted else ("Y", "Z", "U1")
    blocks = [Block(("U1",), ("X",)), Block(("U2",), par2)]
    terms = [(("X",), ("U1",), ("Y", "Z")), (("Y",), ("U2",), ("X", "Z", "U1"))]
    budgets = [Budget("Y", ("X", "Z", "U1", "U2"), d_A.matrix, D_A), Budget("X", ("Y", "Z", "U1"), d_B.matrix, D_B)]
    return AuxModel(js, {"U1": cards["U1"], "U2": cards["U2"]}, blocks, terms, budgets)


def kaspi_two_round(js: JointSource, d_A: DistortionMeasure, d_B: DistortionMeasure, D_A: float, D_B: float,
                    weights=(1.0, 1.0), cfg: SolverConfig | None = None, restricted: bool = False,
                    cards: dict[str, int] | None = None,
                    warm: KaspiSystem | None = None) -> tuple[RateTuple, KaspiSystem]:
    """Two-message interactive coding seen through a relay that forwards losslessly.

    Minimises w1 I(X;U1|Y,Z) + w2 I(Y;U2|X,Z,U1) over p(u1|x) p(u2|y,z,u1)
    (``restricted``: p(u2|y)), with decoders psi_B(Y,Z,U1) and
    psi_A(X,Z,U1,U2).  The relay rates of the returned tuple are the
    forwarding thresholds.  Weights may be given as (w_AR, w_BR) or as a
    full 4-vector whose relay entries are ignored.
    """
    cfg = cfg or SolverConfig()
    check_problem(js, d_A, d_B, D_A, D_B)
    check_reachable(js, d_A, d_B, D_A, D_B)
    w = tuple(float(v) for v in weights)
    if len(w) == 4:
        w = w[:2]
    if len(w) != 2 or min(w) < 0 or not any(w):
        raise ValueError(f"weights must be two nonnegative numbers, not both zero; got {weights}")
    c = {"U1": cfg.card or js.size("X") + 2, "U2": cfg.card or js.size("Y") + 2}
    c.update(cards or {})
    model = _kaspi_model(js, d_A, d_B, D_A, D_B, c, restricted)
    f = model.channel_from_fn
    const = model.constant_channels()
    u1_id, u2_id = f(0, lambda s: (s["X"],)), f(1, lambda s: (s["Y"],))
    inits = [const, [u1_id, u2_id], [u1_id, const[1]], [const[0], u2_id]]
    if warm is not None:
        src = {"U1": warm.u1.output_sizes[0], "U2": warm.u2.output_sizes[0]}
        if src != c:
            raise SourceError(f"warm start cardinalities {src} do not match {c}")
        lifted = [model.from_matrix(0, warm.u1.matrix)]
        if warm.u2.parents == ("Y",) and not restricted:
            # p(u2|y) seen as a channel from (y, z, u1) that ignores z and u1
            arr = np.asarray(warm.u2.matrix)
            lifted.append(_broadcast_u2(model, js, arr, c))
        else:
            lifted.append(model.from_matrix(1, warm.u2.matrix))
        inits.insert(0, lifted)
    inits += _cutset_inits(model, js, d_A, d_B, D_A, D_B, c, cfg, restricted)
    inits += [model.random_channels(cfg.rng(i)) for i in range(cfg.restarts)]
    sol = model.solve(np.array([w]), inits, np.zeros(len(inits), dtype=int), cfg)[0]
    if sol is None:
        raise InfeasibleError("no feasible auxiliary pair found for the requested budgets")
    t = np.maximum(sol.terms, 0.0)
    ra, rb = kaspi_thresholds(js)
    rt = RateTuple(float(t[0]), float(t[1]), ra, rb, float(sol.distortions[0]), float(sol.distortions[1]),
                   D_A, D_B, (w[0], w[1], 0.0, 0.0), True,
                   {"R_AR": float(t[0]), "R_BR": float(t[1]), "R_RA": ra, "R_RB": rb})
    par2 = model.blocks[1].parents
    sys = KaspiSystem(ConditionalChannel.new("U1", c["U1"], ("X",), model.to_matrix(0, sol.channels[0])),
                      ConditionalChannel.new("U2", c["U2"], par2, model.to_matrix(1, sol.channels[1])))
    return rt, sys


def _cutset_inits(model, js, d_A, d_B, D_A, D_B, c, cfg, restricted) -> list[list[np.ndarray]]:
    """Starts built from the two Wyner-Ziv codes X|(Y,Z) and Y|(X,Z).

    The pair is feasible for the two-round problem (each decoder sees at
    least the Wyner-Ziv side information), so the solve starts no worse
    than the cut-set rates.
    """
    try:
        m1 = _wz_folded(js, d_B, D_B, "X", ("Y", "Z"), c["U1"], cfg)
        m2 = _wz_folded(js, d_A, D_A, "Y", ("X", "Z"), c["U2"], cfg)
    except (InfeasibleError, SourceError):
        return []
    u1 = model.from_matrix(0, m1)
    u2 = model.from_matrix(1, m2) if restricted else _broadcast_u2(model, js, m2, c)
    return [[u1, u2], [u1, model.constant_channels()[1]]]


def _wz_folded(js, d, D, source, side, n_u, cfg) -> np.ndarray:
    # a time-shared point needs room for both vertices; retry with half the alphabet if it does not fit
    for card in dict.fromkeys((n_u, max(n_u // 2, 1))):
        p = rdsolve.wyner_ziv(js, d, D, replace(cfg, card=card), source=source, side=side)
        used = sum(int((np.asarray(v.channel).sum(axis=0) > ZERO_FLOOR).sum()) for _, v in p.timeshare)
        if used <= n_u:
            break
    return rdsolve.timeshare_matrix(p, n_u)


def _broadcast_u2(model: AuxModel, js: JointSource, arr: np.ndarray, c: dict[str, int]) -> np.ndarray:
    """p(u2|y) as a block array over parents (y, z, u1)."""
    rows = np.repeat(np.asarray(arr)[:, None, None, :], js.size("Z"), axis=1)
    rows = np.repeat(rows, c["U1"], axis=2).reshape(-1, c["U2"])
    return model.from_matrix(1, rows)
