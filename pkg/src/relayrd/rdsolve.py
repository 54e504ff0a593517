"""Rate-distortion functions with side information at encoder and/or decoder.

Every function here is evaluated through a slope-parametrised (Lagrangian)
search.  The convex cases (classical and conditional RD) use Blahut-Arimoto
iterations; the Wyner-Ziv family uses block coordinate descent over the test
channel p(u|t), an auxiliary posterior q(u|s), and the decoder, with random
restarts.  Points found for all slopes are merged through the lower convex
envelope, which is also what time-sharing achieves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .probcore import ZERO_FLOOR, ConditionalChannel, JointSource, SourceError, deterministic_channel, extend

LN2 = math.log(2.0)
#: slack used when deciding whether a budget is met
FEAS_TOL = 1e-9


class InfeasibleError(ValueError):
    """The distortion budget is below what any code can achieve."""


@dataclass(frozen=True)
class DistortionMeasure:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise SourceError(f"distortion matrix must be 2-D and nonempty, got shape {m.shape}")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise SourceError("distortion entries must be finite and nonnegative")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def hamming(cls, n: int, m: int | None = None) -> "DistortionMeasure":
        m = n if m is None else m
        return cls(1.0 - np.eye(n, m))

    @property
    def source_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def recon_size(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by every solver.

    ``card`` caps auxiliary alphabets (``None`` picks a per-solver default).
    ``max_iter`` bounds the alternating-minimisation sweeps of the Wyner-Ziv
    family; ``sweeps`` bounds the descent sweeps per multiplier value of the
    multi-auxiliary bound solvers, whose distortion multipliers follow the
    ``penalty_*`` schedule (initial value, number of updates, bracketing
    factor).
    """

    card: int | None = None
    restarts: int = 20
    max_iter: int = 400
    tol: float = 1e-10
    penalty_rounds: int = 14
    penalty_start: float = 20.0
    penalty_factor: float = 4.0
    sweeps: int = 60
    seed: int = 0

    def __post_init__(self):
        if self.card is not None and self.card < 1:
            raise ValueError("cardinality cap must be >= 1")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.restarts < 1 or self.max_iter < 1:
            raise ValueError("restarts and max_iter must be >= 1")

    def rng(self, i: int) -> np.random.Generator:
        """Counter-based generator for restart ``i``."""
        return np.random.Generator(np.random.Philox(self.seed + i))


@dataclass
class Vertex:
    """One operating point of a (possibly time-shared) code."""

    distortion: float
    rate: float
    channel: np.ndarray
    decoder: np.ndarray | None = None


@dataclass
class RDPoint:
    budget: float
    rate: float
    distortion: float
    channel: ConditionalChannel | None
    decoder: np.ndarray | None
    # (weight, vertex) pairs realising the point by time-sharing
    timeshare: list[tuple[float, Vertex]] = field(default_factory=list, repr=False)


@dataclass
class RDCurve:
    selector: str
    points: list[RDPoint]

    @property
    def budgets(self) -> np.ndarray:
        return np.array([p.budget for p in self.points])

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])


# ---------------------------------------------------------------- tables


def _labels(x) -> tuple[str, ...]:
    if x is None:
        return ()
    return (x,) if isinstance(x, str) else tuple(x)


def pair_table(js: JointSource, rows: Sequence[str], cols: Sequence[str]) -> np.ndarray:
    """p(r, c) as a |rows| x |cols| matrix; shared labels sit on a diagonal."""
    rows, cols = tuple(rows), tuple(cols)
    union = rows + tuple(c for c in cols if c not in rows)
    if not union:
        return np.ones((1, 1))
    p = js.table(union)
    rsz = [js.size(a) for a in rows]
    csz = [js.size(a) for a in cols]
    out = np.zeros(tuple(rsz) + tuple(csz))
    for idx in np.ndindex(*p.shape):
        sym = dict(zip(union, idx))
        out[tuple(sym[a] for a in rows) + tuple(sym[a] for a in cols)] = p[idx]
    return out.reshape(int(np.prod(rsz, dtype=int)), int(np.prod(csz, dtype=int)))


def _source_distortion(js: JointSource, source: str, extra: Sequence[str], d: DistortionMeasure) -> np.ndarray:
    """Distortion rows for the compound encoder input (source, *extra)."""
    if d.source_size != js.size(source):
        raise SourceError(f"distortion has {d.source_size} rows but |{source}| = {js.size(source)}")
    reps = int(np.prod([js.size(a) for a in extra], dtype=int)) if extra else 1
    return np.repeat(d.matrix, reps, axis=0)


# ---------------------------------------------------------------- decoders


def _decode(p_cs: np.ndarray, d: np.ndarray) -> tuple[np.ndarray, float]:
    """Best estimate per context from p(context, source); ties to lowest index."""
    expected = p_cs @ d
    dec = np.argmin(expected, axis=1)
    dec[p_cs.sum(axis=1) <= 0] = 0
    return dec, float(expected[np.arange(len(dec)), dec].sum())


def optimal_decoder(js: JointSource, context, source: str, d: DistortionMeasure) -> tuple[np.ndarray, float]:
    """Deterministic estimator of ``source`` from ``context`` minimising E d.

    Returns the decoder as an array indexed by context symbols (one axis per
    context label, scalar-shaped when the context is empty) and the expected
    distortion it achieves.
    """
    context = _labels(context)
    if source in context:
        raise SourceError("source label cannot be part of its own decoding context")
    if d.source_size != js.size(source):
        raise SourceError(f"distortion has {d.source_size} rows but |{source}| = {js.size(source)}")
    dec, dist = _decode(pair_table(js, context, (source,)), d.matrix)
    shape = tuple(js.size(a) for a in context)
    return dec.reshape(shape), dist


def dmax(js: JointSource, d: DistortionMeasure, context=(), source: str = "X") -> float:
    """Distortion reachable at zero rate from the context alone.

    The context may contain the source itself, in which case the decoder
    sees an exact copy of it.
    """
    context = _labels(context)
    if source in context:
        copy = source + "'"
        js = extend(js, deterministic_channel(copy, js.size(source), (source,), (js.size(source),), lambda a: a))
        context = tuple(copy if a == source else a for a in context)
    return optimal_decoder(js, context, source, d)[1]


def dmin(p_t: np.ndarray, d_t: np.ndarray) -> float:
    return float((p_t * d_t.min(axis=1)).sum())


# ---------------------------------------------------------------- envelopes


def lower_envelope(ds: np.ndarray, rs: np.ndarray) -> np.ndarray:
    """Indices of the non-increasing lower convex envelope, sorted by D."""
    ds = np.asarray(ds, dtype=float)
    rs = np.asarray(rs, dtype=float)
    order = np.lexsort((rs, ds))
    hull: list[int] = []
    for i in order:
        if hull and ds[hull[-1]] == ds[i]:
            continue
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (ds[b] - ds[a]) * (rs[i] - rs[a]) - (rs[b] - rs[a]) * (ds[i] - ds[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    # past the minimum rate the envelope is flat
    k = int(np.argmin(rs[hull]))
    return np.array(hull[: k + 1], dtype=int)


def envelope_at(ds, rs, hull, target: float) -> tuple[float, int, int, float]:
    """Envelope value at ``target``: (rate, hi idx, lo idx, hi weight).

    ``hi`` is the vertex with the larger distortion; the two coincide when
    ``target`` sits on or beyond an end of the envelope.  Raises if ``target`` lies left of
    every point by more than the feasibility slack.
    """
    hd = ds[hull]
    if target < hd[0] - FEAS_TOL:
        raise InfeasibleError(f"budget {target:.6g} below the smallest reachable distortion {hd[0]:.6g}")
    if target >= hd[-1]:
        return float(rs[hull[-1]]), int(hull[-1]), int(hull[-1]), 0.0
    if target <= hd[0]:
        return float(rs[hull[0]]), int(hull[0]), int(hull[0]), 0.0
    j = int(np.searchsorted(hd, target, side="right"))
    lo, hi = hull[j - 1], hull[j]  # ds[lo] <= target < ds[hi]
    theta = (target - ds[lo]) / (ds[hi] - ds[lo])
    rate = (1 - theta) * rs[lo] + theta * rs[hi]
    return float(rate), int(hi), int(lo), float(theta)


def envelope_slopes(ds, rs, hull, target: float) -> list[float]:
    """Magnitudes of the envelope slopes (bits per unit) adjacent to ``target``."""
    hd, hr = ds[hull], rs[hull]
    if len(hull) < 2:
        return []
    sl = -np.diff(hr) / np.diff(hd)
    j = int(np.searchsorted(hd, target, side="right"))
    picks = {min(max(j - 1, 0), len(sl) - 1)}
    if 0 < j < len(hd) and abs(hd[j - 1] - target) < 1e-12:
        picks.add(max(j - 2, 0))
    return [float(sl[i]) for i in sorted(picks) if sl[i] > 0]


# ---------------------------------------------------------------- convex RD


def _ba_batch(p_ts: np.ndarray, d: np.ndarray, betas: np.ndarray, max_iter: int = 5000,
              tol: float = 1e-15):
    """Conditional Blahut-Arimoto, one shared slope per batch element.

    ``p_ts`` is p(t, s) with ``t`` the encoded source, ``s`` the side
    information known to both ends; ``betas`` in nats per distortion unit
    (``inf`` restricts each row to its minimum-distortion reconstructions).
    Returns distortion, rate (bits) and channels p(xhat | t, s) with shape
    (B, S, T, K).
    """
    keep = p_ts.sum(axis=0) > 0
    p_ts = p_ts[:, keep]
    p_s = p_ts.sum(axis=0)
    p_t_s = (p_ts / p_s).T  # (S, T)
    B = len(betas)
    K = d.shape[1]
    finite = np.isfinite(betas)
    bf = np.where(finite, betas, 0.0)[:, None, None, None]
    allowed = d <= d.min(axis=1, keepdims=True) + 1e-15
    base = np.where(finite[:, None, None, None], -bf * d[None, None], np.where(allowed, 0.0, -np.inf)[None, None])
    base = base - base.max(axis=-1, keepdims=True)
    r = np.full((B, p_s.size, K), 1.0 / K)
    active = np.arange(B)
    for _ in range(max_iter):
        ra = r[active]
        logit = np.log(np.maximum(ra, 1e-300))[:, :, None, :] + base[active]
        logit -= logit.max(axis=-1, keepdims=True)
        q = np.exp(logit)
        q /= q.sum(axis=-1, keepdims=True)
        r_new = np.einsum("st,bstk->bsk", p_t_s, q)
        r[active] = r_new
        active = active[np.abs(r_new - ra).max(axis=(1, 2)) >= tol]
        if active.size == 0:
            break
    logit = np.log(np.maximum(r, 1e-300))[:, :, None, :] + base
    logit -= logit.max(axis=-1, keepdims=True)
    q = np.exp(logit)
    q /= q.sum(axis=-1, keepdims=True)
    r = np.einsum("st,bstk->bsk", p_t_s, q)
    w = p_ts.T[None, :, :, None] * q
    dist = (w * d[None, None]).sum(axis=(1, 2, 3))
    ratio = np.where(q > ZERO_FLOOR, q / np.maximum(r[:, :, None, :], 1e-300), 1.0)
    rate = (w * np.log2(ratio)).sum(axis=(1, 2, 3))
    full = np.zeros((B, keep.size, p_ts.shape[0], K))
    full[:, keep] = q
    full[:, ~keep] = 1.0 / K
    return dist, np.maximum(rate, 0.0), full


def _convex_rd(p_ts: np.ndarray, d: np.ndarray, targets: Sequence[float], rounds: int = 4, width: int = 8):
    """Solve the convex RD problem for each target by slope multisection."""
    targets = np.asarray(targets, dtype=float)
    if np.any(targets < 0):
        raise ValueError("distortion budget must be >= 0")
    spread = float(d.max() - d.min()) or 1.0
    p_t = p_ts.sum(axis=1)
    lo_d = dmin(p_t, d)
    # zero-rate point: best constant estimate per side-information symbol
    _, hi_d = _decode(p_ts.T, d)
    grid = np.concatenate([np.geomspace(1e-3, 1e4, 48) / spread, [np.inf]])
    ds, rs, qs = _ba_batch(p_ts, d, grid)
    betas = list(grid)
    ds, rs, qs = list(ds), list(rs), list(qs)
    for _ in range(rounds):
        new = []
        order = np.argsort(betas)
        bsorted = np.array(betas)[order]
        dsorted = np.array(ds)[order]
        for t in targets:
            if t >= hi_d or t < lo_d - FEAS_TOL:
                continue
            # D(beta) is non-increasing; locate the bracketing slopes
            j = int(np.searchsorted(-dsorted, -t, side="left"))
            if j == 0 or j >= len(bsorted):
                continue
            b0, b1 = bsorted[j - 1], bsorted[j]
            if not np.isfinite(b1):
                b1 = max(b0 * 50, 1e6 / spread)
            if dsorted[j - 1] - dsorted[j] < 1e-13:
                continue
            new.extend(np.geomspace(max(b0, 1e-12), b1, width + 2)[1:-1])
        if not new:
            break
        nd, nr, nq = _ba_batch(p_ts, d, np.array(new))
        betas += new
        ds += list(nd)
        rs += list(nr)
        qs += list(nq)
    K = d.shape[1]
    zero_q = np.zeros((p_ts.shape[1], p_ts.shape[0], K))
    dec, _ = _decode(p_ts.T, d)
    zero_q[np.arange(p_ts.shape[1]), :, dec] = 1.0
    ds.append(hi_d)
    rs.append(0.0)
    qs.append(zero_q)
    ds, rs = np.array(ds), np.array(rs)
    hull = lower_envelope(ds, rs)
    out = []
    for t in targets:
        if t < lo_d - FEAS_TOL:
            raise InfeasibleError(f"budget {t:.6g} below minimum achievable distortion {lo_d:.6g}")
        rate, a, b, theta = envelope_at(ds, rs, hull, min(max(t, ds[hull[0]]), hi_d))
        verts = [(1 - theta, Vertex(float(ds[b]), float(rs[b]), qs[b]))]
        if a != b:
            verts.append((theta, Vertex(float(ds[a]), float(rs[a]), qs[a])))
        achieved = sum(w * v.distortion for w, v in verts)
        out.append((float(t), max(rate, 0.0) if t < hi_d else 0.0, achieved, verts))
    return out


def _convex_points(js, source, side, d, targets, channel_label="Xhat"):
    side = _labels(side)
    p_ts = pair_table(js, (source,), side)
    d_t = _source_distortion(js, source, (), d)
    pts = []
    for t, rate, achieved, verts in _convex_rd(p_ts, d_t, targets):
        w, v = max(verts, key=lambda x: (x[1].distortion <= t + FEAS_TOL, x[0]))
        # rows of the reported channel run over (side..., source)
        mat = v.channel.reshape(-1, d.recon_size)
        ch = ConditionalChannel.new(channel_label, d.recon_size, side + (source,), mat)
        pts.append(RDPoint(t, rate, achieved, ch, None, verts))
    return pts


def classical_rd(px: JointSource, d: DistortionMeasure, D: float, source: str | None = None) -> RDPoint:
    """R(D) = min I(X; Xhat) subject to E d <= D."""
    source = source or px.labels[0]
    if D < 0:
        raise ValueError("distortion budget must be >= 0")
    return _convex_points(px, source, (), d, [D])[0]


def conditional_rd(js: JointSource, d: DistortionMeasure, D: float, source: str | None = None,
                   side=None) -> RDPoint:
    """R_{X|S}(D): side information S at both encoder and decoder.

    ``side`` may list several labels; it defaults to every label but the
    source.
    """
    source = source or js.labels[0]
    side = _labels(side) if side is not None else tuple(a for a in js.labels if a != source)
    if D < 0:
        raise ValueError("distortion budget must be >= 0")
    return _convex_points(js, source, side, d, [D])[0]




# ---------------------------------------------------------------- Wyner-Ziv family


def _wz_eval(p_ts: np.ndarray, d: np.ndarray, Q: np.ndarray):
    """Exact (distortion, rate in bits, decoder) for channels p(u|t), batched."""
    p_t = p_ts.sum(axis=1)
    p_s = p_ts.sum(axis=0)
    J = p_ts[None, :, :, None] * Q[:, :, None, :]
    M = np.einsum("btsu,tk->bsuk", J, d)
    psi = M.argmin(axis=-1)
    dist = np.take_along_axis(M, psi[..., None], axis=-1)[..., 0].sum(axis=(1, 2))
    p_su = J.sum(axis=1)
    cond = p_su / np.maximum(p_s, 1e-300)[None, :, None]
    h_us = -np.where(p_su > ZERO_FLOOR, p_su * np.log2(np.maximum(cond, 1e-300)), 0.0).sum(axis=(1, 2))
    w = p_t[None, :, None] * Q
    h_ut = -np.where(w > ZERO_FLOOR, w * np.log2(np.maximum(Q, 1e-300)), 0.0).sum(axis=(1, 2))
    return dist, np.maximum(h_us - h_ut, 0.0), psi


def _wz_batch(p_ts: np.ndarray, d: np.ndarray, betas: np.ndarray, q0: np.ndarray,
              max_iter: int, tol: float):
    """Alternating minimisation of I(T;U|S) + beta E d(T, psi(U,S)).

    ``q0`` holds initial channels p(u|t), shape (B, T, U); ``betas`` are in
    nats per distortion unit.  Each sweep re-optimises the decoder, the
    posterior q(u|s) and then p(u|t) in closed form, so the Lagrangian never
    increases.  Returns final channels.
    """
    p_t = p_ts.sum(axis=1)
    p_s = p_ts.sum(axis=0)
    live_t = p_t > 0
    p_s_t = np.where(live_t[:, None], p_ts / np.where(live_t, p_t, 1.0)[:, None], 0.0)
    Q = np.array(q0, dtype=float)
    n_u = Q.shape[-1]
    bcol = betas[:, None, None, None]
    prev = np.full(len(betas), np.inf)
    active = np.ones(len(betas), dtype=bool)
    for _ in range(max_iter):
        Qa = Q[active]
        J = p_ts[None, :, :, None] * Qa[:, :, None, :]
        M = np.einsum("btsu,tk->bsuk", J, d)
        psi = M.argmin(axis=-1)
        dsel = np.moveaxis(d[:, psi], 0, 1)  # (B, T, S, U)
        p_su = J.sum(axis=1)
        logq = np.log(np.maximum(p_su / np.maximum(p_s, 1e-300)[None, :, None], 1e-300))
        A = np.einsum("ts,bsu->btu", p_s_t, logq) - np.einsum("ts,btsu->btu", p_s_t, bcol[active] * dsel)
        A -= A.max(axis=-1, keepdims=True)
        Qa = np.exp(A)
        Qa /= Qa.sum(axis=-1, keepdims=True)
        Qa[:, ~live_t] = 1.0 / n_u
        J = p_ts[None, :, :, None] * Qa[:, :, None, :]
        negent = (p_t[None, :, None] * Qa * np.log(np.maximum(Qa, 1e-300))).sum(axis=(1, 2))
        obj = negent - (J * logq[:, None]).sum(axis=(1, 2, 3)) + betas[active] * (J * dsel).sum(axis=(1, 2, 3))
        Q[active] = Qa
        done = np.abs(prev[active] - obj) <= tol * np.maximum(1.0, np.abs(obj))
        prev[active] = obj
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            break
    return Q


@dataclass
class _WZProblem:
    p_ts: np.ndarray   # p(t, s): t = encoder input, s = decoder side information
    d: np.ndarray      # distortion rows per encoder-input symbol
    n_u: int
    blind: int         # |source|; "blind" restarts ignore the rest of t


#: partition starts are skipped when the encoder alphabet has more partitions than this
MAX_PARTITION_STARTS = 64


def _partitions(T: int, k: int, limit: int):
    """Restricted growth strings: partitions of range(T) into at most k cells."""
    out = []

    def grow(prefix, top):
        if len(out) > limit:
            return
        if len(prefix) == T:
            out.append(tuple(prefix))
            return
        for c in range(min(top + 2, k)):
            grow(prefix + [c], max(top, c))

    grow([], -1)
    return out if len(out) <= limit else []


def _wz_inits(prob: _WZProblem, cfg: SolverConfig) -> np.ndarray:
    T = prob.p_ts.shape[0]
    inits = []
    # smoothed deterministic maps t -> u, one per partition of the encoder alphabet
    for part in _partitions(T, prob.n_u, MAX_PARTITION_STARTS):
        q = np.full((T, prob.n_u), 0.1 / prob.n_u)
        q[np.arange(T), part] += 0.9
        inits.append(q)
    for i in range(cfg.restarts):
        rng = cfg.rng(i)
        if prob.blind < T and i % 2 == 1:
            # odd restarts start from channels that ignore the encoder side information
            q = np.repeat(rng.dirichlet(np.ones(prob.n_u), size=prob.blind), T // prob.blind, axis=0)
        else:
            q = rng.dirichlet(np.ones(prob.n_u), size=T)
        inits.append(q)
    return np.array(inits)


def _wz_solve(prob: _WZProblem, targets: Sequence[float], cfg: SolverConfig, refine_rounds: int = 2):
    targets = np.asarray(targets, dtype=float)
    if np.any(targets < 0):
        raise ValueError("distortion budget must be >= 0")
    p_ts, d, n_u = prob.p_ts, prob.d, prob.n_u
    T = p_ts.shape[0]
    spread = float(d.max() - d.min()) or 1.0
    lo_d = dmin(p_ts.sum(axis=1), d)
    for t in targets:
        if t < lo_d - FEAS_TOL:
            raise InfeasibleError(f"budget {t:.6g} below minimum achievable distortion {lo_d:.6g}")
    inits = _wz_inits(prob, cfg)
    n_r = len(inits)

    const = np.zeros((T, n_u))
    const[:, 0] = 1.0
    chans = [const]
    if n_u >= T:
        eye = np.zeros((T, n_u))
        eye[np.arange(T), np.arange(T)] = 1.0
        chans.append(eye)
    chans = np.array(chans)
    cd, cr, _ = _wz_eval(p_ts, d, chans)

    def run(betas):
        nonlocal chans, cd, cr
        betas = np.asarray(betas, dtype=float)
        Q = _wz_batch(p_ts, d, np.repeat(betas, n_r), np.tile(inits, (len(betas), 1, 1)),
                      cfg.max_iter, cfg.tol)
        nd, nr, _ = _wz_eval(p_ts, d, Q)
        chans = np.concatenate([chans, Q])
        cd = np.concatenate([cd, nd])
        cr = np.concatenate([cr, nr])

    run(np.geomspace(1e-2, 3e3, 20) * LN2 / spread)
    for _ in range(refine_rounds):
        hull = lower_envelope(cd, cr)
        new = set()
        for t in targets:
            for s in envelope_slopes(cd, cr, hull, t):
                for f in (0.7, 0.85, 0.95, 1.0, 1.05, 1.2, 1.45):
                    new.add(float(s * f * LN2))
        if not new:
            break
        run(sorted(new))
    hull = lower_envelope(cd, cr)
    results = []
    for t in targets:
        rate, a, b, theta = envelope_at(cd, cr, hull, t)
        pairs = [(1 - theta, b)] if a == b else [(1 - theta, b), (theta, a)]
        verts = []
        for w, idx in pairs:
            _, _, psi = _wz_eval(p_ts, d, chans[idx][None])
            verts.append((w, Vertex(float(cd[idx]), float(cr[idx]), chans[idx], psi[0])))
        achieved = sum(w * v.distortion for w, v in verts)
        results.append((float(t), max(rate, 0.0), achieved, verts))
    return results


def _wz_problem(js: JointSource, source: str, enc_side, dec_side, d: DistortionMeasure,
                cfg: SolverConfig) -> tuple[_WZProblem, tuple[str, ...], tuple[str, ...]]:
    enc_side, dec_side = _labels(enc_side), _labels(dec_side)
    t_labels = (source,) + tuple(a for a in enc_side if a != source)
    for a in t_labels + dec_side:
        js.axis(a)
    p_ts = pair_table(js, t_labels, dec_side)
    d_t = _source_distortion(js, source, t_labels[1:], d)
    n_u = cfg.card or (p_ts.shape[0] + 2)
    return _WZProblem(p_ts, d_t, n_u, js.size(source)), t_labels, dec_side


def _wz_points(js, source, enc_side, dec_side, d, targets, cfg, label="U"):
    prob, t_labels, s_labels = _wz_problem(js, source, enc_side, dec_side, d, cfg)
    pts = []
    for t, rate, achieved, verts in _wz_solve(prob, targets, cfg):
        w, v = max(verts, key=lambda x: (x[1].distortion <= t + FEAS_TOL, x[0]))
        ch = ConditionalChannel.new(label, prob.n_u, t_labels, v.channel)
        # decoder indexed by (side symbols..., u)
        dec = v.decoder.reshape(tuple(js.size(a) for a in s_labels) + (prob.n_u,))
        pts.append(RDPoint(t, rate, achieved, ch, dec, verts))
    return pts


def wyner_ziv(js: JointSource, d: DistortionMeasure, D: float, cfg: SolverConfig | None = None,
              source: str | None = None, side=None) -> RDPoint:
    """R^WZ_{X|S}(D): side information at the decoder only.

    ``side`` may be compound, e.g. ("Y", "Z").
    """
    cfg = cfg or SolverConfig()
    source = source or js.labels[0]
    side = _labels(side) if side is not None else tuple(a for a in js.labels if a != source)
    return _wz_points(js, source, (), side, d, [D], cfg)[0]


ENC_ONLY = "enc_only"
ENC_AND_DEC = "enc_and_dec"


def wz_star(js: JointSource, d: DistortionMeasure, D: float, switches: str = ENC_ONLY,
            cfg: SolverConfig | None = None, source: str = "X", enc_side="Z", dec_side="Y") -> RDPoint:
    """Wyner-Ziv with extra side information ``enc_side`` at the encoder.

    ``enc_only``: channel p(u|x,z), rate I(X,Z;U|Y), decoder psi(u,y).
    ``enc_and_dec``: ``enc_side`` also reaches the decoder, rate I(X;U|Y,Z),
    decoder psi(u,y,z).
    """
    cfg = cfg or SolverConfig()
    enc_side, dec_side = _labels(enc_side), _labels(dec_side)
    if not enc_side:
        raise SourceError("wz_star needs an encoder side-information label")
    if switches == ENC_ONLY:
        dec = dec_side
    elif switches == ENC_AND_DEC:
        dec = dec_side + tuple(a for a in enc_side if a not in dec_side)
    else:
        raise ValueError(f"unknown switch setting {switches!r}")
    return _wz_points(js, source, enc_side, dec, d, [D], cfg)[0]


def timeshare_matrix(point: RDPoint, n_u: int) -> np.ndarray:
    """Fold a time-shared point into one channel p(u|t) with ``n_u`` outputs.

    Each vertex keeps only the symbols it uses, placed in its own block and
    scaled by its weight, so U reveals the time-sharing index.  Falls back
    to the heaviest vertex alone when the blocks do not fit.
    """
    verts = point.timeshare or [(1.0, Vertex(point.distortion, point.rate, point.channel.matrix))]
    parts = []
    for w, v in verts:
        Q = np.asarray(v.channel, dtype=float)
        used = Q.sum(axis=0) > ZERO_FLOOR
        parts.append((w, Q[:, used]))
    if sum(q.shape[1] for _, q in parts) > n_u:
        parts = [(1.0, max(parts, key=lambda x: x[0])[1])]
        if parts[0][1].shape[1] > n_u:
            raise SourceError(f"vertex uses {parts[0][1].shape[1]} symbols, more than {n_u}")
    out = np.zeros((parts[0][1].shape[0], n_u))
    col = 0
    for w, q in parts:
        out[:, col:col + q.shape[1]] = w * q
        col += q.shape[1]
    return out / out.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------- curves

SELECTORS = ("classical", "conditional", "wyner_ziv", "wz_star_enc", "wz_star_encdec")


def solve_many(selector: str, js: JointSource, d: DistortionMeasure, budgets: Sequence[float],
               cfg: SolverConfig | None = None, source: str = "X", enc_side=("Z",),
               dec_side=("Y",)) -> list[RDPoint]:
    """Evaluate one member of the switch family at several budgets.

    ``classical`` ignores all side information, ``conditional`` gives
    ``dec_side`` plus ``enc_side`` to both ends, ``wyner_ziv`` uses
    ``dec_side`` at the decoder only, and the ``wz_star_*`` variants add
    ``enc_side`` at the encoder (and decoder).
    """
    cfg = cfg or SolverConfig()
    enc_side, dec_side = _labels(enc_side), _labels(dec_side)
    if selector == "classical":
        return _convex_points(js, source, (), d, budgets)
    if selector == "conditional":
        side = dec_side + tuple(a for a in enc_side if a not in dec_side)
        return _convex_points(js, source, side, d, budgets)
    if selector == "wyner_ziv":
        return _wz_points(js, source, (), dec_side, d, budgets, cfg)
    if selector == "wz_star_enc":
        return _wz_points(js, source, enc_side, dec_side, d, budgets, cfg)
    if selector == "wz_star_encdec":
        dec = dec_side + tuple(a for a in enc_side if a not in dec_side)
        return _wz_points(js, source, enc_side, dec, d, budgets, cfg)
    raise ValueError(f"unknown selector {selector!r}; choose from {SELECTORS}")


def convexify(budgets: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Lower convex, non-increasing envelope of sampled (D, R) evaluated on the samples."""
    budgets = np.asarray(budgets, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if budgets.size == 0:
        return rates.copy()
    hull = lower_envelope(budgets, rates)
    out = np.empty_like(rates)
    for i, b in enumerate(budgets):
        out[i] = envelope_at(budgets, rates, hull, b)[0]
    return np.minimum(out, rates)


def rd_curve(selector: str, js: JointSource, d: DistortionMeasure, grid: Sequence[float],
             cfg: SolverConfig | None = None, **labels) -> RDCurve:
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0) or np.any(grid < 0):
        raise ValueError("budget grid must be ascending and nonnegative")
    pts = solve_many(selector, js, d, grid, cfg, **labels)
    env = convexify(grid, np.array([p.rate for p in pts]))
    for p, r in zip(pts, env):
        p.rate = float(r)
    return RDCurve(selector, pts)
