"""Penalised descent over products of conditional channels.

A model is a fixed source pmf times a list of channel blocks p(outputs |
parents).  The objective is a weighted sum of conditional mutual
informations of the full joint; distortion budgets are enforced through
a searched Lagrange multiplier per budget, with optimal (argmin) decoders.
Blocks are updated cyclically by exponentiated-gradient steps with a
per-restart backtracking line search.  Restarts (and several weight vectors) run as one
batch along a leading axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .probcore import ZERO_FLOOR, JointSource, SourceError
from .rdsolve import FEAS_TOL, SolverConfig

LN2 = math.log(2.0)
LOG_FLOOR = -300.0


@dataclass(frozen=True)
class Block:
    outputs: tuple[str, ...]
    parents: tuple[str, ...]


@dataclass(frozen=True)
class Budget:
    """E d(source, psi(context)) <= budget, psi chosen optimally."""

    source: str
    context: tuple[str, ...]
    d: np.ndarray
    budget: float


Term = tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]


@dataclass
class Solution:
    feasible: bool
    objective: float
    terms: np.ndarray
    distortions: np.ndarray
    channels: list[np.ndarray] = field(repr=False)


def _take(ev: dict, idx: np.ndarray) -> dict:
    """Rows ``idx`` of a batched evaluation (batch is axis 0 everywhere)."""
    return {k: [a[idx] for a in v] if isinstance(v, list) else v[idx] for k, v in ev.items()}


def _put(ev: dict, idx: np.ndarray, part: dict) -> None:
    for k, v in ev.items():
        if isinstance(v, list):
            for a, b in zip(v, part[k]):
                a[idx] = b
        else:
            v[idx] = part[k]


class AuxModel:
    def __init__(self, source: JointSource, cards: dict[str, int], blocks: Sequence[Block],
                 terms: Sequence[Term], budgets: Sequence[Budget], max_alphabet: int | None = None):
        self.labels = tuple(source.labels) + tuple(cards)
        if len(set(self.labels)) != len(self.labels):
            raise SourceError("auxiliary labels collide with source labels")
        self.sizes = tuple(source.sizes) + tuple(int(c) for c in cards.values())
        if any(s < 1 for s in self.sizes):
            raise SourceError("cardinalities must be >= 1")
        aux = int(np.prod(list(cards.values()), dtype=int)) if cards else 1
        if max_alphabet is not None and aux > max_alphabet:
            raise SourceError(f"joint auxiliary alphabet {aux} exceeds the cap {max_alphabet}")
        self.n = len(self.labels)
        self.src = source.pmf.reshape((1,) + source.sizes + (1,) * len(cards))
        self.blocks = list(blocks)
        covered = set(source.labels)
        for b in self.blocks:
            for a in b.parents:
                if a not in covered:
                    raise SourceError(f"block parent {a!r} is not defined before use")
            covered.update(b.outputs)
        if covered != set(self.labels):
            raise SourceError(f"auxiliaries without a generating block: {set(self.labels) - covered}")
        self.block_axes = []
        self.block_shapes = []
        for b in self.blocks:
            par = tuple(self._ax(a) for a in b.parents)
            out = tuple(self._ax(a) for a in b.outputs)
            shape = [1] * (self.n + 1)
            for ax in par + out:
                shape[ax] = self.sizes[ax - 1]
            self.block_axes.append((par, out))
            self.block_shapes.append(tuple(shape[1:]))
        sets: dict[frozenset, int] = {}
        rows = []
        for a, b, c in terms:
            a, b, c = set(a), set(b), set(c)
            row = {}
            for s, sign in ((a | c, 1), (b | c, 1), (a | b | c, -1), (c, -1)):
                if not s:
                    continue
                key = frozenset(s)
                idx = sets.setdefault(key, len(sets))
                row[idx] = row.get(idx, 0) + sign
            rows.append(row)
        self.sets = list(sets)
        self.set_axes = [tuple(sorted(self._ax(a) for a in s)) for s in self.sets]
        self.term_matrix = np.zeros((len(rows), len(self.sets)))
        for i, row in enumerate(rows):
            for j, v in row.items():
                self.term_matrix[i, j] = v
        self.budgets = list(budgets)
        self.n_terms = len(rows)
        self.budget_axes = [tuple(sorted((self._ax(b.source),) + tuple(self._ax(a) for a in b.context)))
                            for b in self.budgets]
        self._plan = self._marginal_plan(set(self.set_axes) | set(self.budget_axes))

    def _marginal_plan(self, needed) -> list[tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]]:
        """Order marginals so each is summed from its smallest computed superset."""
        full = tuple(range(1, self.n + 1))
        weight = lambda axes: int(np.prod([self.sizes[a - 1] for a in axes], dtype=int))
        done = [full]
        plan = []
        for key in sorted(needed, key=lambda k: (-weight(k), k)):
            if key == full:
                continue
            parent = min((d for d in done if set(key) <= set(d)), key=weight)
            plan.append((key, parent, tuple(a for a in parent if a not in key)))
            done.append(key)
        return plan

    def marginals(self, P: np.ndarray) -> dict:
        out = {tuple(range(1, self.n + 1)): P}
        for key, parent, drop in self._plan:
            out[key] = out[parent].sum(axis=drop, keepdims=True)
        return out

    def _ax(self, label: str) -> int:
        try:
            return self.labels.index(label) + 1
        except ValueError:
            raise SourceError(f"unknown label {label!r}") from None

    def _others(self, keep: Sequence[int]) -> tuple[int, ...]:
        keep = set(keep)
        return tuple(i for i in range(1, self.n + 1) if i not in keep)

    # ------------------------------------------------------------ evaluation

    def normalize(self, k: int, logits: np.ndarray) -> np.ndarray:
        out = self.block_axes[k][1]
        m = logits.max(axis=out, keepdims=True)
        lse = m + np.log(np.exp(logits - m).sum(axis=out, keepdims=True))
        return np.maximum(logits - lse, LOG_FLOOR)

    def joint(self, chans: Sequence[np.ndarray]) -> np.ndarray:
        P = self.src
        for c in chans:
            P = P * c
        return P

    def evaluate(self, chans: Sequence[np.ndarray], want_grad_parts: bool = False) -> dict:
        P = self.joint(chans)
        B = P.shape[0]
        H = np.zeros((B, len(self.sets)))
        logs = []
        marg = self.marginals(P)
        for j, axes in enumerate(self.set_axes):
            Ps = marg[axes]
            lg = np.log2(np.maximum(Ps, 1e-300))
            H[:, j] = -np.where(Ps > ZERO_FLOOR, Ps * lg, 0.0).reshape(B, -1).sum(axis=1)
            if want_grad_parts:
                logs.append(lg)
        dist = np.zeros((B, len(self.budgets)))
        dsel = []
        decs = []
        for j, bud in enumerate(self.budgets):
            t = self._ax(bud.source)
            ctx = tuple(self._ax(a) for a in bud.context)
            Pc = marg[self.budget_axes[j]]
            M = np.moveaxis(Pc, t, -1) @ bud.d  # (B, ..., K) with t removed
            psi = M.argmin(axis=-1)
            dist[:, j] = np.take_along_axis(M, psi[..., None], axis=-1).reshape(B, -1).sum(axis=1)
            decs.append(psi)
            if want_grad_parts:
                dsel.append(np.moveaxis(np.take(bud.d, psi, axis=1), 0, t))
        terms = H @ self.term_matrix.T
        return {"P": P, "H": H, "terms": terms, "dist": dist, "logs": logs, "dsel": dsel, "decoders": decs}

    # ------------------------------------------------------------ solving

    def _lagrangian(self, ev, w, lam):
        return (ev["terms"] * w).sum(axis=1) + (lam * ev["dist"]).sum(axis=1)

    def _grad_block(self, k, chans, ev, w, lam):
        P = ev["P"]
        setc = w @ self.term_matrix  # (B, n_sets)
        bshape = (-1,) + (1,) * self.n
        G = np.zeros_like(P)
        for j, lg in enumerate(ev["logs"]):
            G -= setc[:, j].reshape(bshape) * lg
        for j, ds in enumerate(ev["dsel"]):
            G += lam[:, j].reshape(bshape) * ds
        par, out = self.block_axes[k]
        rest = self.src
        for i, c in enumerate(chans):
            if i != k:
                rest = rest * c
        gk = (G * rest).sum(axis=self._others(par + out), keepdims=True)
        ppar = P.sum(axis=self._others(par), keepdims=True)
        gk = np.where(ppar > 1e-14, gk / np.maximum(ppar, 1e-300), 0.0)
        return gk - gk.mean(axis=out, keepdims=True)

    def _descend(self, logits, w, lam, sweeps, tol, record):
        """Cyclic exponentiated-gradient descent on the Lagrangian at fixed multipliers.

        Elements whose Lagrangian stops improving drop out of the batch;
        line-search trials are evaluated only for the elements still pending.
        """
        B = w.shape[0]
        nblk = len(self.blocks)
        eta = np.full((B, nblk), LN2)
        chans = [np.exp(L) for L in logits]
        ev = self.evaluate(chans, want_grad_parts=True)
        everything = np.arange(B)
        record(everything, chans, ev)
        phi = self._lagrangian(ev, w, lam)
        active = np.ones(B, dtype=bool)
        for it in range(sweeps):
            act = np.flatnonzero(active)
            if act.size == 0:
                break
            sc = [c[act] for c in chans]
            sl = [L[act] for L in logits]
            sev = _take(ev, act)
            sw, slam, sphi, seta = w[act], lam[act], phi[act], eta[act]
            start = sphi.copy()
            for k in range(nblk):
                gk = self._grad_block(k, sc, sev, sw, slam)
                pend = np.arange(act.size)
                for _trial in range(4):
                    if pend.size == 0:
                        break
                    bshape = (-1,) + (1,) * self.n
                    trial = self.normalize(k, sl[k][pend] - seta[pend, k].reshape(bshape) * gk[pend])
                    tchans = [c[pend] for c in sc]
                    tchans[k] = np.exp(trial)
                    tev = self.evaluate(tchans, want_grad_parts=True)
                    tphi = self._lagrangian(tev, sw[pend], slam[pend])
                    ok = tphi < sphi[pend] - 1e-15 * np.maximum(1.0, np.abs(sphi[pend]))
                    if ok.any():
                        idx = pend[ok]
                        sl[k][idx] = trial[ok]
                        sc[k][idx] = tchans[k][ok]
                        seta[idx, k] = np.minimum(seta[idx, k] * 1.5, 50.0)
                        acc_ev = _take(tev, np.flatnonzero(ok))
                        _put(sev, idx, acc_ev)
                        sphi[idx] = tphi[ok]
                        record(act[idx], [c[idx] for c in sc], acc_ev)
                    rej = pend[~ok]
                    seta[rej, k] = np.maximum(seta[rej, k] * 0.3, 1e-8)
                    pend = rej
            for k in range(nblk):
                chans[k][act] = sc[k]
                logits[k][act] = sl[k]
            _put(ev, act, sev)
            phi[act] = sphi
            eta[act] = seta
            if it >= 2:
                done = start - sphi <= tol * np.maximum(1.0, np.abs(sphi))
                active[act[done]] = False
        return ev

    def solve(self, weights: np.ndarray, inits: Sequence[Sequence[np.ndarray]], groups: np.ndarray,
              cfg: SolverConfig, smooth: float = 1e-4) -> list[Solution | None]:
        """Minimise ``weights[g] . terms`` for each group ``g`` under the budgets.

        ``inits[i]`` are channel probabilities (block shapes, no batch axis)
        for batch element ``i`` belonging to group ``groups[i]``.  Every
        initial point is itself a candidate, so a feasible warm start is
        never made worse.  Returns the best feasible solution per group or
        ``None``.

        One multiplier per budget is searched on a log scale: it starts
        large (``penalty_start`` bits per unit of distortion spread, scaled by
        the largest weight), is divided or multiplied by ``penalty_factor``
        until the budget is bracketed, then refined by Illinois steps, for
        ``penalty_rounds`` updates in total.  Each Lagrangian minimisation
        restarts from the best feasible channels whenever the previous one
        overshot a budget, which keeps iterates away from the uninformative
        stationary point that small multipliers fall into.
        """
        weights = np.atleast_2d(np.asarray(weights, dtype=float))
        groups = np.asarray(groups, dtype=int)
        B = len(inits)
        nb = len(self.budgets)
        w = weights[groups]
        budgets = np.array([b.budget for b in self.budgets], dtype=float)[None, :]
        exact = [np.stack([np.asarray(init[k], dtype=float).reshape(self.block_shapes[k]) for init in inits])
                 for k in range(len(self.blocks))]
        best_obj = np.full(B, np.inf)
        best = [c.copy() for c in exact]
        best_terms = np.zeros((B, self.n_terms))
        best_dist = np.zeros((B, nb))

        def record(idx, chans, ev):
            obj = (np.maximum(ev["terms"], 0.0) * w[idx]).sum(axis=1)
            ok = np.all(ev["dist"] <= budgets + FEAS_TOL, axis=1) & (obj < best_obj[idx] - 1e-15)
            if ok.any():
                rows = idx[ok]
                best_obj[rows] = obj[ok]
                best_terms[rows] = ev["terms"][ok]
                best_dist[rows] = ev["dist"][ok]
                for k in range(len(chans)):
                    best[k][rows] = chans[k][ok]

        record(np.arange(B), exact, self.evaluate(exact))

        def to_logits(chans):
            out = []
            for k, c in enumerate(chans):
                nout = int(np.prod([self.sizes[a - 1] for a in self.block_axes[k][1]], dtype=int))
                out.append(self.normalize(k, np.log(np.maximum((1 - smooth) * c + smooth / nout, 1e-300))))
            return out

        logits = to_logits(exact)
        spread = np.array([float(b.d.max() - b.d.min()) or 1.0 for b in self.budgets])[None, :]
        lam = np.broadcast_to(cfg.penalty_start * np.maximum(w.max(axis=1, keepdims=True), 1e-3) / spread,
                              (B, nb)).copy()
        lo = np.full((B, nb), np.nan)   # multiplier with budget violated
        hi = np.full((B, nb), np.nan)   # multiplier with budget met
        flo = np.zeros((B, nb))
        fhi = np.zeros((B, nb))
        side = np.zeros((B, nb), dtype=int)
        lam_min = 1e-6 / spread
        factor = cfg.penalty_factor
        for rnd in range(max(cfg.penalty_rounds, 1)):
            ev = self._descend(logits, w, lam, cfg.sweeps, cfg.tol, record)
            g = ev["dist"] - budgets
            feas = g <= FEAS_TOL
            # restart overshooting elements from their best feasible channels
            bad = ~np.all(feas, axis=1) & np.isfinite(best_obj)
            if bad.any():
                restored = to_logits(best)
                for k in range(len(logits)):
                    logits[k][bad] = restored[k][bad]
            for j in range(nb):
                f = g[:, j]
                upd_hi = feas[:, j]
                hi[upd_hi, j] = lam[upd_hi, j]
                fhi[upd_hi, j] = f[upd_hi]
                lo[~upd_hi, j] = lam[~upd_hi, j]
                flo[~upd_hi, j] = f[~upd_hi]
                both = np.isfinite(lo[:, j]) & np.isfinite(hi[:, j])
                new = lam[:, j].copy()
                only_hi = ~both & np.isfinite(hi[:, j])
                new[only_hi] = hi[only_hi, j] / factor
                only_lo = ~both & np.isfinite(lo[:, j])
                new[only_lo] = lo[only_lo, j] * factor
                if both.any():
                    a, b = np.log(lo[both, j]), np.log(hi[both, j])
                    fa, fb = flo[both, j].copy(), fhi[both, j].copy()
                    # Illinois: damp the end that stayed fixed twice
                    s = side[both, j]
                    fa = np.where(s == -1, fa / 2, fa)
                    fb = np.where(s == 1, fb / 2, fb)
                    denom = fa - fb
                    x = np.where(np.abs(denom) > 1e-300, b - fb * (a - b) / np.where(denom == 0, 1, denom),
                                 0.5 * (a + b))
                    lo_b, hi_b = np.minimum(a, b), np.maximum(a, b)
                    x = np.clip(x, lo_b + 0.05 * (hi_b - lo_b), hi_b - 0.05 * (hi_b - lo_b))
                    new[both] = np.exp(x)
                side[:, j] = np.where(upd_hi, 1, -1)
                # a budget met at a negligible multiplier is inactive
                inactive = np.isfinite(hi[:, j]) & (hi[:, j] <= lam_min[0, j])
                new[inactive] = 0.0
                lam[:, j] = new
        out: list[Solution | None] = []
        for gi in range(weights.shape[0]):
            members = np.flatnonzero(groups == gi)
            if members.size == 0 or not np.isfinite(best_obj[members]).any():
                out.append(None)
                continue
            i = members[np.argmin(best_obj[members])]
            out.append(Solution(True, float(best_obj[i]), np.maximum(best_terms[i], 0.0), best_dist[i].copy(),
                                [b[i].copy() for b in best]))
        return out

    # ------------------------------------------------------------ helpers

    def random_channels(self, rng: np.random.Generator) -> list[np.ndarray]:
        chans = []
        for k in range(len(self.blocks)):
            par, out = self.block_axes[k]
            shape = self.block_shapes[k]
            g = rng.gamma(1.0, size=shape)
            chans.append(g / g.sum(axis=tuple(a - 1 for a in out), keepdims=True))
        return chans

    def constant_channels(self) -> list[np.ndarray]:
        chans = []
        for k in range(len(self.blocks)):
            c = np.zeros(self.block_shapes[k])
            idx = tuple(0 if (a + 1) in self.block_axes[k][1] else slice(None) for a in range(self.n))
            c[idx] = 1.0
            chans.append(c)
        return chans

    def channel_from_fn(self, k: int, fn) -> np.ndarray:
        """Deterministic block: ``fn(parent symbols dict) -> output symbols tuple``."""
        par, out = self.block_axes[k]
        c = np.zeros(self.block_shapes[k])
        par_sizes = [self.sizes[a - 1] for a in par]
        for idx in np.ndindex(*par_sizes):
            sym = {self.labels[a - 1]: v for a, v in zip(par, idx)}
            o = fn(sym)
            full = [0] * self.n
            for a, v in zip(par, idx):
                full[a - 1] = v
            for a, v in zip(out, o):
                full[a - 1] = v % self.sizes[a - 1]
            c[tuple(full)] = 1.0
        return c

    def decoders(self, chans: Sequence[np.ndarray]) -> list[np.ndarray]:
        ev = self.evaluate([c[None] for c in chans])
        return [d[0] for d in ev["decoders"]]

    def terms_of(self, chans: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        ev = self.evaluate([c[None] for c in chans])
        return ev["terms"][0], ev["dist"][0]

    def to_matrix(self, k: int, arr: np.ndarray) -> np.ndarray:
        """Block array -> stochastic matrix (rows: block parents, cols: block outputs, declared order)."""
        b = self.blocks[k]
        order = [self._ax(a) - 1 for a in b.parents + b.outputs]
        full = np.broadcast_to(arr, tuple(self.sizes[i] if i in order else 1 for i in range(self.n)))
        sq = full.reshape(tuple(self.sizes[i] if i in order else 1 for i in range(self.n)))
        kept = sorted(order)
        t = sq.reshape([self.sizes[i] for i in kept])
        t = np.transpose(t, [kept.index(i) for i in order])
        rows = int(np.prod([self.sizes[self._ax(a) - 1] for a in b.parents], dtype=int))
        return np.ascontiguousarray(t.reshape(rows, -1))

    def from_matrix(self, k: int, matrix: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`to_matrix`."""
        b = self.blocks[k]
        order = [self._ax(a) - 1 for a in b.parents + b.outputs]
        t = np.asarray(matrix, dtype=float).reshape([self.sizes[i] for i in order])
        kept = sorted(order)
        t = np.transpose(t, [order.index(i) for i in kept])
        return t.reshape(self.block_shapes[k]).copy()

    def embed(self, k: int, arr: np.ndarray) -> np.ndarray:
        """Lift a block array built with smaller alphabets into this model.

        New output symbols get zero mass; rows for new parent symbols (which
        carry no probability) copy the row of the last old symbol.
        """
        par, out = self.block_axes[k]
        arr = np.asarray(arr, dtype=float)
        target = self.block_shapes[k]
        if arr.ndim != len(target) or any(o > t for o, t in zip(arr.shape, target)):
            raise SourceError(f"cannot embed block of shape {arr.shape} into {target}")
        for a in out:
            i = a - 1
            pad = [(0, 0)] * arr.ndim
            pad[i] = (0, target[i] - arr.shape[i])
            arr = np.pad(arr, pad)
        for a in par:
            i = a - 1
            if arr.shape[i] < target[i]:
                arr = np.take(arr, np.minimum(np.arange(target[i]), arr.shape[i] - 1), axis=i)
        return arr
