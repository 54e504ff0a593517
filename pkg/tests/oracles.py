"""Independent reference computations used only by the tests.

None of these share code with the package solvers: the conditional
rate-distortion function is posed as a convex program for cvxpy, and the
Wyner-Ziv family is searched exhaustively over a simplex grid.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import minimize


def h2(p):
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = -p * np.log2(p) - (1 - p) * np.log2(1 - p)
    return np.nan_to_num(v)


def star(a, b):
    return a * (1 - b) + b * (1 - a)


# ---------------------------------------------------------------- convex program


def conditional_rd_cvx(p_xs: np.ndarray, d: np.ndarray, D: float) -> float:
    """min I(X; Xhat | S) s.t. E d(X, Xhat) <= D, as an exponential-cone program."""
    import cvxpy as cp

    nx, ns = p_xs.shape
    nk = d.shape[1]
    q = [cp.Variable((nx, nk), nonneg=True) for _ in range(ns)]
    cons, obj, dist = [], 0, 0
    for s in range(ns):
        ps = p_xs[:, s].sum()
        cons.append(cp.sum(q[s], axis=1) == 1)
        if ps <= 0:
            continue
        w = p_xs[:, s]
        J = cp.multiply(w[:, None], q[s])          # p(x, s, xhat)
        r = cp.sum(J, axis=0) / ps                   # p(xhat | s)
        ref = cp.vstack([w[i] * r for i in range(nx)])
        obj += cp.sum(cp.rel_entr(J, ref))
        dist += cp.sum(cp.multiply(J, d))
    cons.append(dist <= D)
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL)
    return max(float(prob.value), 0.0) / math.log(2)


# ---------------------------------------------------------------- grid search


def simplex_grid(n: int, step: float) -> np.ndarray:
    """All points of the n-simplex whose coordinates are multiples of ``step``."""
    m = int(round(1 / step))
    pts = [c for c in itertools.product(range(m + 1), repeat=n - 1) if sum(c) <= m]
    return np.array([list(c) + [m - sum(c)] for c in pts], dtype=float) / m


def _pareto(ds, rs, idx):
    o = np.lexsort((rs, ds))
    ds, rs, idx = ds[o], rs[o], idx[o]
    keep = rs < np.minimum.accumulate(np.concatenate([[np.inf], rs[:-1]])) - 1e-15
    return ds[keep], rs[keep], idx[keep]


def _hull_value(ds, rs, D):
    """Lower convex envelope of the points at D (monotone chain)."""
    o = np.lexsort((rs, ds))
    pts = list(zip(ds[o], rs[o], o))
    lower = []
    for p in pts:
        while len(lower) >= 2:
            (x1, y1, _), (x2, y2, _) = lower[-2], lower[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                lower.pop()
            else:
                break
        lower.append(p)
    xs = np.array([p[0] for p in lower])
    ys = np.array([p[1] for p in lower])
    if D <= xs[0]:
        return (ys[0], [lower[0][2]], 0.0) if D >= xs[0] - 1e-12 else (np.inf, [], 0.0)
    if D >= xs[-1]:
        return float(ys[-1]), [lower[-1][2]], 0.0
    k = int(np.searchsorted(xs, D)) - 1
    t = (D - xs[k]) / (xs[k + 1] - xs[k])
    slope = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])
    return float(ys[k] + t * (ys[k + 1] - ys[k])), [lower[k][2], lower[k + 1][2]], -slope


class WZGrid:
    """Wyner-Ziv-type problem: encoder sees T, decoder sees S, distortion dt[t, xhat].

    Rate I(T; U | S) with U - T - S; decoder is the Bayes rule on (S, U).
    """

    def __init__(self, p_ts: np.ndarray, dt: np.ndarray, n_u: int):
        self.p = np.asarray(p_ts, dtype=float)
        self.dt = np.asarray(dt, dtype=float)
        self.n_u = n_u
        self.pt = self.p.sum(axis=1)

    def evaluate(self, Q: np.ndarray):
        """(distortion, rate) for channels Q of shape (..., T, U)."""
        J = np.einsum("ts,...tu->...su", self.p, Q)
        M = np.einsum("ts,...tu,tk->...suk", self.p, Q, self.dt)
        dist = M.min(axis=-1).sum(axis=(-1, -2))
        ps = J.sum(axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            hus = -np.where(J > 0, J * np.log2(J / ps), 0.0).sum(axis=(-1, -2))
            hut = -np.where(Q > 0, self.pt[:, None] * Q * np.log2(Q), 0.0).sum(axis=(-1, -2))
        return dist, np.maximum(hus - hut, 0.0)

    def search(self, step: float):
        """Pareto-minimal (D, R) over the product grid, with the grid indices."""
        G = simplex_grid(self.n_u, step)
        nt = self.p.shape[0]
        head = max(nt - 2, 0)
        out_d, out_r, out_i = [], [], []
        tail = np.array(list(itertools.product(range(len(G)), repeat=nt - head)))
        Qtail = G[tail]  # (n, nt-head, U)
        for fixed in itertools.product(range(len(G)), repeat=head):
            Q = np.concatenate([np.broadcast_to(G[list(fixed)], (len(tail), head, self.n_u)), Qtail], axis=1)
            ds, rs = self.evaluate(Q)
            ds, rs, idx = _pareto(ds, rs, np.arange(len(tail)))
            out_d.append(ds)
            out_r.append(rs)
            out_i.append(np.concatenate([np.broadcast_to(np.array(fixed, dtype=int), (len(idx), head)),
                                         tail[idx]], axis=1))
        ds, rs = np.concatenate(out_d), np.concatenate(out_r)
        ids = np.concatenate(out_i)
        ds, rs, keep = _pareto(ds, rs, np.arange(len(ds)))
        return ds, rs, G[ids[keep]]

    def polish(self, Q0: np.ndarray, beta: float):
        """Local Nelder-Mead on R + beta D from a grid channel (softmax parametrisation)."""
        shape = Q0.shape

        def chan(z):
            z = z.reshape(shape)
            e = np.exp(z - z.max(axis=1, keepdims=True))
            return e / e.sum(axis=1, keepdims=True)

        def f(z):
            d, r = self.evaluate(chan(z))
            return float(r + beta * d)

        z0 = np.log(np.maximum(Q0, 1e-6))
        res = minimize(f, z0.ravel(), method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 4000, "maxfev": 8000})
        return chan(res.x)

    def value(self, D: float, step: float = 0.02) -> float:
        """Convexified grid minimum at D, then polished around the active vertices."""
        ds, rs, Qs = self.search(step)
        v, active, beta = _hull_value(ds, rs, D)
        extra_d, extra_r = [], []
        for i in active:
            if beta <= 0:
                break
            Q = self.polish(Qs[i], beta)
            d, r = self.evaluate(Q)
            extra_d.append(float(d))
            extra_r.append(float(r))
        if extra_d:
            v2, _, _ = _hull_value(np.concatenate([ds, extra_d]), np.concatenate([rs, extra_r]), D)
            v = min(v, v2)
        return float(v)


def wz_grid(js, d: np.ndarray, D: float, n_u: int, enc=("X",), dec=("Y",), step=0.02) -> float:
    """Grid oracle with encoder input ``enc`` (which must start with X) and decoder side ``dec``."""
    p = js.table(("X",) + tuple(a for a in enc if a != "X") + tuple(a for a in dec if a not in enc))
    ne = int(np.prod(p.shape[:len(enc)]))
    p_ts = p.reshape(ne, -1)
    nx = js.size("X")
    x_of_t = np.repeat(np.arange(nx), ne // nx)
    return WZGrid(p_ts, d[x_of_t], n_u).value(D, step)


def wz_dsbs(p: float, D: float) -> float:
    """Closed-form Wyner-Ziv function of the doubly symmetric binary source, Hamming."""
    if D >= p:
        return 0.0
    # lower convex envelope of g(D) = h(p*D) - h(D) on [0, p] together with (p, 0)
    grid = np.linspace(0.0, p, 200001)
    g = h2(star(p, grid)) - h2(grid)
    # tangent from (p, 0): checks every candidate touching point
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = g / (grid - p)
    best = g.copy()
    # line from (d0, g(d0)) to (p, 0), evaluated at D, for d0 <= D
    m = grid <= D
    lines = g[m] + slope[m] * (D - grid[m])
    return float(min(lines.min(), np.interp(D, grid, best)))


def _H(p, axes_keep):
    """Entropy (bits) of the marginal of batched tensor p (batch axis 0) over ``axes_keep``."""
    drop = tuple(a for a in range(1, p.ndim) if a not in axes_keep)
    m = p.sum(axis=drop) if drop else p
    m = m.reshape(m.shape[0], -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.where(m > 0, m * np.log2(m), 0.0).sum(axis=1)


def dscd_outer_grid(pxy: np.ndarray, d_A: np.ndarray, d_B: np.ndarray, D_A: float, D_B: float,
                    u_step=0.05, v_step=0.1) -> float:
    """Exhaustive search of the unit-weight DSCD outer objective for a relay without side information.

    U1 and U2 are binary symmetric views of X and Y (crossovers on a grid);
    each marginal delivery channel p(v|u1,u2) ranges over a binary simplex
    grid.  Only the marginals of the delivery channel enter the objective, so
    V1 and V2 are searched separately.
    """
    flips = np.arange(0.0, 0.5 + 1e-12, u_step)
    rows = simplex_grid(2, v_step)
    W = rows[np.array(list(itertools.product(range(len(rows)), repeat=4)))].reshape(-1, 2, 2, 2)
    best = np.inf
    for a in flips:
        A = np.array([[1 - a, a], [a, 1 - a]])
        for b in flips:
            B = np.array([[1 - b, b], [b, 1 - b]])
            p = pxy[:, :, None, None] * A[:, None, :, None] * B[None, :, None, :]   # x, y, u1, u2
            pb = p[None]
            r_ar = float((_H(pb, (1, 2)) + _H(pb, (2, 3)) - _H(pb, (1, 2, 3)) - _H(pb, (2,)))[0])
            r_br = float((_H(pb, (1, 2)) + _H(pb, (1, 4)) - _H(pb, (1, 2, 4)) - _H(pb, (1,)))[0])
            J = p[None, ..., None] * W[:, None, None]                                  # n, x, y, u1, u2, v
            # R_RB = I(X; V1 | Y, U2), decoder of X from (Y, U2, V1)
            r_rb = _H(J, (1, 2, 4)) + _H(J, (2, 4, 5)) - _H(J, (1, 2, 4, 5)) - _H(J, (2, 4))
            m = J.sum(axis=3)                                                           # n, x, y, u2, v
            dB = np.einsum("nxyuv,xk->nyuvk", m, d_B).min(axis=-1).sum(axis=(1, 2, 3))
            # R_RA = I(Y; V2 | X, U1), decoder of Y from (X, U1, V2)
            r_ra = _H(J, (1, 2, 3)) + _H(J, (1, 3, 5)) - _H(J, (1, 2, 3, 5)) - _H(J, (1, 3))
            m = J.sum(axis=4)                                                           # n, x, y, u1, v
            dA = np.einsum("nxyuv,yk->nxuvk", m, d_A).min(axis=-1).sum(axis=(1, 2, 3))
            ok_b, ok_a = dB <= D_B + 1e-12, dA <= D_A + 1e-12
            if ok_a.any() and ok_b.any():
                best = min(best, r_ar + r_br + float(r_ra[ok_a].min()) + float(r_rb[ok_b].min()))
    return best
