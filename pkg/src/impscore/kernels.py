"""Batched scoring and gradient kernels.

Two interchangeable implementations of the same math: a numba-compiled
path with explicit per-instance loops (batch contributions accumulated in
ascending index order) and a vectorized pure-numpy fallback.  The active
path is chosen by the IMPSCORE_KERNELS environment variable:

    auto   use numba when importable, numpy otherwise (default)
    numba  require the compiled path
    numpy  force the fallback

Each path is deterministic on its own; the two are not required to agree
bitwise, only to within float tolerance.
"""

from __future__ import annotations

import os

import numpy as np

from .exceptions import ConfigError, DimensionError

# Lower bound on the cosine denominator. A plain additive epsilon would
# break exact scale invariance, so the guard is max(norm product, eps);
# zero-norm inputs then score similarity 0.
COS_EPS = 1e-12

TRANSFORM_P_TO_S = 0
TRANSFORM_S_TO_P = 1
TRANSFORM_THIRD = 2

METRIC_COSINE = 0
METRIC_EUCLIDEAN = 1

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - depends on installed extras
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        # no-op decorator so the jitted definitions stay importable
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap


_VALID = ("numba", "numpy")


def _resolve(requested: str) -> str:
    requested = requested.strip().lower() or "auto"
    if requested == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    if requested not in _VALID:
        raise ConfigError(
            f"kernel backend must be one of auto, numba, numpy; got {requested!r}"
        )
    if requested == "numba" and not HAS_NUMBA:
        raise ConfigError("IMPSCORE_KERNELS=numba but numba is not importable")
    return requested


_ACTIVE = _resolve(os.environ.get("IMPSCORE_KERNELS", "auto"))


def active_backend() -> str:
    """Name of the kernel path currently in use ('numba' or 'numpy')."""
    return _ACTIVE


def use_backend(name: str) -> None:
    """Switch kernel paths at runtime (tests and benchmarks)."""
    global _ACTIVE
    _ACTIVE = _resolve(name)


# ---------------------------------------------------------------------------
# numpy path

def _rows_dot(A, B):
    return np.einsum("ij,ij->i", A, B)


def _rows_dist_np(A, B, metric):
    if metric == METRIC_COSINE:
        dot = _rows_dot(A, B)
        den = np.maximum(np.sqrt(_rows_dot(A, A) * _rows_dot(B, B)), COS_EPS)
        return 1.0 - np.clip(dot / den, -1.0, 1.0)
    diff = A - B
    return np.sqrt(_rows_dot(diff, diff))


def _rows_dist_grads_np(A, B, metric):
    """Per-row gradients of the distance with respect to A and B."""
    if metric == METRIC_COSINE:
        dot = _rows_dot(A, B)
        aa = _rows_dot(A, A)
        bb = _rows_dot(B, B)
        prod = np.sqrt(aa * bb)
        ok = prod > COS_EPS
        den = np.where(ok, prod, 1.0)
        s = np.where(ok, dot / den, 0.0)
        aa_safe = np.where(aa > 0.0, aa, 1.0)
        bb_safe = np.where(bb > 0.0, bb, 1.0)
        # d(1 - s)/dA = s*A/‖A‖² − B/(‖A‖‖B‖)
        gA = s[:, None] * A / aa_safe[:, None] - B / den[:, None]
        gB = s[:, None] * B / bb_safe[:, None] - A / den[:, None]
        gA[~ok] = 0.0
        gB[~ok] = 0.0
        return gA, gB
    diff = A - B
    r = np.sqrt(_rows_dot(diff, diff))
    safe = np.where(r > 0.0, r, 1.0)
    gA = diff / safe[:, None]
    gA[r == 0.0] = 0.0
    return gA, -gA


def _compared_pair_np(E, W_p, W_s, W_a, W_b, transform):
    HP = E @ W_p
    HS = E @ W_s
    if transform == TRANSFORM_P_TO_S:
        return HP, HS, HS, HP @ W_a
    if transform == TRANSFORM_S_TO_P:
        return HP, HS, HP, HS @ W_a
    return HP, HS, HP @ W_a, HS @ W_b


def _imp_scores_np(E, W_p, W_s, W_a, W_b, transform, imp_metric):
    _, _, A, B = _compared_pair_np(E, W_p, W_s, W_a, W_b, transform)
    return _rows_dist_np(A, B, imp_metric)


def _prag_distances_np(EA, EB, W_p, prag_metric):
    return _rows_dist_np(EA @ W_p, EB @ W_p, prag_metric)


def _loss_and_grads_np(E1, E2, E3, W_p, W_s, W_a, W_b, transform,
                       imp_metric, prag_metric, gamma1, gamma2, alpha):
    Es = (E1, E2, E3)
    triples = [_compared_pair_np(E, W_p, W_s, W_a, W_b, transform) for E in Es]
    I = [_rows_dist_np(t[2], t[3], imp_metric) for t in triples]
    HP1, HP2, HP3 = (t[0] for t in triples)
    dp_pos = _rows_dist_np(HP1, HP2, prag_metric)
    dp_neg = _rows_dist_np(HP1, HP3, prag_metric)

    z12 = gamma1 - (I[0] - I[1])
    z13 = gamma1 - (I[0] - I[2])
    zp = gamma2 - (dp_neg - dp_pos)
    loss = float(np.sum(np.maximum(z12, 0.0)) + np.sum(np.maximum(z13, 0.0))
                 + alpha * np.sum(np.maximum(zp, 0.0)))

    w12 = (z12 > 0.0).astype(np.float64)
    w13 = (z13 > 0.0).astype(np.float64)
    wp = alpha * (zp > 0.0).astype(np.float64)

    gWp = np.zeros_like(W_p)
    gWs = np.zeros_like(W_s)
    gWa = np.zeros_like(W_a)
    gWb = np.zeros_like(W_b)

    for E, (HP, HS, A, B), coef in zip(Es, triples, (-(w12 + w13), w12, w13)):
        gA, gB = _rows_dist_grads_np(A, B, imp_metric)
        GA = coef[:, None] * gA
        GB = coef[:, None] * gB
        if transform == TRANSFORM_P_TO_S:
            gWs += E.T @ GA
            gWa += HP.T @ GB
            gWp += E.T @ (GB @ W_a.T)
        elif transform == TRANSFORM_S_TO_P:
            gWp += E.T @ GA
            gWa += HS.T @ GB
            gWs += E.T @ (GB @ W_a.T)
        else:
            gWa += HP.T @ GA
            gWp += E.T @ (GA @ W_a.T)
            gWb += HS.T @ GB
            gWs += E.T @ (GB @ W_b.T)

    gU12, gV12 = _rows_dist_grads_np(HP1, HP2, prag_metric)
    gU13, gV13 = _rows_dist_grads_np(HP1, HP3, prag_metric)
    G1 = wp[:, None] * gU12 - wp[:, None] * gU13
    G2 = wp[:, None] * gV12
    G3 = -wp[:, None] * gV13
    gWp += E1.T @ G1 + E2.T @ G2 + E3.T @ G3
    return loss, gWp, gWs, gWa, gWb


# ---------------------------------------------------------------------------
# numba path

@njit(cache=True)
def _mv_nb(e, W, out):
    # out = e @ W, accumulated in ascending input-index order
    rows, cols = W.shape
    for j in range(cols):
        out[j] = 0.0
    for i in range(rows):
        ei = e[i]
        for j in range(cols):
            out[j] += ei * W[i, j]


@njit(cache=True)
def _mvT_nb(g, W, out):
    # out = g @ W.T
    rows, cols = W.shape
    for i in range(rows):
        acc = 0.0
        for j in range(cols):
            acc += g[j] * W[i, j]
        out[i] = acc


@njit(cache=True)
def _outer_acc_nb(x, g, G):
    # G += outer(x, g)
    for i in range(x.shape[0]):
        xi = x[i]
        for j in range(g.shape[0]):
            G[i, j] += xi * g[j]


@njit(cache=True)
def _dist_nb(u, v, metric):
    n = u.shape[0]
    if metric == METRIC_COSINE:
        dot = 0.0
        uu = 0.0
        vv = 0.0
        for i in range(n):
            dot += u[i] * v[i]
            uu += u[i] * u[i]
            vv += v[i] * v[i]
        den = np.sqrt(uu * vv)
        if den < COS_EPS:
            den = COS_EPS
        s = dot / den
        if s > 1.0:
            s = 1.0
        elif s < -1.0:
            s = -1.0
        return 1.0 - s
    acc = 0.0
    for i in range(n):
        diff = u[i] - v[i]
        acc += diff * diff
    return np.sqrt(acc)


@njit(cache=True)
def _dist_bwd_nb(u, v, coef, metric, gu, gv):
    # writes coef · ∂dist/∂u into gu (and likewise gv); overwrites outputs
    n = u.shape[0]
    if metric == METRIC_COSINE:
        dot = 0.0
        uu = 0.0
        vv = 0.0
        for i in range(n):
            dot += u[i] * v[i]
            uu += u[i] * u[i]
            vv += v[i] * v[i]
        prod = np.sqrt(uu * vv)
        if prod <= COS_EPS:
            for i in range(n):
                gu[i] = 0.0
                gv[i] = 0.0
            return
        s = dot / prod
        for i in range(n):
            gu[i] = coef * (s * u[i] / uu - v[i] / prod)
            gv[i] = coef * (s * v[i] / vv - u[i] / prod)
        return
    acc = 0.0
    for i in range(n):
        diff = u[i] - v[i]
        acc += diff * diff
    r = np.sqrt(acc)
    if r == 0.0:
        for i in range(n):
            gu[i] = 0.0
            gv[i] = 0.0
        return
    for i in range(n):
        g = coef * (u[i] - v[i]) / r
        gu[i] = g
        gv[i] = -g


@njit(cache=True)
def _pair_fwd_nb(e, W_p, W_s, W_a, W_b, transform, hp, hs, a, b):
    _mv_nb(e, W_p, hp)
    _mv_nb(e, W_s, hs)
    if transform == TRANSFORM_P_TO_S:
        for i in range(hs.shape[0]):
            a[i] = hs[i]
        _mv_nb(hp, W_a, b)
    elif transform == TRANSFORM_S_TO_P:
        for i in range(hp.shape[0]):
            a[i] = hp[i]
        _mv_nb(hs, W_a, b)
    else:
        _mv_nb(hp, W_a, a)
        _mv_nb(hs, W_b, b)


@njit(cache=True)
def _imp_acc_nb(e, hp, hs, a, b, coef, transform, imp_metric, W_a, W_b,
                gWp, gWs, gWa, gWb, ga, gb, tmp):
    if coef == 0.0:
        return
    _dist_bwd_nb(a, b, coef, imp_metric, ga, gb)
    if transform == TRANSFORM_P_TO_S:
        _outer_acc_nb(e, ga, gWs)
        _outer_acc_nb(hp, gb, gWa)
        _mvT_nb(gb, W_a, tmp)
        _outer_acc_nb(e, tmp, gWp)
    elif transform == TRANSFORM_S_TO_P:
        _outer_acc_nb(e, ga, gWp)
        _outer_acc_nb(hs, gb, gWa)
        _mvT_nb(gb, W_a, tmp)
        _outer_acc_nb(e, tmp, gWs)
    else:
        _outer_acc_nb(hp, ga, gWa)
        _mvT_nb(ga, W_a, tmp)
        _outer_acc_nb(e, tmp, gWp)
        _outer_acc_nb(hs, gb, gWb)
        _mvT_nb(gb, W_b, tmp)
        _outer_acc_nb(e, tmp, gWs)


@njit(cache=True)
def _imp_scores_nb(E, W_p, W_s, W_a, W_b, transform, imp_metric, out):
    n = E.shape[0]
    l = W_p.shape[1]
    hp = np.empty(l)
    hs = np.empty(l)
    a = np.empty(l)
    b = np.empty(l)
    for i in range(n):
        _pair_fwd_nb(E[i], W_p, W_s, W_a, W_b, transform, hp, hs, a, b)
        out[i] = _dist_nb(a, b, imp_metric)


@njit(cache=True)
def _prag_distances_nb(EA, EB, W_p, prag_metric, out):
    n = EA.shape[0]
    l = W_p.shape[1]
    ha = np.empty(l)
    hb = np.empty(l)
    for i in range(n):
        _mv_nb(EA[i], W_p, ha)
        _mv_nb(EB[i], W_p, hb)
        out[i] = _dist_nb(ha, hb, prag_metric)


@njit(cache=True)
def _loss_and_grads_nb(E1, E2, E3, W_p, W_s, W_a, W_b, transform, imp_metric,
                       prag_metric, gamma1, gamma2, alpha,
                       gWp, gWs, gWa, gWb):
    n = E1.shape[0]
    l = W_p.shape[1]
    hp1 = np.empty(l); hs1 = np.empty(l); a1 = np.empty(l); b1 = np.empty(l)
    hp2 = np.empty(l); hs2 = np.empty(l); a2 = np.empty(l); b2 = np.empty(l)
    hp3 = np.empty(l); hs3 = np.empty(l); a3 = np.empty(l); b3 = np.empty(l)
    ga = np.empty(l); gb = np.empty(l); tmp = np.empty(l)
    loss = 0.0
    for i in range(n):
        e1 = E1[i]
        e2 = E2[i]
        e3 = E3[i]
        _pair_fwd_nb(e1, W_p, W_s, W_a, W_b, transform, hp1, hs1, a1, b1)
        _pair_fwd_nb(e2, W_p, W_s, W_a, W_b, transform, hp2, hs2, a2, b2)
        _pair_fwd_nb(e3, W_p, W_s, W_a, W_b, transform, hp3, hs3, a3, b3)
        i1 = _dist_nb(a1, b1, imp_metric)
        i2 = _dist_nb(a2, b2, imp_metric)
        i3 = _dist_nb(a3, b3, imp_metric)
        dp_pos = _dist_nb(hp1, hp2, prag_metric)
        dp_neg = _dist_nb(hp1, hp3, prag_metric)
        z12 = gamma1 - (i1 - i2)
        z13 = gamma1 - (i1 - i3)
        zp = gamma2 - (dp_neg - dp_pos)
        w12 = 1.0 if z12 > 0.0 else 0.0
        w13 = 1.0 if z13 > 0.0 else 0.0
        wp = alpha if zp > 0.0 else 0.0
        if z12 > 0.0:
            loss += z12
        if z13 > 0.0:
            loss += z13
        if zp > 0.0:
            loss += alpha * zp
        _imp_acc_nb(e1, hp1, hs1, a1, b1, -(w12 + w13), transform, imp_metric,
                    W_a, W_b, gWp, gWs, gWa, gWb, ga, gb, tmp)
        _imp_acc_nb(e2, hp2, hs2, a2, b2, w12, transform, imp_metric,
                    W_a, W_b, gWp, gWs, gWa, gWb, ga, gb, tmp)
        _imp_acc_nb(e3, hp3, hs3, a3, b3, w13, transform, imp_metric,
                    W_a, W_b, gWp, gWs, gWa, gWb, ga, gb, tmp)
        if wp != 0.0:
            _dist_bwd_nb(hp1, hp2, wp, prag_metric, ga, gb)
            _outer_acc_nb(e1, ga, gWp)
            _outer_acc_nb(e2, gb, gWp)
            _dist_bwd_nb(hp1, hp3, -wp, prag_metric, ga, gb)
            _outer_acc_nb(e1, ga, gWp)
            _outer_acc_nb(e3, gb, gWp)
    return loss


# ---------------------------------------------------------------------------
# dispatch

def _as_mat(x, name):
    arr = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if arr.ndim != 2:
        raise DimensionError(2, arr.ndim, f"rank of {name}")
    return arr


def imp_scores(E, W_p, W_s, W_a, W_b, transform, imp_metric):
    """Implicitness score for each row of E under the given weights."""
    E = _as_mat(E, "E")
    out = np.empty(E.shape[0])
    if _ACTIVE == "numba":
        _imp_scores_nb(E, W_p, W_s, W_a, W_b, transform, imp_metric, out)
        return out
    return _imp_scores_np(E, W_p, W_s, W_a, W_b, transform, imp_metric)


def prag_distances(EA, EB, W_p, prag_metric):
    """Pragmatic distance for each aligned row pair of EA and EB."""
    EA = _as_mat(EA, "EA")
    EB = _as_mat(EB, "EB")
    if EA.shape != EB.shape:
        raise DimensionError(EA.shape, EB.shape, "paired batch shapes")
    out = np.empty(EA.shape[0])
    if _ACTIVE == "numba":
        _prag_distances_nb(EA, EB, W_p, prag_metric, out)
        return out
    return _prag_distances_np(EA, EB, W_p, prag_metric)


def loss_and_grads(E1, E2, E3, W_p, W_s, W_a, W_b, transform, imp_metric,
                   prag_metric, gamma1, gamma2, alpha):
    """Summed batch loss and its gradients for the weight matrices.

    Returns (loss, gW_p, gW_s, gW_a, gW_b) where gW_b is meaningful only
    for the third-space transform (callers pass a dummy W_b otherwise).
    """
    E1 = _as_mat(E1, "E1")
    E2 = _as_mat(E2, "E2")
    E3 = _as_mat(E3, "E3")
    if E1.shape != E2.shape or E1.shape != E3.shape:
        raise DimensionError(E1.shape, (E2.shape, E3.shape), "triple batch shapes")
    if _ACTIVE == "numba":
        gWp = np.zeros_like(W_p)
        gWs = np.zeros_like(W_s)
        gWa = np.zeros_like(W_a)
        gWb = np.zeros_like(W_b)
        loss = _loss_and_grads_nb(E1, E2, E3, W_p, W_s, W_a, W_b, transform,
                                  imp_metric, prag_metric,
                                  float(gamma1), float(gamma2), float(alpha),
                                  gWp, gWs, gWa, gWb)
        return loss, gWp, gWs, gWa, gWb
    return _loss_and_grads_np(E1, E2, E3, W_p, W_s, W_a, W_b, transform,
                              imp_metric, prag_metric,
                              float(gamma1), float(gamma2), float(alpha))
