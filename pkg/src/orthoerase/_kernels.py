"""Batched inner loops: Gram-Schmidt over token positions and per-row erasure.

Two interchangeable implementations live here. The numba path compiles
plain loops with ``@njit``; the numpy path vectorises over the batch axis
and loops only over concepts. ``ORTHOERASE_NUMBA=0`` forces the numpy path,
which is also used when numba cannot be imported.

Erasure modes (``mode`` argument):

* ``MODE_PROJECT`` - full projection onto the orthogonal complement.
* ``MODE_ADAPTIVE`` - sigmoid-shifted erasure in target-vector coordinates.
* ``MODE_UNIT`` - the shifted formula evaluated with every shift equal to 1.
"""

from __future__ import annotations

import math
import os

import numpy as np

MODE_PROJECT = 0
MODE_ADAPTIVE = 1
MODE_UNIT = 2

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def _env_wants_numba() -> bool:
    flag = os.environ.get("ORTHOERASE_NUMBA", "1").strip().lower()
    return flag not in {"0", "false", "no", "off"}


# ---------------------------------------------------------------------------
# numpy path


def sigmoid_shift_np(cos, s, p, eps):
    """Vectorised ``s / (1 + exp(-p (cos - eps)))`` without overflow warnings."""
    x = p * (np.asarray(cos, dtype=np.float64) - eps)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = s / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = s * e / (1.0 + e)
    return out


def _row_cos_np(a, b, zero_tol):
    na = np.sqrt(np.einsum("...d,...d->...", a, a))
    nb = np.sqrt(np.einsum("...d,...d->...", b, b))
    dot = np.einsum("...d,...d->...", a, b)
    ok = (na >= zero_tol) & (nb >= zero_tol)
    denom = np.where(ok, na * nb, 1.0)
    return np.where(ok, np.clip(dot / denom, -1.0, 1.0), 0.0)


def mgs_batch_np(vectors, dep_tol):
    """Modified Gram-Schmidt with one re-orthogonalisation pass, batched.

    ``vectors`` has shape ``(P, n, d)``. Returns ``(basis, weights, fail_pos,
    fail_idx)`` where ``basis[p] = weights[p].T @ vectors[p]`` row-wise, i.e.
    ``vectors[p].T @ weights[p] == basis[p].T``. ``fail_pos`` is -1 on success.
    """
    P, n, d = vectors.shape
    Q = np.zeros((P, n, d))
    R = np.zeros((P, n, n))
    W = np.zeros((P, n, n))
    for k in range(n):
        u = vectors[:, k, :].copy()
        in_norm = np.sqrt(np.einsum("pd,pd->p", u, u))
        for _ in range(2):
            for i in range(k):
                r = np.einsum("pd,pd->p", Q[:, i, :], u)
                u -= r[:, None] * Q[:, i, :]
                R[:, i, k] += r
        rkk = np.sqrt(np.einsum("pd,pd->p", u, u))
        bad = rkk <= dep_tol * in_norm
        if bad.any():
            return Q, W, int(np.argmax(bad)), k
        Q[:, k, :] = u / rkk[:, None]
        R[:, k, k] = rkk
        col = -np.einsum("pi,pji->pj", R[:, :k, k], W[:, :, :k])
        col[:, k] += 1.0
        W[:, :, k] = col / rkk[:, None]
    return Q, W, -1, -1


def erase_multi_np(v, targets, basis, weights, mode, s, p, eps, zero_tol):
    """Erase ``n`` concepts from every row of ``v`` (shape ``(P, d)``)."""
    coords = np.einsum("pnd,pd->pn", basis, v)
    if mode == MODE_PROJECT:
        return v - np.einsum("pn,pnd->pd", coords, basis)
    coef = np.einsum("phk,pk->ph", weights, coords)
    if mode == MODE_ADAPTIVE:
        cos = _row_cos_np(targets, v[:, None, :], zero_tol)
        coef = coef * sigmoid_shift_np(cos, s, p, eps)
    return v - np.einsum("ph,phd->pd", coef, targets)


def erase_single_np(v, vt, mode, s, p, eps, zero_tol):
    """Erase one concept row-wise; rows whose target is (near) zero pass through."""
    tt = np.einsum("pd,pd->p", vt, vt)
    live = np.sqrt(tt) >= zero_tol
    coef = np.where(live, np.einsum("pd,pd->p", vt, v) / np.where(live, tt, 1.0), 0.0)
    if mode == MODE_ADAPTIVE:
        coef = coef * sigmoid_shift_np(_row_cos_np(vt, v, zero_tol), s, p, eps)
    return v - coef[:, None] * vt


# ---------------------------------------------------------------------------
# numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _sigmoid_shift_nb(c, s, p, eps):
        x = p * (c - eps)
        if x >= 0.0:
            return s / (1.0 + math.exp(-x))
        e = math.exp(x)
        return s * e / (1.0 + e)

    @njit(cache=True)
    def _cos_nb(a, b, zero_tol):
        dot = 0.0
        na = 0.0
        nb = 0.0
        for i in range(a.shape[0]):
            dot += a[i] * b[i]
            na += a[i] * a[i]
            nb += b[i] * b[i]
        na = math.sqrt(na)
        nb = math.sqrt(nb)
        if na < zero_tol or nb < zero_tol:
            return 0.0
        c = dot / (na * nb)
        if c > 1.0:
            return 1.0
        if c < -1.0:
            return -1.0
        return c

    @njit(cache=True)
    def mgs_batch_nb(vectors, dep_tol):
        P, n, d = vectors.shape
        Q = np.zeros((P, n, d))
        W = np.zeros((P, n, n))
        R = np.zeros((n, n))
        u = np.empty(d)
        for pos in range(P):
            R[:, :] = 0.0
            for k in range(n):
                in_norm = 0.0
                for t in range(d):
                    u[t] = vectors[pos, k, t]
                    in_norm += u[t] * u[t]
                in_norm = math.sqrt(in_norm)
                for _ in range(2):
                    for i in range(k):
                        r = 0.0
                        for t in range(d):
                            r += Q[pos, i, t] * u[t]
                        for t in range(d):
                            u[t] -= r * Q[pos, i, t]
                        R[i, k] += r
                rkk = 0.0
                for t in range(d):
                    rkk += u[t] * u[t]
                rkk = math.sqrt(rkk)
                if rkk <= dep_tol * in_norm:
                    return Q, W, pos, k
                for t in range(d):
                    Q[pos, k, t] = u[t] / rkk
                R[k, k] = rkk
                for j in range(k + 1):
                    acc = 1.0 if j == k else 0.0
                    for i in range(j, k):
                        acc -= R[i, k] * W[pos, j, i]
                    W[pos, j, k] = acc / rkk
        return Q, W, -1, -1

    @njit(cache=True)
    def erase_multi_nb(v, targets, basis, weights, mode, s, p, eps, zero_tol):
        P, n, d = basis.shape
        out = v.copy()
        coords = np.empty(n)
        for pos in range(P):
            for h in range(n):
                acc = 0.0
                for t in range(d):
                    acc += basis[pos, h, t] * v[pos, t]
                coords[h] = acc
            if mode == MODE_PROJECT:
                for h in range(n):
                    for t in range(d):
                        out[pos, t] -= coords[h] * basis[pos, h, t]
                continue
            for h in range(n):
                c = 0.0
                for k in range(n):
                    c += weights[pos, h, k] * coords[k]
                if mode == MODE_ADAPTIVE:
                    c *= _sigmoid_shift_nb(
                        _cos_nb(targets[pos, h], v[pos], zero_tol), s, p, eps
                    )
                for t in range(d):
                    out[pos, t] -= c * targets[pos, h, t]
        return out

    @njit(cache=True)
    def erase_single_nb(v, vt, mode, s, p, eps, zero_tol):
        P, d = v.shape
        out = v.copy()
        for pos in range(P):
            tt = 0.0
            tv = 0.0
            for t in range(d):
                tt += vt[pos, t] * vt[pos, t]
                tv += vt[pos, t] * v[pos, t]
            if math.sqrt(tt) < zero_tol:
                continue
            c = tv / tt
            if mode == MODE_ADAPTIVE:
                c *= _sigmoid_shift_nb(_cos_nb(vt[pos], v[pos], zero_tol), s, p, eps)
            for t in range(d):
                out[pos, t] -= c * vt[pos, t]
        return out


BACKENDS = {
    "numpy": (mgs_batch_np, erase_multi_np, erase_single_np),
}
if HAVE_NUMBA:
    BACKENDS["numba"] = (mgs_batch_nb, erase_multi_nb, erase_single_nb)

BACKEND = "numba" if HAVE_NUMBA and _env_wants_numba() else "numpy"
mgs_batch, erase_multi_rows, erase_single_rows = BACKENDS[BACKEND]
