"""Enumeration and propagation kernels.

Every kernel has a numba-compiled implementation and a pure-numpy
implementation with the same signature. The numba path is used unless numba
is missing or ``CAUSAL_IC_DISABLE_NUMBA`` is set to a truthy value.

Bit layout shared by all kernels: observed node ``i`` (0-based, topological
order) occupies bit ``n - 1 - i`` of an assignment index, so sorting indices
ascending sorts the bit strings ``v1 v2 ... vn`` ascending.
"""

import os

import numpy as np

_FLAG = "CAUSAL_IC_DISABLE_NUMBA"

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get(_FLAG, "").strip().lower() not in {
    "1",
    "true",
    "yes",
    "on",
}

# numpy fallback processes outcomes in blocks of this many rows
_BLOCK = 1 << 16


def _bits(indices, width):
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((indices[:, None] >> shifts[None, :]) & 1).astype(bool)


# ---------------------------------------------------------------------------
# hidden-state enumeration: P(v) = sum_u P(u) prod_i P(v_i | pa)
# ---------------------------------------------------------------------------


def joint_numpy(indptr, parents, one_minus_p, one_minus_q, r):
    """Exact observed joint by enumerating hidden states (numpy path).

    ``indptr``/``parents``/``one_minus_p`` hold the observed parents of each
    node in CSR form; ``one_minus_q`` is the dense ``(m, n)`` matrix of
    ``1 - q`` (1 where no edge) and ``r`` the hidden activation probabilities.
    """
    m, n = one_minus_q.shape
    nv = 1 << n
    out = np.zeros(nv)
    hidden_bits = _bits(np.arange(1 << m, dtype=np.int64), m)
    prior = np.prod(np.where(hidden_bits, r[None, :], 1.0 - r[None, :]), axis=1)
    hq = np.prod(np.where(hidden_bits[:, :, None], one_minus_q[None, :, :], 1.0), axis=1)
    for start in range(0, nv, _BLOCK):
        v = np.arange(start, min(nv, start + _BLOCK), dtype=np.int64)
        vb = _bits(v, n)
        obs = np.ones((len(v), n))
        for i in range(n):
            for e in range(indptr[i], indptr[i + 1]):
                obs[:, i] *= np.where(vb[:, parents[e]], one_minus_p[e], 1.0)
        # Neumaier compensated sum over hidden states, same order as numba
        acc = np.zeros(len(v))
        comp = np.zeros(len(v))
        for u in range(1 << m):
            if prior[u] == 0.0:
                continue
            stay = hq[u][None, :] * obs
            term = prior[u] * np.prod(np.where(vb, 1.0 - stay, stay), axis=1)
            t = acc + term
            comp += np.where(np.abs(acc) >= np.abs(term), (acc - t) + term, (term - t) + acc)
            acc = t
        out[start : start + len(v)] = acc + comp
    return out


def _joint_numba_impl(indptr, parents, one_minus_p, one_minus_q, r):
    m = one_minus_q.shape[0]
    n = one_minus_q.shape[1]
    nu = 1 << m
    # per hidden state: its prior weight and each node's "not reached" factor
    w = np.empty(nu)
    hq = np.ones((nu, n))
    for u in range(nu):
        wu = 1.0
        for k in range(m):
            if (u >> (m - 1 - k)) & 1:
                wu *= r[k]
                for i in range(n):
                    hq[u, i] *= one_minus_q[k, i]
            else:
                wu *= 1.0 - r[k]
        w[u] = wu
    out = np.zeros(1 << n)
    obs = np.empty(n)
    for v in range(1 << n):
        for i in range(n):
            stay = 1.0
            for e in range(indptr[i], indptr[i + 1]):
                if (v >> (n - 1 - parents[e])) & 1:
                    stay *= one_minus_p[e]
            obs[i] = stay
        # Neumaier compensated sum over hidden states
        total = 0.0
        comp = 0.0
        for u in range(nu):
            pr = w[u]
            if pr == 0.0:
                continue
            for i in range(n):
                stay = hq[u, i] * obs[i]
                if (v >> (n - 1 - i)) & 1:
                    pr *= 1.0 - stay
                else:
                    pr *= stay
                if pr == 0.0:
                    break
            t = total + pr
            if abs(total) >= abs(pr):
                comp += (total - t) + pr
            else:
                comp += (pr - t) + total
            total = t
        out[v] = total + comp
    return out


# ---------------------------------------------------------------------------
# live-edge enumeration
# ---------------------------------------------------------------------------


def live_edge_numpy(n, r, uv_src, uv_dst, uv_q, vv_src, vv_dst, vv_p, seed_mask):
    """Distribution of the final active set over all live-edge outcomes.

    Outcome bits are ordered hidden nodes, then hidden->observed edges, then
    observed->observed edges, most significant first.
    """
    m, e_uv, e_vv = len(r), len(uv_q), len(vv_p)
    width = m + e_uv + e_vv
    probs = np.concatenate([r, uv_q, vv_p])
    node_bit = np.int64(1) << (n - 1 - np.arange(n, dtype=np.int64))
    out = np.zeros(1 << n)
    total = 1 << width
    for start in range(0, total, _BLOCK):
        o = np.arange(start, min(total, start + _BLOCK), dtype=np.int64)
        b = _bits(o, width)
        w = np.prod(np.where(b, probs[None, :], 1.0 - probs[None, :]), axis=1)
        hidden = b[:, :m]
        uv_live = b[:, m : m + e_uv]
        vv_live = b[:, m + e_uv :]
        mask = np.full(len(o), seed_mask, dtype=np.int64)
        for e in range(e_uv):
            hit = hidden[:, uv_src[e]] & uv_live[:, e]
            mask |= np.where(hit, node_bit[uv_dst[e]], 0)
        for _ in range(n):
            before = mask
            for e in range(e_vv):
                hit = ((mask & node_bit[vv_src[e]]) != 0) & vv_live[:, e]
                mask = mask | np.where(hit, node_bit[vv_dst[e]], 0)
            if np.array_equal(before, mask):
                break
        out += np.bincount(mask, weights=w, minlength=1 << n)
    return out


def _live_edge_numba_impl(n, r, uv_src, uv_dst, uv_q, vv_src, vv_dst, vv_p, seed_mask):
    m = r.shape[0]
    e_uv = uv_q.shape[0]
    e_vv = vv_p.shape[0]
    width = m + e_uv + e_vv
    probs = np.empty(width)
    probs[:m] = r
    probs[m : m + e_uv] = uv_q
    probs[m + e_uv :] = vv_p
    out = np.zeros(1 << n)
    comp = np.zeros(1 << n)
    live = np.zeros(width, dtype=np.bool_)
    for o in range(1 << width):
        w = 1.0
        for k in range(width):
            bit = (o >> (width - 1 - k)) & 1
            live[k] = bit == 1
            if bit:
                w *= probs[k]
            else:
                w *= 1.0 - probs[k]
        if w == 0.0:
            continue
        mask = seed_mask
        for e in range(e_uv):
            if live[uv_src[e]] and live[m + e]:
                mask |= np.int64(1) << (n - 1 - uv_dst[e])
        changed = True
        while changed:
            changed = False
            for e in range(e_vv):
                if live[m + e_uv + e]:
                    sb = np.int64(1) << (n - 1 - vv_src[e])
                    db = np.int64(1) << (n - 1 - vv_dst[e])
                    if (mask & sb) != 0 and (mask & db) == 0:
                        mask |= db
                        changed = True
        s = out[mask]
        t = s + w
        if abs(s) >= abs(w):
            comp[mask] += (s - t) + w
        else:
            comp[mask] += (w - t) + s
        out[mask] = t
    return out + comp


# ---------------------------------------------------------------------------
# propagation of sampled live-edge outcomes
# ---------------------------------------------------------------------------


def propagate_numpy(n, hidden, uv_live, vv_live, uv_src, uv_dst, vv_src, vv_dst, seeds):
    """Final active mask for each sampled row of live-edge outcomes."""
    rows = hidden.shape[0]
    active = np.zeros((rows, n), dtype=bool)
    active[:, seeds] = True
    for e in range(len(uv_src)):
        active[:, uv_dst[e]] |= hidden[:, uv_src[e]] & uv_live[:, e]
    for _ in range(n):
        before = active.copy()
        for e in range(len(vv_src)):
            active[:, vv_dst[e]] |= active[:, vv_src[e]] & vv_live[:, e]
        if np.array_equal(before, active):
            break
    weights = np.int64(1) << (n - 1 - np.arange(n, dtype=np.int64))
    return active.astype(np.int64) @ weights


def _propagate_numba_impl(n, hidden, uv_live, vv_live, uv_src, uv_dst, vv_src, vv_dst, seeds):
    rows = hidden.shape[0]
    out = np.empty(rows, dtype=np.int64)
    seed_mask = np.int64(0)
    for s in seeds:
        seed_mask |= np.int64(1) << (n - 1 - s)
    n_uv = uv_src.shape[0]
    n_vv = vv_src.shape[0]
    one = np.int64(1)
    dst_uv = np.empty(n_uv, dtype=np.int64)
    for e in range(n_uv):
        dst_uv[e] = one << (n - 1 - uv_dst[e])
    src_vv = np.empty(n_vv, dtype=np.int64)
    dst_vv = np.empty(n_vv, dtype=np.int64)
    for e in range(n_vv):
        src_vv[e] = one << (n - 1 - vv_src[e])
        dst_vv[e] = one << (n - 1 - vv_dst[e])
    for row in range(rows):
        mask = seed_mask
        # branch-free updates: live flags are coin flips, so branches mispredict
        for e in range(n_uv):
            mask |= dst_uv[e] * np.int64(hidden[row, uv_src[e]] & uv_live[row, e])
        before = np.int64(-1)
        while mask != before:
            before = mask
            for e in range(n_vv):
                mask |= dst_vv[e] * np.int64(vv_live[row, e] & ((mask & src_vv[e]) != 0))
        out[row] = mask
    return out


if HAVE_NUMBA:
    joint_numba = njit(cache=True)(_joint_numba_impl)
    live_edge_numba = njit(cache=True)(_live_edge_numba_impl)
    propagate_numba = njit(cache=True)(_propagate_numba_impl)
else:  # pragma: no cover
    joint_numba = _joint_numba_impl
    live_edge_numba = _live_edge_numba_impl
    propagate_numba = _propagate_numba_impl


def backend():
    """Name of the active kernel backend."""
    return "numba" if USE_NUMBA else "numpy"


def joint(*args):
    return joint_numba(*args) if USE_NUMBA else joint_numpy(*args)


def live_edge(*args):
    return live_edge_numba(*args) if USE_NUMBA else live_edge_numpy(*args)


def propagate(*args):
    return propagate_numba(*args) if USE_NUMBA else propagate_numpy(*args)
