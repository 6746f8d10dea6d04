"""Hot geometric kernels with numba and pure-numpy implementations.

Every public kernel is bound at import time to the numba version unless
``GIBBSBALLS_NO_NUMBA`` is set (see :mod:`gibbsballs._accel`).  Both paths
return identical results; ``tests/test_kernels.py`` checks this and
``benchmarks/bench_kernels.py`` times them against each other.

Balls are closed: two balls touch when ``|x - y|^2 <= (r + s)^2``.
"""
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ._accel import USE_NUMBA, njit

# --------------------------------------------------------------------------
# numba implementations


@njit
def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@njit
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return
    if ra < rb:
        parent[rb] = ra
    else:
        parent[ra] = rb


@njit
def _touch(c, r, i, C, R, j):
    s = 0.0
    for k in range(c.shape[1]):
        t = c[i, k] - C[j, k]
        s += t * t
    rr = r[i] + R[j]
    return s <= rr * rr


@njit
def _labels_nb(c, r):
    n = c.shape[0]
    parent = np.arange(n)
    for i in range(n):
        for j in range(i + 1, n):
            if _touch(c, r, i, c, r, j):
                _union(parent, i, j)
    labels = np.empty(n, dtype=np.int64)
    remap = np.full(n, -1, dtype=np.int64)
    nxt = 0
    for i in range(n):
        root = _find(parent, i)
        if remap[root] < 0:
            remap[root] = nxt
            nxt += 1
        labels[i] = remap[root]
    return labels


@njit
def _touch_any_nb(c, r, C, R):
    n = c.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        for j in range(C.shape[0]):
            if _touch(c, r, i, C, R, j):
                out[i] = True
                break
    return out


@njit
def _touch_count_nb(c, r, C, R):
    n = c.shape[0]
    out = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for j in range(C.shape[0]):
            if _touch(c, r, i, C, R, j):
                out[i] += 1
    return out


@njit
def _cross_touch_nb(c, r, C, R):
    out = np.zeros((c.shape[0], C.shape[0]), dtype=np.bool_)
    for i in range(c.shape[0]):
        for j in range(C.shape[0]):
            out[i, j] = _touch(c, r, i, C, R, j)
    return out


@njit
def _pair_count_nb(c, r):
    cnt = 0
    for i in range(c.shape[0]):
        for j in range(i + 1, c.shape[0]):
            if _touch(c, r, i, c, r, j):
                cnt += 1
    return cnt


@njit
def _bit_length(x):
    n = 0
    while x:
        x >>= 1
        n += 1
    return n


@njit
def _key_less_nb(A, b):
    n, m = A.shape
    out = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        best = -1
        bj = -1
        for j in range(m):
            x = A[i, j] ^ b[j]
            if x:
                pos = (_bit_length(x) - 1) * m + j
                if pos > best:
                    best = pos
                    bj = j
        if bj >= 0:
            out[i] = A[i, bj] < b[bj]
    return out


@njit
def _first_spanning_nb(c, r, order, lo_edge, hi_edge):
    n = c.shape[0]
    left = n
    right = n + 1
    parent = np.arange(n + 2)
    for pos in range(order.shape[0]):
        i = order[pos]
        if c[i, 0] - r[i] <= lo_edge:
            _union(parent, i, left)
        if c[i, 0] + r[i] >= hi_edge:
            _union(parent, i, right)
        for q in range(pos):
            j = order[q]
            if _touch(c, r, i, c, r, j):
                _union(parent, i, j)
        if _find(parent, left) == _find(parent, right):
            return pos
    return -1


# --------------------------------------------------------------------------
# numpy implementations


def _sqdist(c, C):
    diff = c[:, None, :] - C[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _cross_touch_np(c, r, C, R):
    if len(c) == 0 or len(C) == 0:
        return np.zeros((len(c), len(C)), dtype=bool)
    rr = r[:, None] + R[None, :]
    return _sqdist(c, C) <= rr * rr


def _labels_np(c, r):
    n = len(c)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    adj = np.triu(_cross_touch_np(c, r, c, r), k=1)
    i, j = np.nonzero(adj)
    graph = coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n))
    _, raw = connected_components(graph, directed=False)
    # relabel by first appearance so both paths agree
    _, first = np.unique(raw, return_index=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(np.argsort(first))] = np.arange(len(first))
    return rank[raw].astype(np.int64)


def _touch_any_np(c, r, C, R):
    return _cross_touch_np(c, r, C, R).any(axis=1)


def _touch_count_np(c, r, C, R):
    return _cross_touch_np(c, r, C, R).sum(axis=1).astype(np.int64)


def _pair_count_np(c, r):
    return int(np.triu(_cross_touch_np(c, r, c, r), k=1).sum())


def _key_less_np(A, b):
    m = A.shape[1]
    less = np.zeros(len(A), dtype=bool)
    decided = np.zeros(len(A), dtype=bool)
    top = max(int(A.max(initial=0)).bit_length(), int(max(b.max(initial=0), 0)).bit_length())
    for p in range(top - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            ab = (A[:, j] >> p) & 1
            bb = (int(b[j]) >> p) & 1
            diff = (ab != bb) & ~decided
            less[diff] = ab[diff] < bb
            decided |= diff
        if decided.all():
            break
    return less


def _spans_np(c, r, idx, lo_edge, hi_edge):
    lab = _labels_np(c[idx], r[idx])
    touches_lo = c[idx, 0] - r[idx] <= lo_edge
    touches_hi = c[idx, 0] + r[idx] >= hi_edge
    return np.intersect1d(lab[touches_lo], lab[touches_hi]).size > 0


def _first_spanning_np(c, r, order, lo_edge, hi_edge):
    # spanning is monotone in the prefix length, so bisect on it
    n = len(order)
    if n == 0 or not _spans_np(c, r, order, lo_edge, hi_edge):
        return -1
    lo, hi = 0, n - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _spans_np(c, r, order[: mid + 1], lo_edge, hi_edge):
            hi = mid
        else:
            lo = mid + 1
    return lo


# --------------------------------------------------------------------------
# dispatch

if USE_NUMBA:
    _labels, _touch_any, _touch_count = _labels_nb, _touch_any_nb, _touch_count_nb
    _cross_touch, _pair_count, _key_less = _cross_touch_nb, _pair_count_nb, _key_less_nb
    _first_spanning = _first_spanning_nb
else:
    _labels, _touch_any, _touch_count = _labels_np, _touch_any_np, _touch_count_np
    _cross_touch, _pair_count, _key_less = _cross_touch_np, _pair_count_np, _key_less_np
    _first_spanning = _first_spanning_np


def _f(a, ndim):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if ndim == 2 and a.ndim == 1:
        a = a.reshape(-1, 1)
    return a


def component_labels(centers, radii):
    """Gilbert-graph component label per ball, numbered by first appearance."""
    return _labels(_f(centers, 2), _f(radii, 1))


def touch_any(centers, radii, other_centers, other_radii):
    """For each ball, whether it touches at least one ball of the other set."""
    return _touch_any(_f(centers, 2), _f(radii, 1), _f(other_centers, 2), _f(other_radii, 1))


def touch_count(centers, radii, other_centers, other_radii):
    return _touch_count(_f(centers, 2), _f(radii, 1), _f(other_centers, 2), _f(other_radii, 1))


def cross_touch(centers, radii, other_centers, other_radii):
    """Boolean (n, m) matrix of touching pairs between two ball sets."""
    return _cross_touch(_f(centers, 2), _f(radii, 1), _f(other_centers, 2), _f(other_radii, 1))


def pair_touch_count(centers, radii):
    """Number of unordered touching pairs within one ball set."""
    return int(_pair_count(_f(centers, 2), _f(radii, 1)))


def key_less(coords, bound):
    """Interleaved-key comparison ``key(coords[i]) < key(bound)`` without big ints.

    ``coords`` is an (n, m) int64 array of fixed-point components; the most
    significant differing interleaved bit decides, component ``m-1`` being
    the most significant within one power of two.
    """
    A = np.ascontiguousarray(coords, dtype=np.int64)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    return _key_less(A, np.ascontiguousarray(bound, dtype=np.int64))


def first_spanning(centers, radii, order, lo_edge, hi_edge):
    """Index into ``order`` at which the balls added so far first join the
    slab faces ``x0 = lo_edge`` and ``x0 = hi_edge``; -1 if never."""
    return int(_first_spanning(_f(centers, 2), _f(radii, 1),
                               np.ascontiguousarray(order, dtype=np.int64),
                               float(lo_edge), float(hi_edge)))
