"""Union-find sweeps over the value levels of a grid function."""

from __future__ import annotations

import numpy as np


def _edges(shape, connectivity):
    ny, nx = shape
    idx = np.arange(ny * nx).reshape(shape)
    pairs = [(idx[:, :-1], idx[:, 1:]), (idx[:-1, :], idx[1:, :])]
    if connectivity == 8:
        pairs += [(idx[:-1, :-1], idx[1:, 1:]), (idx[:-1, 1:], idx[1:, :-1])]
    a = np.concatenate([p.ravel() for p, _ in pairs])
    b = np.concatenate([q.ravel() for _, q in pairs])
    return a, b


def superlevel_counts(values: np.ndarray, connectivity: int = 4):
    """Number of components of ``{v >= u}`` for every distinct value ``u``.

    Returns ``(u, counts)`` with ``u`` ascending.  Cells join at their own value
    and an edge joins at the smaller of its two endpoint values (Kruskal order).
    """
    v = np.asarray(values, dtype=float)
    flat = v.ravel()
    a, b = _edges(v.shape, connectivity)
    w = np.minimum(flat[a], flat[b])
    order = np.argsort(-w, kind="stable")
    a, b, w = a[order].tolist(), b[order].tolist(), w[order]

    u = np.unique(flat)
    cells_at_least = flat.size - np.searchsorted(np.sort(flat), u, side="left")

    parent = list(range(flat.size))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    # merges[k] = successful unions among edges with weight >= u[k]
    merged_flags = np.zeros(len(a), dtype=bool)
    for e in range(len(a)):
        ra, rb = find(a[e]), find(b[e])
        if ra != rb:
            parent[ra] = rb
            merged_flags[e] = True
    cum = np.concatenate([[0], np.cumsum(merged_flags)])
    # edges with weight >= u[k] are a prefix of the descending order
    n_ge = np.searchsorted(-w, -u, side="right")
    merges = cum[n_ge]
    return u, cells_at_least - merges


def is_monotone_values(values: np.ndarray) -> bool:
    """Every superlevel and sublevel set is indecomposable.

    Bounded level sets are judged with 4-connectivity and the unbounded ones,
    which contain the zero exterior, with 8-connectivity.
    """
    v = np.asarray(values, dtype=float)
    for g in (v, -v):
        if not (g > 0).any():
            continue
        u, c = superlevel_counts(g, 4)
        if np.any(c[u > 0] != 1):
            return False
        padded = np.pad(g, 1)
        # {g <= w} for w >= 0 below the max, including the exterior ring
        u2, c2 = superlevel_counts(-padded, 8)
        w = -u2
        sel = (w >= 0) & (w < g.max())
        if np.any(c2[sel] != 1):
            return False
    return True
