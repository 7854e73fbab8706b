"""Essential level sets traced as closed oriented polylines.

Tracing runs marching squares on the zero-padded grid, so every curve closes.
Crossing points sit on primal edges (segments joining two cell centers) and are
placed by linear interpolation.  Inside a square each maximal run of corners
above the level produces one segment, which keeps diagonal high corners apart.
That matches the foreground-4 / background-8 convention of :mod:`region`, so
curves and region components agree one to one.

Segments run from the edge where the run is left to the edge where it is
entered, counterclockwise around the square.  This puts ``{f > t}`` on the
left of travel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StreamdecError
from .field import ScalarField, breakpoints, gradient

FLOOR_REL = 1e-10


@dataclass(frozen=True, eq=False)
class LevelCurve:
    level: float
    vertices: np.ndarray
    arclength: float
    grad_mid: np.ndarray
    edge_ids: np.ndarray | None = None
    times: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.vertices)

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    def segment_lengths(self) -> np.ndarray:
        a, b = self.segments()
        return np.hypot(*(b - a).T)

    def midpoints(self) -> np.ndarray:
        a, b = self.segments()
        return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# level selection

def regular_levels(f: ScalarField, n: int) -> list[float]:
    """``n`` evenly spread targets, each moved to the midpoint of the value gap holding it.

    Levels never equal a sample (or the exterior value 0).  Targets landing in
    the same gap collapse to one level, so fewer than ``n`` can come back.
    """
    if n < 1:
        raise StreamdecError("n must be at least 1")
    u = breakpoints(f)
    if len(u) < 2:
        raise StreamdecError("constant field")
    lo, hi = u[0], u[-1]
    targets = lo + (np.arange(n) + 0.5) * (hi - lo) / n
    k = np.clip(np.searchsorted(u, targets, side="right") - 1, 0, len(u) - 2)
    mids = 0.5 * (u[k] + u[k + 1])
    return [float(x) for x in np.unique(mids)]


def is_regular_level(f: ScalarField, t: float) -> bool:
    return bool(t != 0.0 and not np.any(f.values == t))


# ---------------------------------------------------------------------------
# marching squares

def _case_table():
    table = []
    for code in range(16):
        hi = [(code >> k) & 1 for k in range(4)]
        segs = []
        if 0 < sum(hi) < 4:
            for a in range(4):
                if hi[a] and not hi[a - 1]:
                    b = a
                    while hi[(b + 1) % 4]:
                        b = (b + 1) % 4
                    segs.append((b, (a - 1) % 4))
        table.append(segs)
    return table


_CASES = _case_table()


def _padded_frame(f: ScalarField):
    p = np.pad(f.values, 1)
    x0 = f.origin[0] - f.h
    y0 = f.origin[1] - f.h
    return p, x0, y0


def _segments(f: ScalarField, t: float):
    """Oriented segments as ``(start_edge, end_edge)`` id arrays, plus a point lookup."""
    p, x0, y0 = _padded_frame(f)
    NY, NX = p.shape
    nh = NY * (NX - 1)
    hi = p > t
    c0, c1, c2, c3 = hi[:-1, :-1], hi[:-1, 1:], hi[1:, 1:], hi[1:, :-1]
    code = c0 * 1 + c1 * 2 + c2 * 4 + c3 * 8
    jj, ii = np.nonzero((code > 0) & (code < 15))
    codes = code[jj, ii]
    edge_of = np.stack([
        jj * (NX - 1) + ii,              # bottom
        nh + jj * NX + ii + 1,           # right
        (jj + 1) * (NX - 1) + ii,        # top
        nh + jj * NX + ii,               # left
    ], axis=1)
    starts, ends = [], []
    for c in range(1, 15):
        sel = codes == c
        if not sel.any():
            continue
        for a, b in _CASES[c]:
            starts.append(edge_of[sel, a])
            ends.append(edge_of[sel, b])
    if not starts:
        return np.zeros(0, int), np.zeros(0, int), None
    start = np.concatenate(starts)
    end = np.concatenate(ends)

    def points(ids):
        ids = np.asarray(ids)
        out = np.empty((len(ids), 2))
        horiz = ids < nh
        j, i = np.divmod(ids[horiz], NX - 1)
        a, b = p[j, i], p[j, i + 1]
        s = (t - a) / (b - a)
        out[horiz, 0] = x0 + (i + s) * f.h
        out[horiz, 1] = y0 + j * f.h
        j, i = np.divmod(ids[~horiz] - nh, NX)
        a, b = p[j, i], p[j + 1, i]
        s = (t - a) / (b - a)
        out[~horiz, 0] = x0 + i * f.h
        out[~horiz, 1] = y0 + (j + s) * f.h
        return out

    return start, end, points


def crossing_edge_ids(f: ScalarField, t: float) -> np.ndarray:
    """Ids of primal edges whose endpoints lie on opposite sides of ``t``, sorted."""
    start, _, _ = _segments(f, t)
    return np.sort(start)


def trace_essential_level(f: ScalarField, t: float) -> list[LevelCurve]:
    """Closed simple polylines bounding ``{f > t}``, superlevel on the left.

    Curves are ordered by their leftmost-lowest vertex, and each starts there.
    """
    if not is_regular_level(f, t):
        raise StreamdecError(f"non-regular level {t!r}: equals a sample value")
    start, end, points = _segments(f, t)
    if len(start) == 0:
        return []
    order = np.argsort(start)
    start, end = start[order], end[order]
    nxt = np.searchsorted(start, end)
    if not np.array_equal(start[nxt], end):
        raise StreamdecError("open contour: inconsistent segment chain")
    gx, gy = gradient(f)
    gnorm = np.pad(np.hypot(gx, gy), 1)
    seen = np.zeros(len(start), dtype=bool)
    nxt_list = nxt.tolist()
    curves = []
    for k0 in range(len(start)):
        if seen[k0]:
            continue
        cyc = [k0]
        seen[k0] = True
        k = nxt_list[k0]
        while k != k0:
            cyc.append(k)
            seen[k] = True
            k = nxt_list[k]
        ids = start[cyc]
        verts = points(ids)
        lead = np.lexsort((verts[:, 1], verts[:, 0]))[0]
        verts = np.roll(verts, -lead, axis=0)
        ids = np.roll(ids, -lead)
        curves.append(_make_curve(f, t, verts, gnorm, ids))
    curves.sort(key=lambda c: (c.vertices[0, 0], c.vertices[0, 1]))
    return curves


def _make_curve(f, t, verts, gnorm_padded, ids=None, times=None) -> LevelCurve:
    nxt = np.roll(verts, -1, axis=0)
    length = float(np.hypot(*(nxt - verts).T).sum())
    mids = 0.5 * (verts + nxt)
    g = _bilinear_padded(f, gnorm_padded, mids)
    return LevelCurve(float(t), verts, length, g, ids, times)


def _bilinear_padded(f: ScalarField, arr_padded: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of an array given on the padded cell-center lattice."""
    u = (pts[:, 0] - f.origin[0]) / f.h + 1.0
    v = (pts[:, 1] - f.origin[1]) / f.h + 1.0
    NY, NX = arr_padded.shape
    i = np.clip(np.floor(u).astype(int), 0, NX - 2)
    j = np.clip(np.floor(v).astype(int), 0, NY - 2)
    s, r = u - i, v - j
    a = arr_padded
    return ((1 - s) * (1 - r) * a[j, i] + s * (1 - r) * a[j, i + 1]
            + (1 - s) * r * a[j + 1, i] + s * r * a[j + 1, i + 1])


def interpolate(f: ScalarField, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of cell-center ``values`` (zero outside) at points."""
    return _bilinear_padded(f, np.pad(np.asarray(values, dtype=float), 1), np.asarray(pts))


def level_lengths(f: ScalarField, levels) -> list[float]:
    """Total traced length of ``{f = t}`` for each level."""
    return [float(sum(c.arclength for c in trace_essential_level(f, t))) for t in levels]


# ---------------------------------------------------------------------------
# simplicity

def _segments_intersect(p1, p2, q1, q2):
    def orient(a, b, c):
        return np.sign((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                       - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))

    def on_seg(a, b, c):
        return ((np.minimum(a[..., 0], b[..., 0]) <= c[..., 0]) & (c[..., 0] <= np.maximum(a[..., 0], b[..., 0]))
                & (np.minimum(a[..., 1], b[..., 1]) <= c[..., 1]) & (c[..., 1] <= np.maximum(a[..., 1], b[..., 1])))

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)
    touch = (((d1 == 0) & on_seg(q1, q2, p1)) | ((d2 == 0) & on_seg(q1, q2, p2))
             | ((d3 == 0) & on_seg(p1, p2, q1)) | ((d4 == 0) & on_seg(p1, p2, q2)))
    return proper | touch


def is_simple_polyline(vertices: np.ndarray) -> bool:
    """No two non-adjacent segments of the closed polyline meet.

    Segments are hashed into square buckets of side at least the longest
    segment; only pairs sharing or neighbouring a bucket are tested.
    """
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    if n < 3:
        return False
    a, b = v, np.roll(v, -1, axis=0)
    if np.any(np.all(a == b, axis=1)):
        return False
    size = max(float(np.hypot(*(b - a).T).max()), 1e-300)
    mid = 0.5 * (a + b)
    cell = np.floor((mid - mid.min(axis=0)) / size).astype(np.int64)
    key = cell[:, 0] * (cell[:, 1].max() + 3) + cell[:, 1]
    width = cell[:, 1].max() + 3
    order = np.argsort(key, kind="stable")
    skey = key[order]
    pi, pj = [], []
    for dx in (0, 1):
        for dy in (-1, 0, 1):
            if dx == 0 and dy < 0:
                continue
            target = key + dx * width + dy
            lo = np.searchsorted(skey, target, side="left")
            hi = np.searchsorted(skey, target, side="right")
            cnt = hi - lo
            if cnt.sum() == 0:
                continue
            src = np.repeat(np.arange(n), cnt)
            offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            dst = order[np.repeat(lo, cnt) + offs]
            pi.append(src)
            pj.append(dst)
    i = np.concatenate(pi)
    j = np.concatenate(pj)
    keep = i < j
    i, j = i[keep], j[keep]
    adjacent = (j == i + 1) | ((i == 0) & (j == n - 1))
    i, j = i[~adjacent], j[~adjacent]
    if len(i) == 0:
        return True
    return not bool(np.any(_segments_intersect(a[i], b[i], a[j], b[j])))


# ---------------------------------------------------------------------------
# geometry along a curve

def gradient_floor(f: ScalarField) -> float:
    gx, gy = gradient(f)
    return FLOOR_REL * float(np.hypot(gx, gy).max())


@dataclass(frozen=True)
class TangentNormalReport:
    rms_angle: float
    max_angle: float
    n_segments: int
    n_excluded: int
    orientation_ok: bool

    def as_dict(self):
        return dict(self.__dict__)


def check_tangent_normal(f: ScalarField, c: LevelCurve) -> TangentNormalReport:
    """Angle between each rotated segment tangent and the interpolated ``grad f / |grad f|``."""
    a, b = c.segments()
    d = b - a
    normal = np.stack([-d[:, 1], d[:, 0]], axis=1)
    normal /= np.hypot(*normal.T)[:, None]
    gx, gy = gradient(f)
    mids = c.midpoints()
    g = np.stack([interpolate(f, gx, mids), interpolate(f, gy, mids)], axis=1)
    gn = np.hypot(*g.T)
    ok = gn > gradient_floor(f)
    cos = np.clip(np.sum(normal[ok] * g[ok], axis=1) / gn[ok], -1.0, 1.0)
    ang = np.arccos(cos)
    return TangentNormalReport(
        rms_angle=float(np.sqrt(np.mean(ang**2))) if ang.size else 0.0,
        max_angle=float(ang.max()) if ang.size else 0.0,
        n_segments=c.n,
        n_excluded=int((~ok).sum()),
        orientation_ok=bool(np.all(cos > 0)),
    )


@dataclass(frozen=True, eq=False)
class CurveWeight:
    """Travel time ``a_j = |segment| / |grad f|(midpoint)`` per segment."""

    a: np.ndarray
    total: float
    floor: float
    n_floored: int

    def as_dict(self):
        return {"total": self.total, "floor": self.floor, "n_floored": self.n_floored,
                "n_segments": int(len(self.a))}


def curve_weight(f: ScalarField, c: LevelCurve) -> CurveWeight:
    floor = gradient_floor(f)
    g = c.grad_mid
    a = c.segment_lengths() / np.maximum(g, floor)
    return CurveWeight(a, float(a.sum()), floor, int((g < floor).sum()))


def hamiltonian_parametrization(f: ScalarField, c: LevelCurve, n_nodes: int | None = None) -> LevelCurve:
    """Resample ``c`` at equal steps of travel time, keeping its orientation.

    ``times`` holds the node times.  The node speed ``|step| / dt`` then
    approximates ``|grad f|``.  With ``v = (-f_y, f_x)`` the flow of ``v``
    visits the nodes in reverse order, because the superlevel lies on the left.
    """
    w = curve_weight(f, c)
    if w.n_floored:
        bad = np.flatnonzero(c.grad_mid < w.floor).tolist()
        raise StreamdecError(f"gradient floor hit on segments {bad}")
    m = c.n if n_nodes is None else int(n_nodes)
    cum = np.concatenate([[0.0], np.cumsum(w.a)])
    tau = np.arange(m) * (w.total / m)
    j = np.clip(np.searchsorted(cum, tau, side="right") - 1, 0, c.n - 1)
    frac = (tau - cum[j]) / w.a[j]
    a, b = c.segments()
    verts = a[j] + frac[:, None] * (b[j] - a[j])
    gx, gy = gradient(f)
    out = _make_curve(f, c.level, verts, np.pad(np.hypot(gx, gy), 1), None,
                      np.concatenate([tau, [w.total]]))
    return out


def node_speeds(c: LevelCurve) -> np.ndarray:
    """``|gamma(t_{k+1}) - gamma(t_k)| / (t_{k+1} - t_k)`` along a time-parametrized curve."""
    if c.times is None:
        raise StreamdecError("curve carries no travel times")
    return c.segment_lengths() / np.diff(c.times)


def rasterize(f: ScalarField, curves, spacing: float = 0.5) -> np.ndarray:
    """Cells visited by the curves, sampled every ``spacing * h`` along each segment."""
    hit = np.zeros(f.shape, dtype=bool)
    for c in curves:
        a, b = c.segments()
        L = c.segment_lengths()
        k = np.maximum(1, np.ceil(L / (spacing * f.h)).astype(int))
        seg = np.repeat(np.arange(c.n), k)
        frac = (np.arange(k.sum()) - np.repeat(np.cumsum(k) - k, k)) / np.repeat(k, k)
        pts = a[seg] + frac[:, None] * (b[seg] - a[seg])
        i = np.rint((pts[:, 0] - f.origin[0]) / f.h).astype(int)
        j = np.rint((pts[:, 1] - f.origin[1]) / f.h).astype(int)
        ok = (i >= 0) & (i < f.nx) & (j >= 0) & (j < f.ny)
        hit[j[ok], i[ok]] = True
    return hit
