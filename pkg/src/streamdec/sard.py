"""Weak Sard estimation: critical sets, level-curve cover, pushforward histograms and scores.

A score curve measures how much of a pushforward measure fits into a small
fraction of the value axis.  Atoms score 1 at any positive width, while a
uniform density scores about the width fraction.  The verdict is a threshold
on the curve, an empirical proxy and never a certificate.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .curves import rasterize, regular_levels, trace_essential_level
from .errors import StreamdecError
from .field import ScalarField, grad_norm
from .region import EIGHT, RegionMask

DEFAULT_DELTAS = (0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)
SINGULAR = "singular-like"
AC_DETECTED = "absolutely-continuous-part detected"


def critical_set(f: ScalarField, eps_grad: float = 1e-6) -> RegionMask:
    """Cells with ``|grad f| <= eps_grad * max |grad f|``."""
    if eps_grad < 0:
        raise StreamdecError("eps_grad must be >= 0")
    g = grad_norm(f)
    return RegionMask(g <= eps_grad * g.max(), f.h)


def e_star(f: ScalarField, min_len: float = 0.0, n_levels: int = 256) -> RegionMask:
    """Cells within one cell of a traced level curve of length at least ``min_len``."""
    if n_levels < 1:
        raise StreamdecError("n_levels must be >= 1")
    if not np.any(f.values != 0):
        return RegionMask(np.zeros(f.shape, dtype=bool), f.h)
    hit = np.zeros(f.shape, dtype=bool)
    for t in regular_levels(f, n_levels):
        curves = [c for c in trace_essential_level(f, t) if c.arclength >= min_len]
        if curves:
            hit |= rasterize(f, curves)
    return RegionMask(ndimage.binary_dilation(hit, structure=EIGHT), f.h)


@dataclass(frozen=True, eq=False)
class PushforwardHistogram:
    t_min: float
    t_max: float
    masses: np.ndarray
    total: float

    @property
    def n_bins(self) -> int:
        return len(self.masses)

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.n_bins + 1)

    def as_dict(self):
        return {"t_min": self.t_min, "t_max": self.t_max, "n_bins": self.n_bins,
                "total": self.total, "masses": self.masses.tolist()}


def value_range(f: ScalarField) -> tuple[float, float]:
    """Range of ``f`` together with the exterior value 0."""
    return min(float(f.values.min()), 0.0), max(float(f.values.max()), 0.0)


def pushforward(f: ScalarField, mask: RegionMask, n_bins: int = 1024,
                t_range: tuple[float, float] | None = None) -> PushforwardHistogram:
    """Histogram of ``f`` over the mask cells, each weighing ``h^2``.

    Bins split ``t_range`` (default: :func:`value_range`) evenly.  A range of
    zero width puts all mass into bin 0.
    """
    if n_bins < 1:
        raise StreamdecError("n_bins must be >= 1")
    if mask.shape != f.shape:
        raise StreamdecError("mask and field differ in shape")
    lo, hi = value_range(f) if t_range is None else (float(t_range[0]), float(t_range[1]))
    vals = f.values[mask.bits]
    if hi > lo:
        if vals.size and (vals.min() < lo or vals.max() > hi):
            raise StreamdecError("values fall outside the histogram range")
        counts, _ = np.histogram(vals, bins=n_bins, range=(lo, hi))
    else:
        counts = np.zeros(n_bins, dtype=int)
        counts[0] = vals.size
    masses = counts * f.h**2
    return PushforwardHistogram(lo, hi, masses, float(vals.size * f.h**2))


@dataclass(frozen=True)
class ScoreCurve:
    deltas: tuple[float, ...]
    scores: tuple[float, ...]
    threshold: float
    at: float
    n_bins: int

    def score(self, delta: float) -> float:
        return self.scores[self.deltas.index(delta)]

    @property
    def verdict(self) -> str:
        return SINGULAR if self.score(self.at) >= self.threshold else AC_DETECTED

    def as_dict(self):
        return {"deltas": list(self.deltas), "scores": list(self.scores), "threshold": self.threshold,
                "delta_verdict": self.at, "n_bins": self.n_bins, "verdict": self.verdict}


def singularity_score(hist: PushforwardHistogram, delta_fracs=DEFAULT_DELTAS,
                      threshold: float = 0.95, at: float = 0.01) -> ScoreCurve:
    """Share of the mass held by the densest ``floor(delta * n_bins)`` bins, per ``delta``."""
    if hist.total <= 0:
        raise StreamdecError("empty pushforward")
    deltas = tuple(sorted(set(float(d) for d in delta_fracs) | {float(at)}))
    if deltas[0] < 0:
        raise StreamdecError("delta fractions must be >= 0")
    csum = np.concatenate([[0.0], np.cumsum(np.sort(hist.masses)[::-1])])
    scores = []
    for d in deltas:
        k = min(hist.n_bins, int(math.floor(d * hist.n_bins + 1e-9)))
        scores.append(float(min(1.0, csum[k] / hist.total)))
    return ScoreCurve(deltas, tuple(scores), float(threshold), float(at), hist.n_bins)


@dataclass(frozen=True, eq=False)
class ComponentWSP:
    index: int
    critical_area: float
    curve: ScoreCurve | None
    histogram: PushforwardHistogram = field(repr=False)
    estar_curve: ScoreCurve | None = None

    @property
    def verdict(self) -> str:
        # a null measure is singular
        return SINGULAR if self.curve is None else self.curve.verdict

    def as_dict(self):
        d = {"index": self.index, "critical_area": self.critical_area, "verdict": self.verdict,
             "score_curve": None if self.curve is None else self.curve.as_dict()}
        if self.estar_curve is not None:
            d["estar_score_curve"] = self.estar_curve.as_dict()
            d["estar_verdict"] = self.estar_curve.verdict
        return d


@dataclass(frozen=True, eq=False)
class WSPReport:
    components: list[ComponentWSP]
    cross_scores: np.ndarray       # [i, j]: pushforward under f_i of grad_support(f_j)
    cross_singular: np.ndarray
    threshold: float
    note: str = "score-based proxy; it cannot certify mutual singularity"

    @property
    def verdict(self) -> str:
        return SINGULAR if all(c.verdict == SINGULAR for c in self.components) else AC_DETECTED

    @property
    def cross_ok(self) -> bool:
        return bool(self.cross_singular.all())

    def as_dict(self):
        return {
            "verdict": self.verdict,
            "components": [c.as_dict() for c in self.components],
            "cross_scores": np.where(np.isnan(self.cross_scores), None, self.cross_scores).tolist(),
            "cross_singular": self.cross_singular.tolist(),
            "cross_ok": self.cross_ok,
            "threshold": self.threshold,
            "note": self.note,
        }


def _score_or_none(hist, deltas, threshold):
    return singularity_score(hist, deltas, threshold) if hist.total > 0 else None


def wsp_report(f: ScalarField, comps, n_bins: int = 1024, eps_grad: float = 1e-6,
               delta_fracs=DEFAULT_DELTAS, threshold: float = 0.95, with_estar: bool = False,
               n_levels: int = 256, workers: int = 1) -> WSPReport:
    """Per-component critical-set pushforwards plus the cross-singularity matrix.

    For a monotone component the level-curve cover can be dropped; with
    ``with_estar`` the score of the critical set cut down to that cover is
    reported too, so the two verdicts can be compared.
    """
    def one(item):
        i, c = item
        crit = critical_set(c.field, eps_grad)
        hist = pushforward(c.field, crit, n_bins)
        curve = _score_or_none(hist, delta_fracs, threshold)
        est = None
        if with_estar:
            cut = crit & e_star(c.field, 0.0, n_levels)
            est = _score_or_none(pushforward(c.field, cut, n_bins), delta_fracs, threshold)
        return ComponentWSP(i, crit.area(), curve, hist, est)

    items = list(enumerate(comps))
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            per = list(ex.map(one, items))
    else:
        per = [one(it) for it in items]
    n = len(comps)
    cross = np.full((n, n), np.nan)
    ok = np.ones((n, n), dtype=bool)
    for i, ci in enumerate(comps):
        for j, cj in enumerate(comps):
            if i == j:
                continue
            hist = pushforward(ci.field, cj.grad_support, n_bins)
            curve = _score_or_none(hist, delta_fracs, threshold)
            if curve is not None:
                cross[i, j] = curve.score(curve.at)
                ok[i, j] = curve.verdict == SINGULAR
    return WSPReport(per, cross, ok, float(threshold))


def terraced_field(n: int = 512, width: int = 3, extent: float = 1.0) -> ScalarField:
    """Nested square terraces ``width`` cells wide, values rising evenly toward the center.

    The middle ring of each terrace has an exactly zero central difference,
    so the critical set carries values spread across the whole range: a
    calibration case for the absolutely continuous branch of the detector.
    """
    from .monodec import SuperlevelFamily, function_from_superlevels

    h = extent / n
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    ring = np.minimum.reduce([i, j, n - 1 - i, n - 1 - j])
    depth = (ring - 1) // width          # terrace index, -1 on the outer ring
    k_max = int(depth.max())
    thresholds = tuple((k + 1) / (k_max + 1) for k in range(k_max + 1))
    masks = tuple(RegionMask(depth >= k, h) for k in range(k_max + 1))
    return function_from_superlevels(SuperlevelFamily(thresholds, masks), h, (0.0, 0.0))
