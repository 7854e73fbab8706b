"""Greedy decomposition of a grid function into monotone pieces.

The pipeline follows the constructive route: from a non-negative part pick a
branch of superlevel components (extraction I), fill the holes of every
superlevel (extraction II), subtract, repeat.  Every step preserves total
variation exactly, because on each edge the extracted piece and the remainder
change in the same direction.

Breakpoints are the distinct sample values, so there is no level sampling.
The result is deterministic but it is only one of many valid decompositions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from skimage.morphology import local_maxima, reconstruction

from ._levels import is_monotone_values
from .errors import StreamdecError
from .field import ScalarField, gradient, total_variation
from .region import EIGHT, FOUR, RegionMask, is_indecomposable


@dataclass(frozen=True, eq=False)
class MonotoneComponent:
    field: ScalarField
    sign: int
    tv: float
    grad_support: RegionMask


@dataclass(frozen=True)
class SuperlevelFamily:
    """``masks[k]`` is the set where the built function is ``>= thresholds[k]``."""

    thresholds: tuple[float, ...]
    masks: tuple[RegionMask, ...]

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        object.__setattr__(self, "masks", tuple(self.masks))
        if len(self.thresholds) != len(self.masks):
            raise StreamdecError("thresholds and masks differ in length")


def grad_support(f: ScalarField) -> RegionMask:
    """Cells where the central-difference gradient is non-zero."""
    fx, fy = gradient(f)
    return RegionMask((fx != 0) | (fy != 0), f.h)


def is_monotone(f: ScalarField) -> bool:
    """All superlevel and sublevel sets are indecomposable, at every breakpoint.

    A superlevel set with a hole fails through its sublevel set: the hole and
    the exterior are two components of ``{f < t}``.
    """
    return is_monotone_values(f.values)


def superlevel_family(f: ScalarField) -> SuperlevelFamily:
    """Family ``{f >= u}`` over the positive distinct values ``u`` of ``f``."""
    u = np.unique(f.values)
    u = u[u > 0]
    return SuperlevelFamily(tuple(u), tuple(RegionMask(f.values >= t, f.h) for t in u))


def function_from_superlevels(fam: SuperlevelFamily, h: float = 1.0,
                              origin=(0.0, 0.0)) -> ScalarField:
    """``w(x) = max{t_k : x in masks[k]}``, 0 outside every mask."""
    if not fam.masks:
        raise StreamdecError("empty superlevel family")
    t = np.asarray(fam.thresholds)
    if np.any(np.diff(t) <= 0):
        raise StreamdecError("thresholds must be strictly increasing")
    for k in range(len(fam.masks) - 1):
        if np.any(fam.masks[k + 1].bits & ~fam.masks[k].bits):
            raise StreamdecError(f"nesting violated: mask {k + 1} is not inside mask {k}")
    w = np.zeros(fam.masks[0].shape)
    for tk, m in zip(t, fam.masks):
        w[m.bits] = tk
    return ScalarField(w, h, origin)


def _branch(values: np.ndarray, seed: np.ndarray, cap: float) -> np.ndarray:
    """Largest level at which each cell shares a 4-component of ``{f >= level}`` with the seed."""
    marker = np.where(seed, cap, 0.0)
    mask = np.minimum(values, cap)
    mask = np.maximum(mask, marker)
    return reconstruction(marker, mask, method="dilation", footprint=FOUR)


def _fill(values: np.ndarray) -> np.ndarray:
    """Grayscale hole filling: min over 8-paths to the exterior of the path maximum."""
    pad = np.pad(values, 1)
    seed = np.full_like(pad, pad.max())
    seed[0, :] = seed[-1, :] = seed[:, 0] = seed[:, -1] = 0.0
    out = reconstruction(seed, pad, method="erosion", footprint=EIGHT)
    return out[1:-1, 1:-1]


def extract_indecomposable(f: ScalarField, seed: RegionMask, level: float | None = None):
    """Split ``f >= 0`` into a branch ``g`` with indecomposable superlevels and a remainder.

    ``seed`` must be a 4-component of ``{f >= level}``; ``level`` defaults to the
    minimum of ``f`` on the seed, the highest admissible cap.  For every lower
    breakpoint, ``{g >= t}`` is the component of ``{f >= t}`` containing the seed.
    Returns ``(g, f - g)``.
    """
    v = f.values
    if np.any(v < 0):
        raise StreamdecError("extract_indecomposable needs f >= 0")
    s = seed.bits
    if not s.any() or not is_indecomposable(seed):
        raise StreamdecError("seed must be a non-empty 4-connected region")
    cap = float(v[s].min()) if level is None else float(level)
    if cap <= 0 or np.any(v[s] < cap):
        raise StreamdecError("seed is not inside a positive superlevel at the given level")
    ring = np.pad(s, 1)
    ring = (np.roll(ring, 1, 0) | np.roll(ring, -1, 0) | np.roll(ring, 1, 1) | np.roll(ring, -1, 1))
    ring = ring[1:-1, 1:-1] & ~s
    if np.any(v[ring] >= cap):
        raise StreamdecError("seed is not a component of a superlevel set")
    g = _branch(v, s, cap)
    return f.with_values(g), f.with_values(v - g)


def extract_saturated(g: ScalarField) -> ScalarField:
    """Fill the holes of every superlevel of ``g``; the result has simple superlevels."""
    if np.any(g.values < 0):
        raise StreamdecError("extract_saturated needs g >= 0")
    if not is_monotone_superlevels(g):
        raise StreamdecError("superlevels of g must be indecomposable")
    return g.with_values(_fill(g.values))


def is_monotone_superlevels(g: ScalarField) -> bool:
    from ._levels import superlevel_counts

    if not (g.values > 0).any():
        return True
    u, c = superlevel_counts(g.values, 4)
    return bool(np.all(c[u > 0] == 1))


@dataclass(frozen=True)
class Candidate:
    sign: int
    tv: float
    leaf: int
    field: np.ndarray = field(repr=False)


def candidates(f: ScalarField) -> list[Candidate]:
    """One candidate per regional maximum of ``f+`` and of ``f-``."""
    from scipy import ndimage

    out = []
    for sign in (1, -1):
        p = np.maximum(sign * f.values, 0.0)
        if not (p > 0).any():
            continue
        peaks = local_maxima(np.pad(p, 1), connectivity=1, allow_borders=True)[1:-1, 1:-1]
        peaks &= p > 0
        labels, n = ndimage.label(peaks, structure=FOUR)
        for k in range(1, n + 1):
            s = labels == k
            g = _branch(p, s, float(p[s][0]))
            hfill = _fill(g)
            out.append(Candidate(sign, total_variation(f.with_values(hfill)),
                                 int(np.flatnonzero(s.ravel())[0]), hfill))
    return out


def _component(f: ScalarField, sign: int, values: np.ndarray) -> MonotoneComponent:
    comp = f.with_values(sign * values)
    return MonotoneComponent(comp, sign, total_variation(comp), grad_support(comp))


def extract_monotone(f: ScalarField):
    """Best single monotone piece of ``f`` (largest total variation) and the remainder."""
    if total_variation(f) == 0:
        raise StreamdecError("null function")
    cands = candidates(f)
    best = max(cands, key=lambda c: (c.tv, c.sign, -c.leaf))
    comp = _component(f, best.sign, best.field)
    return comp, f - comp.field


def decompose(f: ScalarField, eps_stop: float = 1e-12, max_components: int = 1024):
    """Greedy decomposition ``f = sum f_i + residual`` with additive total variation.

    Each step takes the candidate of largest total variation, so the chosen
    piece is at least half of the best available one.
    """
    if eps_stop < 0:
        raise StreamdecError("eps_stop must be >= 0")
    tv0 = total_variation(f)
    comps: list[MonotoneComponent] = []
    r = f
    while tv0 > 0 and len(comps) < max_components:
        if total_variation(r) <= eps_stop * tv0:
            break
        comp, r = extract_monotone(r)
        comps.append(comp)
    return comps


@dataclass(frozen=True)
class DecompositionReport:
    max_pointwise_defect: float
    tv: float
    tv_sum: float
    residual_tv: float
    relative_tv_defect: float
    overlaps: list[tuple[int, int, int]]
    monotone: list[bool]
    edge_coherent: bool
    note: str = "greedy output; the decomposition is not unique"

    @property
    def passed(self) -> bool:
        return (not self.overlaps and all(self.monotone) and self.edge_coherent)

    def as_dict(self):
        d = dict(self.__dict__)
        d["overlaps"] = [list(o) for o in self.overlaps]
        d["passed"] = self.passed
        return d


def verify_decomposition(f: ScalarField, comps) -> DecompositionReport:
    """Check reconstruction, TV additivity, disjoint gradient supports and monotonicity.

    ``edge_coherent`` is the edgewise form of additivity: on every grid edge all
    pieces and the residual vary in the same direction as ``f``.
    """
    total = np.zeros(f.shape)
    for c in comps:
        total = total + c.field.values
    resid = f.values - total
    tv = total_variation(f)
    tv_sum = float(sum(c.tv for c in comps))
    rtv = total_variation(f.with_values(resid))
    overlaps = []
    for i in range(len(comps)):
        for j in range(i + 1, len(comps)):
            n = int((comps[i].grad_support.bits & comps[j].grad_support.bits).sum())
            if n:
                overlaps.append((i, j, n))
    return DecompositionReport(
        max_pointwise_defect=float(np.abs(resid).max()) if comps else float(np.abs(f.values).max()),
        tv=tv,
        tv_sum=tv_sum,
        residual_tv=rtv,
        relative_tv_defect=abs(tv - tv_sum - rtv) / tv if tv else 0.0,
        overlaps=overlaps,
        monotone=[is_monotone(c.field) for c in comps],
        edge_coherent=_edge_coherent(f, [c.field.values for c in comps] + [resid]),
    )


def _edge_coherent(f: ScalarField, parts) -> bool:
    def diffs(v):
        p = np.pad(v, 1)
        return np.concatenate([(p[:, 1:] - p[:, :-1]).ravel(), (p[1:, :] - p[:-1, :]).ravel()])

    d = diffs(f.values)
    scale = np.abs(f.values).max() or 1.0
    tol = 1e-12 * scale
    for v in parts:
        dv = diffs(v)
        big = np.abs(dv) > tol
        if np.any(big & (dv * d < 0)) or np.any(big & (np.abs(d) <= tol)):
            return False
    return True
