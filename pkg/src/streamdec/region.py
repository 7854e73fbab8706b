"""Discrete sets of finite perimeter.

Foreground is 4-connected and background 8-connected.  With that pairing the
perimeter of a set splits exactly over its components, and the perimeter of an
indecomposable set splits exactly into its saturation plus its holes.  "Up to
negligible sets" becomes plain set equality on a grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import StreamdecError

FOUR = ndimage.generate_binary_structure(2, 1)
EIGHT = ndimage.generate_binary_structure(2, 2)


@dataclass(frozen=True, eq=False)
class RegionMask:
    bits: np.ndarray
    h: float = 1.0

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool).copy()
        if bits.ndim != 2:
            raise StreamdecError("mask must be 2D")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def shape(self):
        return self.bits.shape

    def perimeter_count(self) -> int:
        return perimeter_count(self.bits)

    def perimeter(self) -> float:
        return self.perimeter_count() * self.h

    def area(self) -> float:
        return int(self.bits.sum()) * self.h**2

    def empty(self) -> bool:
        return not self.bits.any()

    def __eq__(self, other):
        return isinstance(other, RegionMask) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())

    def __or__(self, other):
        return RegionMask(self.bits | other.bits, self.h)

    def __and__(self, other):
        return RegionMask(self.bits & other.bits, self.h)


def _pad1(a: np.ndarray, value=0) -> np.ndarray:
    """One-cell constant border; much cheaper than ``np.pad`` on small arrays."""
    out = np.full((a.shape[0] + 2, a.shape[1] + 2), value, dtype=a.dtype)
    out[1:-1, 1:-1] = a
    return out


def _label_edge_counts(lab: np.ndarray, n: int) -> np.ndarray:
    """Per label, the number of 4-adjacent pairs joining it to a different label (border included)."""
    p = _pad1(lab)
    counts = np.zeros(n + 1, dtype=np.int64)
    for a, b in ((p[:, :-1], p[:, 1:]), (p[:-1, :], p[1:, :])):
        cut = a != b
        counts += np.bincount(a[cut], minlength=n + 1) + np.bincount(b[cut], minlength=n + 1)
    return counts


def perimeter_count(bits: np.ndarray) -> int:
    """Number of 4-adjacent in/out pairs, the exterior counting as out."""
    p = _pad1(np.asarray(bits, dtype=bool))
    return int((p[:, 1:] != p[:, :-1]).sum() + (p[1:, :] != p[:-1, :]).sum())


def components(mask: RegionMask) -> list[RegionMask]:
    """4-connected components, largest first, ties by smallest linear index."""
    labels, n = ndimage.label(mask.bits, structure=FOUR)
    if n == 0:
        return []
    flat = labels.ravel()
    sizes = np.bincount(flat, minlength=n + 1)[1:]
    idx = np.flatnonzero(flat)
    first = np.full(n, flat.size)
    np.minimum.at(first, flat[idx] - 1, idx)
    order = np.lexsort((first, -sizes))
    return [RegionMask(labels == k + 1, mask.h) for k in order]


def is_indecomposable(mask: RegionMask) -> bool:
    _, n = ndimage.label(mask.bits, structure=FOUR)
    return n == 1


def _background_labels(bits: np.ndarray) -> tuple[np.ndarray, int]:
    """8-components of the complement on a padded grid; label 1 is the outside."""
    pad = _pad1(~np.asarray(bits, dtype=bool), True)
    labels, n = ndimage.label(pad, structure=EIGHT)
    outer = labels[0, 0]
    if outer != 1:
        labels = np.where(labels == outer, 1, np.where(labels == 1, outer, labels))
    return labels[1:-1, 1:-1], n


def holes(mask: RegionMask) -> list[RegionMask]:
    """Bounded 8-components of the complement of an indecomposable region."""
    if not is_indecomposable(mask):
        raise StreamdecError("expected indecomposable region")
    return _holes(mask)


def _holes(mask: RegionMask) -> list[RegionMask]:
    labels, n = _background_labels(mask.bits)
    out = []
    for k in range(2, n + 1):
        bits = labels == k
        if bits.any():
            out.append(RegionMask(bits, mask.h))
    out.sort(key=lambda m: (-int(m.bits.sum()), int(np.flatnonzero(m.bits.ravel())[0])))
    return out


def fill_holes(bits: np.ndarray) -> np.ndarray:
    labels, _ = _background_labels(bits)
    return np.asarray(bits, dtype=bool) | (labels > 1)


def saturate(mask: RegionMask) -> RegionMask:
    """Union of each component with its holes."""
    out = np.zeros(mask.shape, dtype=bool)
    for comp in components(mask):
        out |= fill_holes(comp.bits)
    return RegionMask(out, mask.h)


def is_simple(mask: RegionMask) -> bool:
    return is_indecomposable(mask) and not _holes(mask)


@dataclass(frozen=True)
class AdditivityReport:
    perimeter: int
    component_perimeters: list[int]
    holds: bool

    def as_dict(self):
        return dict(self.__dict__)


def perimeter_additivity_check(mask: RegionMask) -> AdditivityReport:
    """``P(E) = sum P(component)``; 4-components never touch, so their boundary edges face out."""
    labels, n = ndimage.label(mask.bits, structure=FOUR)
    parts = sorted((int(c) for c in _label_edge_counts(labels, n)[1:]), reverse=True)
    total = mask.perimeter_count()
    return AdditivityReport(total, parts, total == sum(parts))


@dataclass(frozen=True)
class SaturationReport:
    perimeter: int
    saturated_perimeter: int
    hole_perimeters: list[int]
    holds: bool

    def as_dict(self):
        return dict(self.__dict__)


def saturation_identity_check(mask: RegionMask) -> SaturationReport:
    """``P(E) = P(sat E) + sum P(hole)`` for an indecomposable region, in edge counts.

    One labeling of the complement serves all holes.  Distinct holes are never
    4-adjacent, so every boundary edge of a hole is shared with ``E``.
    """
    if not is_indecomposable(mask):
        raise StreamdecError("expected indecomposable region")
    return _saturation_report(mask)


def _saturation_report(mask: RegionMask) -> SaturationReport:
    labels, n = _background_labels(mask.bits)
    lab = np.where(mask.bits, 0, labels)
    counts = _label_edge_counts(lab, n)
    hp = sorted((int(c) for c in counts[2:] if c), reverse=True)
    sat = perimeter_count(mask.bits | (lab > 1))
    total = mask.perimeter_count()
    return SaturationReport(total, sat, hp, total == sat + sum(hp))
