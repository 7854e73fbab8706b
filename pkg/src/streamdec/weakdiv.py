"""Weak divergence tests for ``div(rho v) = 0``.

A defect is the pairing ``<div(rho v), phi> = -sum rho v . grad(phi) h^2`` with
a compactly supported bump ``phi``.  A point source of mass ``m`` at ``p``
contributes ``m * phi(p)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curves import interpolate, is_regular_level, trace_essential_level
from .errors import StreamdecError
from .field import ScalarField, VectorField, perp_gradient
from .monodec import MonotoneComponent, is_monotone

GRAD_MAX = 96.0 / (25.0 * math.sqrt(5.0))   # max |grad (1 - r^2)^3| on the unit ball


@dataclass(frozen=True, eq=False)
class TestFamily:
    """Bumps ``phi_k(x) = (1 - |x - c_k|^2 / r_k^2)^3`` on their balls."""

    __test__ = False  # not a pytest class

    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float).reshape(-1, 2)
        r = np.asarray(self.radii, dtype=float).ravel()
        if len(c) != len(r) or np.any(r <= 0):
            raise StreamdecError("need one positive radius per center")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)

    def __len__(self):
        return len(self.radii)

    def phi(self, k: int, x, y):
        c, r = self.centers[k], self.radii[k]
        q = ((x - c[0]) ** 2 + (y - c[1]) ** 2) / r**2
        return np.where(q < 1, (1 - q) ** 3, 0.0)

    def grad_phi(self, k: int, x, y):
        c, r = self.centers[k], self.radii[k]
        dx, dy = x - c[0], y - c[1]
        q = (dx**2 + dy**2) / r**2
        s = np.where(q < 1, -6.0 * (1 - q) ** 2 / r**2, 0.0)
        return s * dx, s * dy

    def grad_sup(self, k: int) -> float:
        return GRAD_MAX / self.radii[k]

    def contains(self, k: int, p) -> bool:
        c, r = self.centers[k], self.radii[k]
        return bool((p[0] - c[0]) ** 2 + (p[1] - c[1]) ** 2 < r**2)


def default_family(f: ScalarField, divisions: int = 8, radius_divs=(4, 8, 16)) -> TestFamily:
    """Lattice of centers at stride ``extent / divisions`` times radii ``extent / d``.

    Only bumps whose ball fits inside the grid are kept.  Enumeration is
    radius-major, then row by row.
    """
    xmin, xmax, ymin, ymax = f.bounds()
    ext = min(xmax - xmin, ymax - ymin)
    xs = xmin + (xmax - xmin) / divisions * np.arange(1, divisions)
    ys = ymin + (ymax - ymin) / divisions * np.arange(1, divisions)
    centers, radii = [], []
    tol = 1e-12 * ext
    for d in radius_divs:
        r = ext / d
        for y in ys:
            for x in xs:
                if x - r >= xmin - tol and x + r <= xmax + tol and y - r >= ymin - tol and y + r <= ymax + tol:
                    centers.append((x, y))
                    radii.append(r)
    return TestFamily(np.array(centers), np.array(radii))


@dataclass(frozen=True, eq=False)
class DefectReport:
    raw: np.ndarray
    normalized: np.ndarray
    skipped: np.ndarray
    flagged_cells: np.ndarray

    @property
    def max_normalized(self) -> float:
        vals = self.normalized[~self.skipped]
        return float(np.abs(vals).max()) if vals.size else 0.0

    @property
    def argmax(self) -> int:
        a = np.where(self.skipped, -np.inf, np.abs(self.normalized))
        return int(np.argmax(a))

    def as_dict(self):
        return {
            "raw": self.raw.tolist(),
            "normalized": self.normalized.tolist(),
            "skipped": self.skipped.tolist(),
            "flagged_cells": self.flagged_cells.tolist(),
            "max_normalized": self.max_normalized,
        }


def _check_grids(rho: ScalarField, v: VectorField):
    if rho.shape != v.shape or rho.h != v.h or tuple(rho.origin) != tuple(v.origin):
        raise StreamdecError("grid mismatch between rho and v")


def _box(f: ScalarField, c, r):
    i0 = max(0, int(math.floor((c[0] - r - f.origin[0]) / f.h)))
    i1 = min(f.nx, int(math.ceil((c[0] + r - f.origin[0]) / f.h)) + 1)
    j0 = max(0, int(math.floor((c[1] - r - f.origin[1]) / f.h)))
    j1 = min(f.ny, int(math.ceil((c[1] + r - f.origin[1]) / f.h)) + 1)
    return slice(j0, j1), slice(i0, i1)


def divergence_defect(rho: ScalarField, v: VectorField, fam: TestFamily,
                      flag_mask: np.ndarray | None = None) -> DefectReport:
    """Raw and normalized defects of ``rho v`` against every bump of ``fam``.

    The normalization divides by ``max|rho| * sum_{supp} |v| h^2 * max|grad phi|``,
    which bounds the raw value.  Tests with a zero denominator are skipped.
    ``flag_mask`` marks cells to count per test (singular points, say).
    """
    _check_grids(rho, v)
    x1 = rho.origin[0] + rho.h * np.arange(rho.nx)
    y1 = rho.origin[1] + rho.h * np.arange(rho.ny)
    rv = rho.values
    rho_sup = float(np.abs(rv).max())
    speed = np.hypot(v.vx, v.vy)
    h2 = rho.h**2
    n = len(fam)
    raw = np.zeros(n)
    norm = np.zeros(n)
    skipped = np.zeros(n, dtype=bool)
    flagged = np.zeros(n, dtype=int)
    for k in range(n):
        sy, sx = _box(rho, fam.centers[k], fam.radii[k])
        x, y = np.meshgrid(x1[sx], y1[sy])
        gx, gy = fam.grad_phi(k, x, y)
        inside = fam.phi(k, x, y) > 0
        raw[k] = -float(np.sum(rv[sy, sx] * (v.vx[sy, sx] * gx + v.vy[sy, sx] * gy))) * h2
        denom = rho_sup * float(speed[sy, sx][inside].sum()) * h2 * fam.grad_sup(k)
        if denom > 0:
            norm[k] = raw[k] / denom
        else:
            skipped[k] = True
        if flag_mask is not None:
            flagged[k] = int(flag_mask[sy, sx][inside].sum())
    return DefectReport(raw, norm, skipped, flagged)


def control_threshold(v: VectorField, fam: TestFamily, factor: float = 10.0) -> float:
    """``factor`` times the largest normalized defect of ``rho = 1``: the quadrature noise floor."""
    one = ScalarField(np.ones(v.shape), v.h, v.origin)
    return factor * divergence_defect(one, v, fam).max_normalized


@dataclass(frozen=True)
class Beta:
    fn: object
    dfn: object = None
    name: str = "beta"

    def __call__(self, r):
        return self.fn(r)


SQUARE = Beta(lambda r: r * r, lambda r: 2 * r, "square")
IDENTITY = Beta(lambda r: r, lambda r: np.ones_like(r), "identity")
SINE = Beta(np.sin, np.cos, "sin")


@dataclass(frozen=True, eq=False)
class ChainRuleReport:
    rho: DefectReport
    beta_rho: DefectReport
    threshold: float
    verdict: str
    witness_test: int | None

    def as_dict(self):
        return {
            "defect_rho": self.rho.max_normalized,
            "defect_beta_rho": self.beta_rho.max_normalized,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "witness_test": self.witness_test,
        }


def chain_rule_test(rho: ScalarField, v: VectorField, beta, fam: TestFamily,
                    threshold: float | None = None, flag_mask=None) -> ChainRuleReport:
    """Defects of ``rho`` and ``beta(rho)`` with a verdict.

    ``"holds"``: both below threshold.  ``"violated"``: ``rho`` passes and
    ``beta(rho)`` fails, with ``witness_test`` the worst bump.
    ``"hypothesis-failed"``: ``div(rho v)`` itself is not small, so the
    property says nothing.
    """
    if threshold is None:
        threshold = control_threshold(v, fam)
    d1 = divergence_defect(rho, v, fam, flag_mask)
    d2 = divergence_defect(rho.with_values(beta(rho.values)), v, fam, flag_mask)
    if d1.max_normalized > threshold:
        verdict, witness = "hypothesis-failed", d1.argmax
    elif d2.max_normalized > threshold:
        verdict, witness = "violated", d2.argmax
    else:
        verdict, witness = "holds", None
    return ChainRuleReport(d1, d2, float(threshold), verdict, witness)


def split_by_components(rho: ScalarField, comps: list[MonotoneComponent], fam: TestFamily) -> list[DefectReport]:
    """Defect of ``rho`` against each component's own field ``(-d_y f_i, d_x f_i)``."""
    return [divergence_defect(rho, perp_gradient(c.field), fam) for c in comps]


@dataclass(frozen=True)
class ConstancyReport:
    levels: list[float]
    variances: list[float]
    means: list[float]
    n_curves: list[int]

    @property
    def max_variance(self) -> float:
        return max(self.variances) if self.variances else 0.0

    def as_dict(self):
        d = dict(self.__dict__)
        d["max_variance"] = self.max_variance
        return d


def constancy_test(rho: ScalarField, f: ScalarField, levels) -> ConstancyReport:
    """Arclength-weighted variance of ``rho`` along the level curves of monotone ``f``."""
    if not is_monotone(f):
        raise StreamdecError("expected monotone f: run decompose first and test each component")
    out_l, out_v, out_m, out_n = [], [], [], []
    for t in levels:
        if not is_regular_level(f, t):
            raise StreamdecError(f"non-regular level {t!r}")
        cs = trace_essential_level(f, t)
        if not cs:
            continue
        mids = np.concatenate([c.midpoints() for c in cs])
        w = np.concatenate([c.segment_lengths() for c in cs])
        r = interpolate(f, rho.values, mids)
        mean = float(np.sum(w * r) / w.sum())
        out_l.append(float(t))
        out_v.append(float(np.sum(w * (r - mean) ** 2) / w.sum()))
        out_m.append(mean)
        out_n.append(len(cs))
    return ConstancyReport(out_l, out_v, out_m, out_n)


@dataclass(frozen=True, eq=False)
class CurveSolution:
    values: np.ndarray     # one value per segment
    constant: float


def curve_divergence_solve(c, nu) -> CurveSolution:
    """Solve ``(rho o gamma)' = nu`` on a closed curve.

    ``nu`` is a list of ``(segment index, mass)``; a mass sits at the start of
    its segment.  The solution is piecewise constant per segment and the
    constant is fixed by a zero arclength mean.
    """
    n = c.n
    m = np.zeros(n)
    for j, mass in nu:
        if not 0 <= int(j) < n:
            raise StreamdecError(f"segment index {j} out of range")
        m[int(j)] += float(mass)
    scale = max(1.0, float(np.abs(m).sum()))
    if abs(m.sum()) > 1e-12 * scale:
        raise StreamdecError("no steady solution on closed curve: total mass is not zero")
    cum = np.cumsum(m)
    w = c.segment_lengths()
    const = -float(np.sum(w * cum) / w.sum())
    return CurveSolution(cum + const, const)


def curve_jumps(values: np.ndarray) -> np.ndarray:
    """Discrete derivative along a closed curve: ``values[j] - values[j-1]``."""
    return values - np.roll(values, 1)
