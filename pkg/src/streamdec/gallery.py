"""Closed-form example fields.

Grids are given as ``(n, lo, extent)``: ``n x n`` cells covering the square
``[lo, lo + extent]`` in each axis (``lo`` a pair).  Every generator returns
fields that vanish on the outer ring of cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StreamdecError
from .field import ScalarField, VectorField, make_grid


@dataclass(frozen=True)
class Grid:
    n: int
    lo: tuple[float, float]
    extent: float

    def empty(self) -> ScalarField:
        shape, h, origin = make_grid(self.n, self.lo, self.extent)
        return ScalarField(np.zeros(shape), h, origin)


def _as_grid(grid) -> Grid:
    if isinstance(grid, Grid):
        return grid
    n, lo, extent = grid
    return Grid(int(n), (float(lo[0]), float(lo[1])), float(extent))


def _zero_ring(v: np.ndarray) -> np.ndarray:
    v = v.copy()
    v[0, :] = v[-1, :] = v[:, 0] = v[:, -1] = 0.0
    return v


def radial_bump(grid=(256, (-1.25, -1.25), 2.5), center=(0.0, 0.0), radius=1.0,
                amplitude=1.0) -> ScalarField:
    """``amplitude * max(0, 1 - r^2 / radius^2)``."""
    base = _as_grid(grid).empty()
    x, y = base.coords()
    r2 = ((x - center[0]) ** 2 + (y - center[1]) ** 2) / radius**2
    return base.with_values(_zero_ring(amplitude * np.maximum(0.0, 1.0 - r2)))


def two_bumps(grid=(128, (-1.6, -1.6), 3.2), separation=None, overlap=False,
              radius=0.6, amplitudes=(1.0, 0.6)) -> ScalarField:
    """Two radial bumps on the x-axis, centered about the origin.

    Default separations: ``2 * radius + 0.5`` for disjoint supports and
    ``(1 + sqrt(1/2)) * radius`` when overlapping, which puts the saddle
    at ``amplitudes[1] / 2`` on the edge of the first support.
    """
    g = _as_grid(grid)
    if separation is None:
        separation = (1 + math.sqrt(0.5)) * radius if overlap else 2 * radius + 0.5
    if overlap != (separation < 2 * radius):
        raise StreamdecError("separation does not match the overlap flag")
    c1 = (-separation / 2, 0.0)
    c2 = (separation / 2, 0.0)
    b1 = radial_bump(g, c1, radius, amplitudes[0])
    b2 = radial_bump(g, c2, radius, amplitudes[1])
    return b1 + b2


def volcano(grid=(128, (-1.25, -1.25), 2.5), rim=0.6, width=0.4, height=1.0) -> ScalarField:
    """Annular ridge ``height * max(0, 1 - ((r - rim) / width)^2)`` with a flat crater at 0."""
    base = _as_grid(grid).empty()
    x, y = base.coords()
    r = np.hypot(x, y)
    v = height * np.maximum(0.0, 1.0 - ((r - rim) / width) ** 2)
    return base.with_values(_zero_ring(v))


# ---------------------------------------------------------------------------
# sector counterexample (the `nelson` generator)

NELSON_GRID = (1024, (-1.5, -0.5), 3.0)
NELSON_POINTS = ((0.0, 0.0), (0.0, 2.0))


def _nelson_local(x, y):
    """Fold to the reference triangle ``0 < x < y < 1``: returns ``(|x|, y')`` and masks."""
    ax = np.abs(x)
    yr = np.where(y > 1.0, 2.0 - y, y)
    inside = (y > 0) & (y < 2) & (ax < yr)
    return ax, yr, inside


def nelson_stream(x, y, normalized=True):
    """``pi/4 - arctan(|x|/y')`` on the folded triangle, 0 elsewhere.

    With ``normalized`` the field is scaled by ``4/pi`` so that its maximum,
    and the total flux through the triangle, is 1.
    """
    ax, yr, inside = _nelson_local(x, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(inside, math.pi / 4 - np.arctan(ax / np.where(inside, yr, 1.0)), 0.0)
    return f * (4 / math.pi) if normalized else f


def nelson_velocity(x, y, normalized=True):
    """Closed form of the rotated gradient of :func:`nelson_stream`."""
    ax, yr, inside = _nelson_local(x, y)
    r2 = np.where(inside, ax**2 + yr**2, 1.0)
    scale = 4 / math.pi if normalized else 1.0
    # reference triangle: v = -(x, y) / r^2
    vx = -ax / r2
    vy = -yr / r2
    upper = y > 1.0
    vx = np.where(upper, -vx, vx)          # reflection about y = 1
    left = x < 0
    vy = np.where(left, -vy, vy)           # reflection about x = 0
    vx = np.where(inside, scale * vx, 0.0)
    vy = np.where(inside, scale * vy, 0.0)
    return vx, vy


def _right_of_ray(x, y, k, h, sub):
    """Fraction of the cell around ``(x, y)`` with ``x > k * y'`` (a ray through a singular point).

    Only cells within reach of the ray are subsampled on a ``sub x sub`` lattice.
    """
    yr = np.where(y > 1.0, 2.0 - y, y)
    out = (x > k * yr).astype(float)
    if h is None:
        return out
    near = np.abs(x - k * yr) <= (1.0 + k) * h
    xs, ys = x[near], y[near]
    acc = np.zeros(xs.shape)
    offs = (np.arange(sub) + 0.5) / sub - 0.5
    for dx in offs:
        for dy in offs:
            yy = ys + dy * h
            acc += (xs + dx * h) > k * np.where(yy > 1.0, 2.0 - yy, yy)
    out[near] = acc / sub**2
    return out


def nelson_sector(x, y, alpha, beta, sectors="angle", h=None, sub=8):
    """Indicator ``rho_{alpha,beta}`` on the right half of the triangle.

    ``sectors="slope"`` uses ``alpha*y' < x < beta*y'``; ``"angle"`` uses
    ``alpha < (4/pi) arctan(x/y') < beta``, for which the flux carried by the
    sector is exactly ``beta - alpha`` of the total.

    With a cell size ``h``, sector edges strictly inside the triangle are
    replaced by the cell fraction on each side.  Edges on ``x = 0`` or on the
    triangle boundary stay sharp, so that they coincide with the support of
    the sampled velocity.
    """
    ax, yr, inside = _nelson_local(x, y)
    right = (inside & (x > 0)).astype(float)
    if sectors == "slope":
        lo, hi = alpha, beta
    elif sectors == "angle":
        # exact endpoints: tan(pi/4) rounds below 1
        lo = 0.0 if alpha == 0 else math.tan(alpha * math.pi / 4)
        hi = 1.0 if beta == 1 else math.tan(beta * math.pi / 4)
    else:
        raise StreamdecError(f"unknown sector parametrization {sectors!r}")
    if not 0 <= lo < hi <= 1:
        raise StreamdecError("need 0 <= alpha < beta <= 1")
    out = right
    if lo > 0:
        out = out * _right_of_ray(x, y, lo, h, sub)
    if hi < 1:
        out = out * (1.0 - _right_of_ray(x, y, hi, h, sub))
    return out


def _nelson_base(grid) -> ScalarField:
    base = _as_grid(grid).empty()
    xmin, xmax, ymin, ymax = base.bounds()
    if xmin > -1.5 or xmax < 1.5 or ymin > -0.5 or ymax < 2.5:
        raise StreamdecError("grid must cover [-1.5, 1.5] x [-0.5, 2.5]")
    return base


def nelson_field(grid=NELSON_GRID, normalized=True) -> ScalarField:
    """The stream function of :func:`nelson` alone."""
    base = _nelson_base(grid)
    x, y = base.coords()
    return base.with_values(_zero_ring(nelson_stream(x, y, normalized)))


def nelson(grid=NELSON_GRID, normalized=True, sectors="angle", cell_average=True):
    """Stream function, closed-form velocity, ``rho = rho_{1/2,1} - rho_{0,1/2}`` and ``rho_{0,1}``.

    Cell centers never fall on ``x = 0`` or on ``y in {0, 1, 2}`` when ``n`` is
    even on the default window, so the arctangent is never evaluated at a
    singular argument.

    The last field is ``rho_{0,1}``, which equals ``rho**2`` off the inner
    ray.  On cells cut by that ray, ``rho`` holds a cell average (see
    :func:`nelson_sector`), so squaring it cell by cell is not the same thing.
    """
    f = nelson_field(grid, normalized)
    base = f
    x, y = base.coords()
    vx, vy = nelson_velocity(x, y, normalized)
    v = VectorField(vx, vy, base.h, base.origin)
    h = base.h if cell_average else None
    rho = nelson_sector(x, y, 0.5, 1.0, sectors, h) - nelson_sector(x, y, 0.0, 0.5, sectors, h)
    rho = base.with_values(rho)
    rho2 = base.with_values(nelson_sector(x, y, 0.0, 1.0, sectors, h))
    return f, v, rho, rho2


def lp_norm(v: VectorField, p: float) -> float:
    """Discrete ``L^p`` norm ``(sum |v|^p h^2)^(1/p)`` of a sampled vector field."""
    if p < 1:
        raise StreamdecError("p must be >= 1")
    return float((np.sum(v.magnitude() ** p) * v.h**2) ** (1.0 / p))


def nelson_singular_mask(f: ScalarField, radius_cells: float = 2.0) -> np.ndarray:
    x, y = f.coords()
    near = np.zeros(f.shape, dtype=bool)
    for px, py in NELSON_POINTS:
        near |= np.hypot(x - px, y - py) <= radius_cells * f.h
    return near


DEFAULT_GRIDS = {
    "radial_bump": (256, (-1.25, -1.25), 2.5),
    "two_bumps": (128, (-1.6, -1.6), 3.2),
    "two_bumps_overlap": (128, (-1.6, -1.6), 3.2),
    "volcano": (128, (-1.25, -1.25), 2.5),
}

GENERATORS = {
    "radial_bump": radial_bump,
    "two_bumps": lambda **kw: two_bumps(**kw),
    "two_bumps_overlap": lambda **kw: two_bumps(overlap=True, **kw),
    "volcano": volcano,
}
