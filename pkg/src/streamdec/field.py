"""Grid-sampled stream functions, their rotated gradients and total variation.

Samples live at cell centers of a uniform ``ny x nx`` grid with spacing ``h``.
Outside the grid every field is zero, which is how compact support is modelled:
the exterior acts as one extra "virtual" cell of value 0 next to every boundary
cell.  All perimeter and total-variation sums below include those boundary
pairs, so the discrete coarea identity is exact.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ParseError, StreamdecError


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Cell-centered samples ``values[j, i]`` at ``origin + (i*h, j*h)``."""

    values: np.ndarray
    h: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.size == 0:
            raise StreamdecError("values must be a non-empty 2D array")
        if not self.h > 0:
            raise StreamdecError("h must be positive")
        if not np.all(np.isfinite(vals)):
            raise StreamdecError("values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical x and y of every cell center, each shaped like ``values``."""
        x = self.origin[0] + self.h * np.arange(self.nx)
        y = self.origin[1] + self.h * np.arange(self.ny)
        return np.meshgrid(x, y)

    def bounds(self) -> tuple[float, float, float, float]:
        """Physical extent ``(xmin, xmax, ymin, ymax)`` covered by the cells."""
        x0 = self.origin[0] - 0.5 * self.h
        y0 = self.origin[1] - 0.5 * self.h
        return x0, x0 + self.nx * self.h, y0, y0 + self.ny * self.h

    def with_values(self, values) -> "ScalarField":
        return ScalarField(values, self.h, self.origin)

    def same_grid(self, other) -> bool:
        return (
            self.shape == tuple(other.shape)
            and self.h == other.h
            and tuple(self.origin) == tuple(other.origin)
        )

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __neg__(self):
        return self.with_values(-self.values)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__


def _vals(x):
    return x.values if isinstance(x, ScalarField) else x


@dataclass(frozen=True, eq=False)
class VectorField:
    vx: np.ndarray
    vy: np.ndarray
    h: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    @property
    def shape(self) -> tuple[int, int]:
        return self.vx.shape

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.vx, self.vy)


def make_grid(n: int, lo: tuple[float, float], extent: float, ny: int | None = None):
    """Grid header ``(shape, h, origin)`` for ``n`` cells spanning ``extent`` from ``lo``."""
    ny = n if ny is None else ny
    h = extent / n
    origin = (lo[0] + 0.5 * h, lo[1] + 0.5 * h)
    return (ny, n), h, origin


# ---------------------------------------------------------------------------
# file format

def field_to_json(f: ScalarField) -> dict:
    return {
        "nx": f.nx,
        "ny": f.ny,
        "h": f.h,
        "origin": [f.origin[0], f.origin[1]],
        "data": f.values.ravel().tolist(),
    }


def save_field(f: ScalarField, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(field_to_json(f), fh)


def field_from_json(obj: Any) -> ScalarField:
    if not isinstance(obj, dict):
        raise ParseError("field file must hold a JSON object")
    for key in ("nx", "ny", "h", "origin", "data"):
        if key not in obj:
            raise ParseError(f"missing field '{key}'")
    nx, ny = obj["nx"], obj["ny"]
    for name, n in (("nx", nx), ("ny", ny)):
        if not isinstance(n, int) or isinstance(n, bool) or n <= 0:
            raise ParseError(f"'{name}' must be a positive integer")
    h = obj["h"]
    if not isinstance(h, (int, float)) or isinstance(h, bool) or not math.isfinite(h) or h <= 0:
        raise ParseError("'h' must be a positive finite number")
    origin = obj["origin"]
    if (
        not isinstance(origin, list)
        or len(origin) != 2
        or not all(isinstance(o, (int, float)) and not isinstance(o, bool) for o in origin)
    ):
        raise ParseError("'origin' must be a pair of numbers")
    data = obj["data"]
    if not isinstance(data, list):
        raise ParseError("'data' must be a list")
    if len(data) != nx * ny:
        raise ParseError(f"length mismatch: nx*ny = {nx * ny}, data has {len(data)}")
    for k, x in enumerate(data):
        if not isinstance(x, (int, float)) or isinstance(x, bool) or not math.isfinite(x):
            raise ParseError(f"non-finite or non-numeric value in 'data' at index {k}")
    values = np.asarray(data, dtype=float).reshape(ny, nx)
    border = np.ones_like(values, dtype=bool)
    border[1:-1, 1:-1] = False
    bad = border & (values != 0)
    zeroed = int(bad.sum())
    if zeroed:
        values[bad] = 0.0
    return ScalarField(values, float(h), (float(origin[0]), float(origin[1])),
                       meta={"boundary_zeroed": zeroed})


def load_field(path: str | os.PathLike) -> ScalarField:
    """Read a field file; non-zero boundary samples are zeroed and counted in ``meta``."""
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed header: {exc}") from None
    return field_from_json(obj)


def save_velocity(v: VectorField, path: str | os.PathLike) -> None:
    """Velocity file: the field header with ``vx`` and ``vy`` arrays in place of ``data``."""
    obj = {"nx": v.shape[1], "ny": v.shape[0], "h": v.h, "origin": [v.origin[0], v.origin[1]],
           "vx": v.vx.ravel().tolist(), "vy": v.vy.ravel().tolist()}
    with open(path, "w") as fh:
        json.dump(obj, fh)


def load_velocity(path: str | os.PathLike) -> VectorField:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed header: {exc}") from None
    if not isinstance(obj, dict) or "vx" not in obj or "vy" not in obj:
        raise ParseError("velocity file needs 'vx' and 'vy'")
    parts = []
    for key in ("vx", "vy"):
        parts.append(field_from_json({**{k: obj.get(k) for k in ("nx", "ny", "h", "origin")}, "data": obj[key]}))
    # velocity samples are kept as written, boundary included
    raw = [np.asarray(obj[k], dtype=float).reshape(parts[0].shape) for k in ("vx", "vy")]
    return VectorField(raw[0], raw[1], parts[0].h, parts[0].origin)


# ---------------------------------------------------------------------------
# differential operators

def gradient(f: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Central differences inside, one-sided at the grid edges; zero along a length-1 axis."""
    v = f.values
    fy = np.gradient(v, f.h, axis=0) if v.shape[0] > 1 else np.zeros_like(v)
    fx = np.gradient(v, f.h, axis=1) if v.shape[1] > 1 else np.zeros_like(v)
    return fx, fy


def perp_gradient(f: ScalarField) -> VectorField:
    """``v = (-d_y f, d_x f)``."""
    fx, fy = gradient(f)
    return VectorField(-fy, fx, f.h, f.origin)


def grad_norm(f: ScalarField) -> np.ndarray:
    fx, fy = gradient(f)
    return np.hypot(fx, fy)


def divergence(v: VectorField) -> np.ndarray:
    """Divergence with the same stencil as :func:`gradient`."""
    return np.gradient(v.vx, v.h, axis=1) + np.gradient(v.vy, v.h, axis=0)


def edge_pairs(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint values of every 4-adjacent pair, including pairs with the exterior."""
    p = np.pad(np.asarray(values, dtype=float), 1)
    a = np.concatenate([p[:, :-1].ravel(), p[:-1, :].ravel()])
    b = np.concatenate([p[:, 1:].ravel(), p[1:, :].ravel()])
    keep = (a != 0) | (b != 0)
    return a[keep], b[keep]


def total_variation(f: ScalarField) -> float:
    """Anisotropic TV: ``h * sum |f(p) - f(q)|`` over 4-adjacent pairs."""
    a, b = edge_pairs(f.values)
    return float(np.abs(a - b).sum() * f.h)


def breakpoints(f: ScalarField | np.ndarray) -> np.ndarray:
    """Sorted distinct values, always including the exterior value 0."""
    vals = f.values if isinstance(f, ScalarField) else np.asarray(f)
    return np.unique(np.concatenate([vals.ravel(), [0.0]]))


def superlevel_perimeter_counts(f: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Edge counts of ``{f > t}`` on each interval between consecutive breakpoints.

    Returns ``(u, counts)`` with ``counts[k]`` the number of boundary edges of
    ``{f > t}`` for ``t`` in ``[u[k], u[k+1])``.
    """
    a, b = edge_pairs(f.values)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    u = breakpoints(f)
    lo, hi = np.sort(lo), np.sort(hi)
    # edge crosses level t  <=>  lo <= t < hi
    below_lo = np.searchsorted(lo, u[:-1], side="right")
    below_hi = np.searchsorted(hi, u[:-1], side="right")
    return u, below_lo - below_hi


def coarea_perimeter_integral(f: ScalarField) -> float:
    """``integral P({f > t}) dt`` summed exactly over the breakpoint intervals."""
    u, counts = superlevel_perimeter_counts(f)
    return float(np.sum(np.diff(u) * counts) * f.h)


@dataclass(frozen=True)
class CoareaReport:
    gradient_integral: float
    level_length_integral: float
    relative_discrepancy: float
    tv: float
    perimeter_integral: float
    exact_relative_defect: float
    n_levels: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def coarea_report(f: ScalarField, n_levels: int) -> CoareaReport:
    """Compare ``sum |grad f| h^2`` with the integral of traced level-curve lengths.

    Also returns the exact discrete pair (TV against the edge-count perimeter
    integral), which agrees to rounding.
    """
    from .curves import level_lengths, regular_levels

    if n_levels < 2:
        raise StreamdecError("n_levels must be at least 2")
    lo, hi = float(f.values.min()), float(f.values.max())
    lo, hi = min(lo, 0.0), max(hi, 0.0)
    if hi == lo:
        raise StreamdecError("constant field")
    grad_int = float(grad_norm(f).sum() * f.h**2)
    levels = regular_levels(f, n_levels)
    dt = (hi - lo) / n_levels
    length_int = float(sum(level_lengths(f, levels)) * dt)
    tv = total_variation(f)
    per = coarea_perimeter_integral(f)
    return CoareaReport(
        gradient_integral=grad_int,
        level_length_integral=length_int,
        relative_discrepancy=abs(grad_int - length_int) / grad_int,
        tv=tv,
        perimeter_integral=per,
        exact_relative_defect=abs(tv - per) / tv if tv else 0.0,
        n_levels=n_levels,
    )
