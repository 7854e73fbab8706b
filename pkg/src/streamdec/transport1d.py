"""Transport along one closed level curve.

On a circle of length ``L`` with weight ``mu = a ds + sum m_i delta_{s_i}``
the equation ``d_t(mu rho) + d_s rho = 0`` becomes a pure shift in the hidden
variable ``tau = A(s) = mu([0, s])``:  ``rho(t, s) = rho_hat(A(s) - t)``
modulo ``A(L)``.  An atom owns the hidden interval ``[A(s_i-), A(s_i+)]``.

States are piecewise constant: one value per segment of a uniform ``n``
segment grid plus one value per atom.  Each value is the ``mu``-average of the
exact solution over its hidden interval.  Weighted mass is therefore conserved
exactly.  Every state also keeps the exact hidden profile it came from, so
composing two advections equals one advection over the summed time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import StreamdecError


@dataclass(frozen=True, eq=False)
class CircleWeight:
    L: float
    ac: np.ndarray
    atoms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        ac = np.asarray(self.ac, dtype=float).ravel()
        atoms = tuple(sorted((float(s) % self.L, float(m)) for s, m in self.atoms))
        if not self.L > 0 or len(ac) == 0:
            raise StreamdecError("need L > 0 and at least one segment")
        if np.any(ac < 0) or not np.all(np.isfinite(ac)):
            raise StreamdecError("densities must be finite and non-negative")
        if any(m <= 0 for _, m in atoms):
            raise StreamdecError("atom masses must be positive")
        object.__setattr__(self, "ac", ac)
        object.__setattr__(self, "atoms", atoms)
        # strictly increasing A: no segment of zero density
        if np.any(ac <= 0):
            raise StreamdecError("non-increasing A: zero density on a segment")

    @property
    def n(self) -> int:
        return len(self.ac)

    @property
    def ds(self) -> float:
        return self.L / self.n

    def pieces(self):
        """Hidden layout: ``(s_lo, s_hi, tau_lo, tau_hi, owner)`` in order of ``s``.

        ``owner`` is a segment index ``j >= 0`` or ``-(k + 1)`` for atom ``k``.
        """
        ds = self.ds
        out = []
        tau = 0.0
        atoms = list(enumerate(self.atoms))
        ai = 0
        for j in range(self.n):
            lo, hi = j * ds, (j + 1) * ds
            s = lo
            while ai < len(atoms) and atoms[ai][1][0] < hi:
                k, (s0, m) = atoms[ai]
                if s0 > s:
                    t1 = tau + self.ac[j] * (s0 - s)
                    out.append((s, s0, tau, t1, j))
                    tau = t1
                    s = s0
                out.append((s0, s0, tau, tau + m, -(k + 1)))
                tau += m
                ai += 1
            t1 = tau + self.ac[j] * (hi - s)
            out.append((s, hi, tau, t1, j))
            tau = t1
        return out

    def total(self) -> float:
        return float(self.ac.sum() * self.ds + sum(m for _, m in self.atoms))

    def hidden_of(self, s) -> np.ndarray:
        """``A(s)`` for the absolutely continuous part plus atoms at or before ``s``."""
        s = np.asarray(s, dtype=float)
        edges = np.concatenate([[0.0], np.cumsum(self.ac * self.ds)])
        j = np.clip((s // self.ds).astype(int), 0, self.n - 1)
        A = edges[j] + self.ac[j] * (s - j * self.ds)
        for s0, m in self.atoms:
            A = A + m * (s >= s0)
        return A


@dataclass(frozen=True, eq=False)
class HiddenProfile:
    """Piecewise constant ``rho_hat`` on ``[0, M)``, evaluated at ``tau - shift`` periodically."""

    breaks: np.ndarray      # 0 = b_0 < ... < b_K = M
    values: np.ndarray      # K values
    shift: float = 0.0

    @property
    def M(self) -> float:
        return float(self.breaks[-1])

    def _F(self, x):
        """Periodic antiderivative of the unshifted profile."""
        cum = np.concatenate([[0.0], np.cumsum(self.values * np.diff(self.breaks))])
        M = self.M
        k = np.floor(x / M)
        return np.interp(x - k * M, self.breaks, cum) + k * cum[-1]

    def integral(self, a, b):
        """Integral of the shifted profile over ``[a, b]``."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return self._F(b - self.shift) - self._F(a - self.shift)

    def map(self, beta) -> "HiddenProfile":
        return HiddenProfile(self.breaks, np.asarray(beta(self.values), dtype=float), self.shift)

    def shifted(self, t: float) -> "HiddenProfile":
        return HiddenProfile(self.breaks, self.values, math.fmod(self.shift + t, self.M))

    def pieces(self):
        """Breaks and values of the shifted profile on ``[0, M)``."""
        M = self.M
        b = np.mod(self.breaks[:-1] + self.shift, M)
        order = np.argsort(b, kind="stable")
        b, v = b[order], self.values[order]
        if b[0] > 0:
            b = np.concatenate([[0.0], b])
            v = np.concatenate([[v[-1]], v])
        return np.concatenate([b, [M]]), v


@dataclass(frozen=True, eq=False)
class CircleState:
    values: np.ndarray
    atom_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    time: float = 0.0
    bound: float | None = None
    profile: HiddenProfile | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).ravel())
        object.__setattr__(self, "atom_values", np.asarray(self.atom_values, dtype=float).ravel())

    @property
    def sup(self) -> float:
        vals = np.concatenate([self.values, self.atom_values])
        return float(np.abs(vals).max()) if vals.size else 0.0

    def max_principle_ok(self, tol: float = 1e-12) -> bool:
        return self.bound is None or self.sup <= self.bound * (1 + tol) + tol


def _profile_of(w: CircleWeight, st: CircleState) -> HiddenProfile:
    if st.profile is not None:
        return st.profile
    if len(st.values) != w.n or len(st.atom_values) != len(w.atoms):
        raise StreamdecError("state does not match the weight's grid")
    br, vals = [0.0], []
    for _, _, t0, t1, owner in w.pieces():
        if t1 <= t0:
            continue
        vals.append(st.values[owner] if owner >= 0 else st.atom_values[-owner - 1])
        br.append(t1)
    return HiddenProfile(np.array(br), np.array(vals))


def _project(w: CircleWeight, prof: HiddenProfile):
    """``mu``-averages of a hidden profile over segments and atoms."""
    seg = np.zeros(w.n)
    seg_mass = np.zeros(w.n)
    atoms = np.zeros(len(w.atoms))
    pcs = w.pieces()
    t0 = np.array([p[2] for p in pcs])
    t1 = np.array([p[3] for p in pcs])
    owner = np.array([p[4] for p in pcs])
    integ = prof.integral(t0, t1)
    is_seg = owner >= 0
    np.add.at(seg, owner[is_seg], integ[is_seg])
    np.add.at(seg_mass, owner[is_seg], (t1 - t0)[is_seg])
    seg = seg / seg_mass
    for p, k in zip(np.flatnonzero(~is_seg), -owner[~is_seg] - 1):
        atoms[k] = integ[p] / (t1[p] - t0[p])
    return seg, atoms


def state_from_function(w: CircleWeight, rho, atom_values=None, bound=None) -> CircleState:
    """Segment values sampled from ``rho(s)`` at midpoints."""
    mids = (np.arange(w.n) + 0.5) * w.ds
    av = np.zeros(len(w.atoms)) if atom_values is None else np.asarray(atom_values, dtype=float)
    return CircleState(np.asarray(rho(mids), dtype=float), av, 0.0, bound)


def advect(w: CircleWeight, rho0: CircleState, t: float) -> CircleState:
    """Exact solution at time ``rho0.time + t``: shift the hidden profile by ``t``, then average."""
    prof = _profile_of(w, rho0)
    if t == 0:
        return replace(rho0, profile=prof)
    new = prof.shifted(t)
    seg, atoms = _project(w, new)
    return CircleState(seg, atoms, rho0.time + t, rho0.bound, new)


def apply_beta(st: CircleState, w: CircleWeight, beta) -> CircleState:
    """``beta`` applied to a state; the exact profile is mapped alongside."""
    prof = _profile_of(w, st).map(beta)
    return CircleState(np.asarray(beta(st.values), dtype=float),
                       np.asarray(beta(st.atom_values), dtype=float), st.time, None, prof)


def weighted_mass(w: CircleWeight, st: CircleState) -> float:
    return float(np.sum(st.values * w.ac) * w.ds + sum(m * v for (_, m), v in zip(w.atoms, st.atom_values)))


@dataclass(frozen=True)
class RenormReport:
    cell_distance: float
    profile_distance: float
    t: float

    def as_dict(self):
        return dict(self.__dict__)


def renormalization_check(w: CircleWeight, rho0: CircleState, beta, t: float) -> RenormReport:
    """L1 distance (in ``ds``) between ``beta(advect(rho0))`` and ``advect(beta(rho0))``.

    ``cell_distance`` compares segment values and includes the averaging
    error.  ``profile_distance`` compares the exact solutions.
    """
    lhs = apply_beta(advect(w, rho0, t), w, beta)
    rhs = advect(w, apply_beta(rho0, w, beta), t)
    cell = float(np.abs(lhs.values - rhs.values).sum() * w.ds)
    if len(w.atoms):
        cell += float(sum(m * abs(a - b) for (_, m), a, b in zip(w.atoms, lhs.atom_values, rhs.atom_values)))
    b1, v1 = lhs.profile.pieces()
    b2, v2 = rhs.profile.pieces()
    br = np.union1d(b1, b2)
    mid = 0.5 * (br[:-1] + br[1:])
    d1 = v1[np.searchsorted(b1, mid, side="right") - 1]
    d2 = v2[np.searchsorted(b2, mid, side="right") - 1]
    prof = float(np.sum(np.abs(d1 - d2) * np.diff(br)))
    return RenormReport(cell, prof, float(t))


# ---------------------------------------------------------------------------
# weak formulation

@dataclass(frozen=True)
class Snapshot:
    """Piecewise constant ``rho(t, .)`` on ``[0, L)`` plus atom values."""

    breaks: np.ndarray
    values: np.ndarray
    atom_values: np.ndarray


def snapshot_of(w: CircleWeight, st: CircleState, exact: bool = True) -> Snapshot:
    """Arclength picture of a state; ``exact`` maps the hidden profile back to ``s``."""
    if not exact or st.profile is None:
        br = np.arange(w.n + 1) * w.ds
        return Snapshot(br, st.values, st.atom_values)
    hb, hv = st.profile.pieces()
    pcs = [p for p in w.pieces() if p[4] >= 0 and p[3] > p[2]]
    s0 = np.array([p[0] for p in pcs])
    s1 = np.array([p[1] for p in pcs])
    t0 = np.array([p[2] for p in pcs])
    t1 = np.array([p[3] for p in pcs])
    inner = hb[1:-1]
    # hidden breaks inside or on the ends of an absolutely continuous piece map to s-breaks
    k = np.searchsorted(t1, inner, side="left")
    k = np.clip(k, 0, len(pcs) - 1)
    ok = (inner >= t0[k]) & (inner <= t1[k])
    s_br = s0[k[ok]] + (inner[ok] - t0[k[ok]]) / (t1[k[ok]] - t0[k[ok]]) * (s1[k[ok]] - s0[k[ok]])
    br = np.unique(np.concatenate([[0.0, w.L], s_br, [s for s, _ in w.atoms]]))
    br = br[(br >= 0) & (br <= w.L)]
    mid = 0.5 * (br[:-1] + br[1:])
    tau_mid = w.hidden_of(mid)
    vals = hv[np.clip(np.searchsorted(hb, tau_mid, side="right") - 1, 0, len(hv) - 1)]
    return Snapshot(br, vals, st.atom_values)


@dataclass(frozen=True, eq=False)
class TestFunctions:
    """``Phi(t, s) = psi(t) chi(s)`` with ``psi(T) = 0`` and ``chi`` a short trigonometric sum."""

    __test__ = False

    L: float
    T: float
    psi_coef: np.ndarray     # (J, 3): psi(t) = (1 - t/T)^2 (c0 + c1 u + c2 u^2), u = t/T
    cos_coef: np.ndarray     # (J, K+1)
    sin_coef: np.ndarray     # (J, K+1)

    def __len__(self):
        return len(self.psi_coef)

    def psi(self, t):
        u = t / self.T
        c = self.psi_coef
        return (1 - u) ** 2 * (c[:, 0] + c[:, 1] * u + c[:, 2] * u**2)

    def dpsi(self, t):
        u = t / self.T
        c = self.psi_coef
        p = c[:, 0] + c[:, 1] * u + c[:, 2] * u**2
        dp = c[:, 1] + 2 * c[:, 2] * u
        return (-2 * (1 - u) * p + (1 - u) ** 2 * dp) / self.T

    def _k(self):
        return 2 * np.pi * np.arange(self.cos_coef.shape[1]) / self.L

    def chi(self, s):
        """``chi_j(s)`` for every test function: shape ``(J, len(s))``."""
        ks = self._k()[:, None] * np.asarray(s, dtype=float)[None, :]
        return self.cos_coef @ np.cos(ks) + self.sin_coef @ np.sin(ks)

    def chi_integral(self, s):
        """Antiderivatives of every ``chi_j``, shape ``(J, len(s))``."""
        k = self._k()
        s = np.asarray(s, dtype=float)
        ks = k[1:, None] * s[None, :]
        inv = 1.0 / k[1:]
        return (np.outer(self.cos_coef[:, 0], s)
                + (self.cos_coef[:, 1:] * inv) @ np.sin(ks)
                - (self.sin_coef[:, 1:] * inv) @ np.cos(ks))


def random_test_functions(L: float, T: float, count: int, rng, K: int = 2) -> TestFunctions:
    decay = 1.0 / (1.0 + np.arange(K + 1)) ** 2
    psi = rng.uniform(-1, 1, size=(count, 3))
    c = rng.uniform(-1, 1, size=(count, K + 1)) * decay
    s = rng.uniform(-1, 1, size=(count, K + 1)) * decay
    s[:, 0] = 0.0
    return TestFunctions(float(L), float(T), psi, c, s)


def weak_residual(w: CircleWeight, snapshot, fam: TestFunctions, n_time: int = 64) -> np.ndarray:
    """Residual of ``d_t(mu rho) + d_s rho = 0`` against each test function.

    ``R(Phi) = int int rho Phi_t dmu dt + int int rho Phi_s ds dt + int rho_0 Phi(0) dmu``,
    zero for a weak solution.  ``snapshot(t)`` returns a :class:`Snapshot`.
    The ``s`` integrals are exact on each constant piece; ``t`` uses
    Gauss-Legendre on ``[0, T]``.
    """
    T = fam.T
    x, wt = np.polynomial.legendre.leggauss(n_time)
    times = 0.5 * T * (x + 1)
    wt = 0.5 * T * wt
    atom_s = np.array([s for s, _ in w.atoms])
    atom_m = np.array([m for _, m in w.atoms])

    grid = np.arange(w.n + 1) * w.ds

    def pairing(snap: Snapshot):
        """For every j: (int rho chi_j dmu, int rho chi_j' ds)."""
        br = snap.breaks
        # the density a is constant on grid segments: split pieces at grid nodes
        allb = np.union1d(br, grid)
        mid = 0.5 * (allb[:-1] + allb[1:])
        val = snap.values[np.clip(np.searchsorted(br, mid, side="right") - 1, 0, len(snap.values) - 1)]
        a = w.ac[np.clip((mid // w.ds).astype(int), 0, w.n - 1)]
        out_mu = np.diff(fam.chi_integral(allb), axis=1) @ (val * a)
        out_s = np.diff(fam.chi(allb), axis=1) @ val
        if len(atom_s):
            out_mu = out_mu + fam.chi(atom_s) @ (atom_m * snap.atom_values)
        return out_mu, out_s

    res = np.zeros(len(fam))
    for t, wq in zip(times, wt):
        pm, ps = pairing(snapshot(t))
        res += wq * (fam.dpsi(t) * pm + fam.psi(t) * ps)
    pm0, _ = pairing(snapshot(0.0))
    res += fam.psi(0.0) * pm0
    return res


# ---------------------------------------------------------------------------
# non-uniqueness with an atom

@dataclass(frozen=True)
class NonuniquenessReport:
    residual_A: float
    residual_B: float
    sup_B: float
    initial_sup_A: float
    initial_sup_B: float
    atom_sup: float
    max_principle_flag: bool
    n_tests: int

    def as_dict(self):
        return dict(self.__dict__)


def _front_snapshot(L, s0, t, atom_value):
    """Indicator of ``(s0, s0 + t)`` modulo ``L``."""
    a, b = s0, s0 + t
    if b <= L:
        br = np.unique([0.0, a, b, L])
        mid = 0.5 * (br[:-1] + br[1:])
        vals = ((mid > a) & (mid < b)).astype(float)
    else:
        br = np.unique([0.0, b - L, a, L])
        mid = 0.5 * (br[:-1] + br[1:])
        vals = ((mid > a) | (mid < b - L)).astype(float)
    return Snapshot(br, vals, np.array([atom_value]))


def front_cells(w: CircleWeight, s0: float, t: float) -> np.ndarray:
    """Segment averages of the indicator of ``(s0, s0 + t)`` modulo ``L``."""
    lo = np.arange(w.n) * w.ds
    hi = lo + w.ds

    def overlap(a, b):
        return np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0, None)

    cov = overlap(s0, s0 + t) + overlap(s0 - w.L, s0 + t - w.L)
    return cov / w.ds


def nonuniqueness_demo(L: float, s0: float, m: float, T: float, n: int = 4096,
                       n_times: int = 11, n_tests: int = 200, seed: int = 0, bound: float = 1.0):
    """Two solutions with zero initial data on a circle with one atom.

    A is identically zero.  B is the indicator of ``(s0, s0 + t)`` with atom
    value ``-t / m``: the atom empties into the circle at unit rate.
    """
    if not 0 < T < L:
        raise StreamdecError("need 0 < T < L (the front would wrap onto the atom)")
    if m <= 0:
        raise StreamdecError("atom mass must be positive")
    w = CircleWeight(L, np.ones(n), ((s0, m),))
    times = np.linspace(0.0, T, n_times)
    traj_A = [CircleState(np.zeros(n), np.zeros(1), float(t), bound) for t in times]
    traj_B = [CircleState(front_cells(w, w.atoms[0][0], t), np.array([-t / m]), float(t), bound) for t in times]
    rng = np.random.default_rng(seed)
    fam = random_test_functions(L, T, n_tests, rng)
    sA = w.atoms[0][0]
    rA = weak_residual(w, lambda t: Snapshot(np.array([0.0, L]), np.zeros(1), np.zeros(1)), fam)
    rB = weak_residual(w, lambda t: _front_snapshot(L, sA, t, -t / m), fam)
    report = NonuniquenessReport(
        residual_A=float(np.abs(rA).max()),
        residual_B=float(np.abs(rB).max()),
        sup_B=max(float(np.abs(s.values).max()) for s in traj_B),
        initial_sup_A=traj_A[0].sup,
        initial_sup_B=traj_B[0].sup,
        atom_sup=T / m,
        max_principle_flag=bool(T / m > bound),
        n_tests=n_tests,
    )
    return traj_A, traj_B, report


def trajectory_rows(traj, w: CircleWeight):
    """CSV rows ``(t, s, value)``: segment midpoints, then each atom at its position."""
    mids = (np.arange(w.n) + 0.5) * w.ds
    for st in traj:
        for s, v in zip(mids, st.values):
            yield st.time, float(s), float(v)
        for (s, _), v in zip(w.atoms, st.atom_values):
            yield st.time, float(s), float(v)


# ---------------------------------------------------------------------------
# two dimensions: transport along the level curves of a monotone field

@dataclass(frozen=True, eq=False)
class FoliationReport:
    levels: list[float]
    covered: np.ndarray = field(repr=False)
    band_mass_before: list[float] = field(default_factory=list)
    band_mass_after: list[float] = field(default_factory=list)

    @property
    def max_relative_mass_change(self) -> float:
        out = 0.0
        for a, b in zip(self.band_mass_before, self.band_mass_after):
            scale = max(abs(a), 1e-300)
            out = max(out, abs(b - a) / scale)
        return out

    def as_dict(self):
        return {
            "levels": self.levels,
            "covered_cells": int(self.covered.sum()),
            "band_mass_before": self.band_mass_before,
            "band_mass_after": self.band_mass_after,
            "max_relative_mass_change": self.max_relative_mass_change,
        }


def _advect_band(f, rho0_vals, cells, curve, t, dlevel, fit_degree):
    """Change of ``rho0`` on one band after advecting its fluctuation along the level curve.

    Cells are binned by the phase of their nearest curve point.  The travel
    time density of a bin is its cell area divided by the band width
    ``dlevel``, the discrete form of ``ds / |grad f|``.  Because the same
    weights count the cells, the band mass is conserved exactly.
    """
    from scipy.spatial import cKDTree

    # parametrize along v = (-f_y, f_x), which runs against the curve orientation
    verts = curve.vertices[::-1]
    seg = np.roll(verts, -1, axis=0) - verts
    seg_len = np.hypot(*seg.T)
    L = float(seg_len.sum())
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    m = max(4 * int(math.ceil(L / f.h)), 2 * len(verts))
    sd = (np.arange(m) + 0.5) * (L / m)
    j = np.clip(np.searchsorted(cum, sd, side="right") - 1, 0, len(verts) - 1)
    frac = (sd - cum[j]) / np.where(seg_len[j] > 0, seg_len[j], 1.0)
    pts = verts[j] + frac[:, None] * seg[j]
    x, y = f.coords()
    _, near = cKDTree(pts).query(np.stack([x[cells], y[cells]], axis=1))
    phase = sd[near]
    n = max(8, int(L / (2 * f.h)))
    while True:
        bins = np.minimum((phase / (L / n)).astype(int), n - 1)
        counts = np.bincount(bins, minlength=n)
        if counts.min() > 0 or n == 1:
            break
        n = max(1, n // 2)
    ds = L / n
    fv = f.values[cells]
    r = rho0_vals[cells]
    deg = min(fit_degree, len(np.unique(fv)) - 1)
    fluct = r - np.polyval(np.polyfit(fv, r, deg), fv) if deg >= 0 else r
    prof = np.bincount(bins, weights=fluct, minlength=n) / counts
    a = counts * f.h**2 / (dlevel * ds)
    w = CircleWeight(L, a)
    st0 = CircleState(prof, np.zeros(0))
    st1 = advect(w, st0, t)
    return (st1.values - st0.values)[bins]


def foliate_and_advect(f, rho0, t: float, levels=32, fit_degree: int = 3, eps_grad: float = 1e-6,
                       workers: int = 1):
    """Move ``rho0`` for time ``t`` along the flow of ``v = (-f_y, f_x)``, level by level.

    Cells are grouped into bands around regular levels.  On each band, the
    part of ``rho0`` that is a function of ``f`` stays fixed.  The remaining
    fluctuation is advected along the band's level curve with a travel-time
    weight built from the band's own cells, so band masses are conserved.  Cells outside every band, or with
    ``|grad f| <= eps_grad * max |grad f|``, keep their value.
    """
    from concurrent.futures import ThreadPoolExecutor

    from .curves import regular_levels, trace_essential_level
    from .field import grad_norm
    from .monodec import is_monotone

    if not f.same_grid(rho0):
        raise StreamdecError("grid mismatch between f and rho0")
    if not is_monotone(f):
        raise StreamdecError("expected monotone f: run decompose first")
    lv = regular_levels(f, levels) if isinstance(levels, int) else sorted(float(x) for x in levels)
    gnorm = grad_norm(f)
    out = rho0.values.copy()
    covered = np.zeros(f.shape, dtype=bool)
    if not lv:
        return rho0.with_values(out), FoliationReport([], covered)
    lv_arr = np.asarray(lv)
    mids = 0.5 * (lv_arr[1:] + lv_arr[:-1])
    first = lv_arr[0] - (mids[0] - lv_arr[0] if len(mids) else abs(lv_arr[0]))
    last = lv_arr[-1] + (lv_arr[-1] - mids[-1] if len(mids) else abs(lv_arr[-1]))
    edges = np.concatenate([[first], mids, [last]])
    fv = f.values
    active = (gnorm > eps_grad * gnorm.max()) & (fv != 0) & (fv > edges[0]) & (fv < edges[-1])
    band = np.clip(np.searchsorted(edges, fv, side="right") - 1, 0, len(lv) - 1)
    jobs = []
    for k, level in enumerate(lv):
        cells = active & (band == k)
        if not cells.any():
            continue
        curves = trace_essential_level(f, level)
        if len(curves) != 1:
            continue
        jobs.append((k, cells, curves[0]))
    before, after = [], []

    def run(job):
        k, cells, curve = job
        if t == 0:
            return np.zeros(int(cells.sum()))
        return _advect_band(f, rho0.values, cells, curve, t, edges[k + 1] - edges[k], fit_degree)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            deltas = list(ex.map(run, jobs))
    else:
        deltas = [run(j) for j in jobs]
    h2 = f.h**2
    for (k, cells, _), d in zip(jobs, deltas):
        before.append(float(out[cells].sum() * h2))
        out[cells] = out[cells] + d
        after.append(float(out[cells].sum() * h2))
        covered |= cells
    return rho0.with_values(out), FoliationReport(lv, covered, before, after)
