"""Acceptance suite shared by ``streamdec verify-all`` and the test-suite.

Each criterion returns a :class:`Result` with the measured numbers, the
bound it is held to, and the wall time against its budget.  Nothing here
loosens a bound to make a check pass.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import gallery, monodec, sard, transport1d, weakdiv
from .curves import (check_tangent_normal, is_simple_polyline, regular_levels,
                     trace_essential_level)
from .field import (ScalarField, VectorField, coarea_perimeter_integral, coarea_report,
                    total_variation)
from .region import FOUR, RegionMask, _pad1, _saturation_report, perimeter_additivity_check


@dataclass
class Result:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    runtime: float = 0.0
    budget: float | None = None

    @property
    def within_budget(self) -> bool:
        return self.budget is None or self.runtime <= self.budget

    @property
    def ok(self) -> bool:
        return self.passed and self.within_budget

    def line(self) -> str:
        tag = "PASS" if self.ok else "FAIL"
        budget = f" / {self.budget:.0f} s" if self.budget is not None else ""
        return f"[{tag}] criterion {self.number}: {self.name} ({self.runtime:.2f} s{budget})"

    def as_dict(self):
        return {"criterion": self.number, "name": self.name, "passed": self.ok,
                "checks_passed": self.passed, "runtime_s": self.runtime, "budget_s": self.budget,
                "details": self.details}


def _random_field(rng, n):
    v = np.zeros((n, n))
    if rng.random() < 0.5:
        v[1:-1, 1:-1] = rng.normal(size=(n - 2, n - 2))
    else:
        # repeated values stress equal breakpoints
        v[1:-1, 1:-1] = rng.integers(-3, 4, size=(n - 2, n - 2))
    return ScalarField(v, 1.0 / n, (0.0, 0.0))


def criterion_1(seed=1):
    rng = np.random.default_rng(seed)
    fields = [_random_field(rng, 32) for _ in range(100)]
    fields += [gallery.radial_bump(), gallery.two_bumps(), gallery.two_bumps(overlap=True),
               gallery.volcano(), gallery.nelson_field()]
    worst = 0.0
    for f in fields:
        tv = total_variation(f)
        worst = max(worst, abs(tv - coarea_perimeter_integral(f)) / tv)
    return worst <= 1e-12, {"max_relative_defect": worst, "bound": 1e-12, "n_fields": len(fields)}


def criterion_2(seed=2):
    rng = np.random.default_rng(seed)
    masks = []
    for _ in range(100):
        p = rng.uniform(0.3, 0.7)
        masks.append(RegionMask(rng.random((64, 64)) < p))
    vol = gallery.volcano()
    for t in np.linspace(0.05, 0.95, 10):
        masks.append(RegionMask(vol.values > t, vol.h))
    add_fail = sat_fail = n_sat = 0
    holes_seen = 0
    for m in masks:
        add_fail += not perimeter_additivity_check(m).holds
        labels, n = ndimage.label(m.bits, structure=FOUR)
        for k, box in enumerate(ndimage.find_objects(labels), start=1):
            # perimeters and holes are translation invariant: check on the padded bounding box;
            # the crop is one 4-component by construction
            c = RegionMask(_pad1(labels[box] == k), m.h)
            r = _saturation_report(c)
            n_sat += 1
            holes_seen += len(r.hole_perimeters)
            sat_fail += not r.holds
    ok = add_fail == 0 and sat_fail == 0
    return ok, {"masks": len(masks), "additivity_failures": add_fail,
                "components_checked": n_sat, "holes_seen": holes_seen,
                "saturation_failures": sat_fail}


def _decomposition_case(f):
    comps = monodec.decompose(f)
    rep = monodec.verify_decomposition(f, comps)
    overlap_cells = sum(n for _, _, n in rep.overlaps)
    mass = 0.0
    for i, j, _ in rep.overlaps:
        both = comps[i].grad_support.bits & comps[j].grad_support.bits
        mass += float(min(_gmag(comps[i].field)[both].sum(), _gmag(comps[j].field)[both].sum()) * f.h**2)
    return {
        "components": len(comps),
        "max_pointwise_defect": rep.max_pointwise_defect,
        "relative_tv_defect": rep.relative_tv_defect,
        "overlap_cells": overlap_cells,
        "overlap_area": overlap_cells * f.h**2,
        "overlap_gradient_mass": mass,
        "all_monotone": all(rep.monotone),
        "edge_coherent": rep.edge_coherent,
    }


def _gmag(f):
    from .field import grad_norm
    return grad_norm(f)


def criterion_3():
    out = {}
    ok = True
    for name, f in (("disjoint", gallery.two_bumps()), ("overlapping", gallery.two_bumps(overlap=True))):
        d = _decomposition_case(f)
        good = (d["components"] == 2 and d["max_pointwise_defect"] <= 1e-12
                and d["relative_tv_defect"] <= 1e-12 and d["overlap_cells"] == 0 and d["all_monotone"])
        d["passed"] = good
        out[name] = d
        ok &= good
    return ok, out


def criterion_4():
    f = gallery.radial_bump((512, (-1.25, -1.25), 2.5))
    rep = coarea_report(f, 64)
    exact = 4 * math.pi / 3
    rel = abs(rep.level_length_integral - exact) / exact
    rel_grad = abs(rep.gradient_integral - exact) / exact
    return rel <= 0.05, {"level_length_integral": rep.level_length_integral,
                         "gradient_integral": rep.gradient_integral, "analytic": exact,
                         "relative_discrepancy": rel, "gradient_relative_discrepancy": rel_grad,
                         "bound": 0.05}


def criterion_5():
    f, v, rho, rho2 = gallery.nelson()
    fam = weakdiv.default_family(f)
    thr = weakdiv.control_threshold(v, fam)
    d_rho = weakdiv.divergence_defect(rho, v, fam)
    d_rho2 = weakdiv.divergence_defect(rho2, v, fam)
    matches = []
    for k in range(len(fam)):
        inside = [fam.contains(k, p) for p in gallery.NELSON_POINTS]
        if sum(inside) != 1:
            continue
        p = gallery.NELSON_POINTS[inside.index(True)]
        sign = 1.0 if p == (0.0, 2.0) else -1.0
        expected = sign * float(fam.phi(k, np.array(p[0]), np.array(p[1])))
        rel = abs(d_rho2.raw[k] - expected) / abs(expected)
        matches.append({"test": k, "point": list(p), "raw": float(d_rho2.raw[k]),
                        "expected": expected, "relative_error": rel})
    good = [m for m in matches if m["relative_error"] <= 0.05]
    ok = d_rho.max_normalized <= thr and len(good) >= 3
    return ok, {"threshold": thr, "defect_rho": d_rho.max_normalized, "dipole_tests": len(matches),
                "dipole_matches_within_5pct": len(good),
                "worst_matching_error": max((m["relative_error"] for m in good), default=None),
                "matches": good}


def radial_velocity(f: ScalarField, radius=1.0):
    """Closed-form ``(-f_y, f_x)`` of the unit radial bump: ``(2y, -2x) / radius^2`` inside."""
    x, y = f.coords()
    inside = x**2 + y**2 < radius**2
    return VectorField(np.where(inside, 2 * y, 0.0) / radius**2, np.where(inside, -2 * x, 0.0) / radius**2,
                       f.h, f.origin)


def constancy_suite(n=256):
    f = gallery.radial_bump((n, (-1.25, -1.25), 2.5))
    v = radial_velocity(f)
    fam = weakdiv.default_family(f)
    thr = weakdiv.control_threshold(v, fam)
    x, y = f.coords()
    inside = f.values > 0
    cases = {
        "eta=f^2": f.values**2,
        "eta=sin(5f)": np.sin(5 * f.values),
        "eta=exp(f)-1": np.expm1(f.values),
        "angle": np.where(inside, np.arctan2(y, x), 0.0),
        "x": np.where(inside, x, 0.0),
        "cos(angle)": np.where(inside, np.cos(np.arctan2(y, x)), 0.0),
    }
    levels = regular_levels(f, 16)
    out = {}
    for name, r in cases.items():
        rho = f.with_values(r)
        cr = weakdiv.constancy_test(rho, f, levels)
        dd = weakdiv.divergence_defect(rho, v, fam).max_normalized
        out[name] = {"max_variance": cr.max_variance, "defect": dd,
                     "constant": cr.max_variance <= 1e-6, "divergence_free": dd <= thr}
    return thr, out


def criterion_6():
    thr, cases = constancy_suite()
    ok = True
    for name, c in cases.items():
        if name.startswith("eta"):
            ok &= c["max_variance"] <= 1e-6 and c["defect"] <= thr
        if name == "angle":
            ok &= c["max_variance"] >= 0.1 and c["defect"] >= 10 * thr
        c["agree"] = c["constant"] == c["divergence_free"]
        ok &= c["agree"]
    return ok, {"threshold": thr, "cases": cases}


def criterion_7(seed=7, n=4096):
    rng = np.random.default_rng(seed)
    w = transport1d.CircleWeight(1.0, rng.uniform(0.5, 2.0, n))
    rho0 = transport1d.state_from_function(w, lambda s: 0.5 + 0.4 * np.sin(2 * math.pi * s))
    jump = transport1d.state_from_function(w, lambda s: 0.5 + 0.4 * np.sin(2 * math.pi * s) + 0.3 * (s > 0.3))
    t1, t2 = 0.37 * w.total(), 0.81 * w.total()
    worst_renorm = worst_profile = 0.0
    jump_cells = 0.0
    for beta in (weakdiv.SQUARE, weakdiv.SINE):
        rep = transport1d.renormalization_check(w, rho0, beta, t1)
        worst_renorm = max(worst_renorm, rep.cell_distance)
        rj = transport1d.renormalization_check(w, jump, beta, t1)
        # cells cut by a jump carry beta(mean) != mean(beta): an averaging effect, not transport
        jump_cells = max(jump_cells, rj.cell_distance)
        worst_profile = max(worst_profile, rep.profile_distance, rj.profile_distance)
    a = transport1d.advect(w, transport1d.advect(w, rho0, t1), t2)
    b = transport1d.advect(w, rho0, t1 + t2)
    scale = float(np.abs(b.values).sum() * w.ds)
    flow = float(np.abs(a.values - b.values).sum() * w.ds) / scale
    m0 = transport1d.weighted_mass(w, rho0)
    mass = max(abs(transport1d.weighted_mass(w, transport1d.advect(w, rho0, t)) - m0) / abs(m0)
               for t in (t1, t2, t1 + t2))
    ok = worst_renorm <= 1e-6 and worst_profile <= 1e-6 and flow <= 1e-9 and mass <= 1e-9
    return ok, {"renormalization_l1": worst_renorm, "profile_l1": worst_profile,
                "discontinuous_data_cell_l1": jump_cells, "flow_relative": flow,
                "mass_relative": mass, "n": n}


def criterion_8():
    _, traj_b, rep = transport1d.nonuniqueness_demo(1.0, 0.25, 0.5, 0.5, n=4096, n_tests=200)
    ok = (rep.initial_sup_B == 0.0 and abs(rep.sup_B - 1.0) <= 1e-12
          and rep.residual_B <= 1e-6 and rep.residual_A <= 1e-12)
    return ok, rep.as_dict()


def criterion_9():
    out = {}
    f = gallery.radial_bump((256, (-1.25, -1.25), 2.5))
    r = sard.wsp_report(f, monodec.decompose(f))
    out["radial"] = {"verdict": r.verdict, "scores": [c.curve.score(0.01) for c in r.components]}
    g = gallery.two_bumps()
    rg = sard.wsp_report(g, monodec.decompose(g))
    out["two_bumps"] = {"verdict": rg.verdict, "scores": [c.curve.score(0.01) for c in rg.components],
                        "cross_ok": rg.cross_ok,
                        "cross_scores": np.where(np.isnan(rg.cross_scores), None, rg.cross_scores).tolist()}
    t = sard.terraced_field()
    rt = sard.wsp_report(t, monodec.decompose(t))
    out["terraced_calibration"] = {"verdict": rt.verdict,
                                   "scores": [c.curve.score(0.01) for c in rt.components]}
    ok = (r.verdict == sard.SINGULAR and all(s >= 0.95 for s in out["radial"]["scores"])
          and rg.verdict == sard.SINGULAR and all(s >= 0.95 for s in out["two_bumps"]["scores"])
          and rg.cross_ok and all(s <= 0.5 for s in out["terraced_calibration"]["scores"]))
    return ok, out


def criterion_10():
    f = gallery.radial_bump((512, (-1.25, -1.25), 2.5))
    worst_len = worst_rms = 0.0
    simple = True
    n_curves = 0
    for t in regular_levels(f, 32):
        cs = trace_essential_level(f, t)
        n_curves += len(cs)
        if len(cs) != 1:
            simple = False
            continue
        c = cs[0]
        exact = 2 * math.pi * math.sqrt(1 - t)
        worst_len = max(worst_len, abs(c.arclength - exact) / exact)
        worst_rms = max(worst_rms, check_tangent_normal(f, c).rms_angle)
        simple &= is_simple_polyline(c.vertices)
    ok = worst_len <= 0.01 and worst_rms <= 0.02 and simple
    return ok, {"max_length_error": worst_len, "max_rms_angle": worst_rms, "all_simple": simple,
                "curves": n_curves}


CRITERIA = [
    (1, "exact discrete coarea", criterion_1, 5.0),
    (2, "perimeter additivity and saturation identity", criterion_2, 5.0),
    (3, "monotone decomposition of two-bump fields", criterion_3, 30.0),
    (4, "continuum coarea on the radial bump", criterion_4, 10.0),
    (5, "chain-rule violation on the nelson field", criterion_5, 60.0),
    (6, "constancy criterion", criterion_6, None),
    (7, "1D renormalization, flow and mass", criterion_7, None),
    (8, "non-uniqueness witness", criterion_8, 10.0),
    (9, "Sard scoring", criterion_9, None),
    (10, "level tracing", criterion_10, None),
]


def run_criterion(number: int) -> Result:
    for k, name, fn, budget in CRITERIA:
        if k == number:
            t0 = time.perf_counter()
            ok, details = fn()
            return Result(k, name, bool(ok), details, time.perf_counter() - t0, budget)
    raise KeyError(number)


def run_all(numbers=None) -> list[Result]:
    return [run_criterion(k) for k, *_ in CRITERIA if numbers is None or k in numbers]
