import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import field
from streamdec import gallery
from streamdec.errors import StreamdecError
from streamdec.field import grad_norm
from streamdec.monodec import decompose
from streamdec.region import RegionMask
from streamdec.sard import (AC_DETECTED, SINGULAR, PushforwardHistogram, critical_set, e_star,
                            pushforward, singularity_score, terraced_field, value_range, wsp_report)


def zero_difference_oracle(v):
    """Cells whose two central differences vanish exactly (one-sided at the grid edge)."""
    ny, nx = v.shape
    out = np.zeros(v.shape, bool)
    for j in range(ny):
        for i in range(nx):
            def d(a, b):
                return v[a] - v[b]
            dx = d((j, min(i + 1, nx - 1)), (j, max(i - 1, 0)))
            dy = d((min(j + 1, ny - 1), i), (max(j - 1, 0), i))
            out[j, i] = dx == 0 and dy == 0
    return out


def hist(masses, lo=0.0, hi=1.0):
    m = np.asarray(masses, float)
    return PushforwardHistogram(lo, hi, m, float(m.sum()))


def test_radial_critical_set_center_and_exterior():
    f = gallery.radial_bump((65, (-1.25, -1.25), 2.5))
    crit = critical_set(f).bits
    assert crit[32, 32]
    x, y = f.coords()
    r = np.hypot(x, y)
    assert crit[r > 1 + 2 * f.h].all()
    inside = (r < 1 - 2 * f.h) & (r > 0)
    assert not crit[inside].any()


def test_ramp_critical_set_outside_patch():
    f = field(np.zeros((40, 40)), 1 / 40)
    x, y = f.coords()
    v = np.zeros((40, 40))
    v[5:35, 5:35] = 0.2 + 0.5 * x[5:35, 5:35] + 0.3 * y[5:35, 5:35]
    crit = critical_set(f.with_values(v)).bits
    assert not crit[5:35, 5:35].any()
    assert crit[:4].all() and crit[36:].all()


def test_plateau_matches_exact_oracle(rng):
    f = gallery.volcano((64, (-1.25, -1.25), 2.5))
    v = np.round(f.values * 4) / 4
    assert np.array_equal(critical_set(field(v), 0.0).bits, zero_difference_oracle(v))
    for _ in range(10):
        w = rng.integers(0, 3, size=(12, 12)).astype(float)
        assert np.array_equal(critical_set(field(w), 0.0).bits, zero_difference_oracle(w))


def test_e_star_radial_shell_and_coverage():
    f = gallery.radial_bump((256, (-1.25, -1.25), 2.5))
    m = e_star(f, 0.0, 256).bits
    x, y = f.coords()
    r = np.hypot(x, y)
    assert not m[r > 1 + 3 * f.h].any()
    g = grad_norm(f)
    live = g > 1e-6 * g.max()
    assert (m & live).sum() >= 0.99 * live.sum()
    # a length floor drops the small circles near the peak
    big = e_star(f, 2 * math.pi * 0.5, 256).bits
    assert not big[r < 0.5 - 2 * f.h].any()


def test_e_star_isolated_extremum():
    v = np.zeros((31, 31))
    v[15, 15] = 1.0
    m = e_star(field(v), 0.0, 8).bits
    j, i = np.nonzero(m)
    assert m.any() and np.max(np.abs(j - 15)) <= 2 and np.max(np.abs(i - 15)) <= 2


def test_e_star_of_zero_field_is_empty():
    assert not e_star(field(np.zeros((8, 8)))).bits.any()


def test_pushforward_empty_mask():
    f = gallery.radial_bump((32, (-1.25, -1.25), 2.5))
    h = pushforward(f, RegionMask(np.zeros(f.shape, bool), f.h), 16)
    assert h.total == 0 and not h.masses.any()


def test_pushforward_plateau_single_bin():
    v = np.zeros((20, 20))
    v[4:12, 4:10] = 0.7
    f = field(v, 0.1)
    h = pushforward(f, RegionMask(v > 0, 0.1), 64)
    assert np.count_nonzero(h.masses) == 1
    assert h.masses.max() == pytest.approx(48 * 0.01)


def test_pushforward_layer_cake():
    f = gallery.radial_bump((512, (-1.25, -1.25), 2.5))
    n_bins = 32
    h = pushforward(f, RegionMask(f.values > 0, f.h), n_bins)
    assert value_range(f) == (0.0, f.values.max())
    # area{t_k < f <= t_k+1} = pi * dt for f = 1 - r^2; the top bin is cut at max f
    dt = h.t_max / n_bins
    assert np.allclose(h.masses[:-1], math.pi * dt, rtol=0.03)


@given(st.integers(1, 200), st.floats(0.05, 3.0))
@settings(max_examples=30, deadline=None)
def test_pushforward_mass_conserved(n_bins, scale):
    f = gallery.volcano((48, (-1.25, -1.25), 2.5)) * scale
    mask = RegionMask(f.values > 0.1 * scale, f.h)
    h = pushforward(f, mask, n_bins)
    assert h.masses.sum() == pytest.approx(mask.bits.sum() * f.h**2, rel=1e-12)
    assert h.total == pytest.approx(mask.area(), rel=1e-12)


def test_atom_scores_one():
    m = np.zeros(1000)
    m[417] = 2.0
    curve = singularity_score(hist(m))
    assert all(s == 1.0 for d, s in zip(curve.deltas, curve.scores) if d >= 1e-3)
    assert curve.verdict == SINGULAR


def test_uniform_scores_delta():
    curve = singularity_score(hist(np.ones(1000)))
    for d, s in zip(curve.deltas, curve.scores):
        assert s == pytest.approx(d, abs=1e-3)
    assert curve.verdict == AC_DETECTED


def test_mixture_score():
    m = np.full(1000, 0.1 / 1000)
    m[3] += 0.9
    assert singularity_score(hist(m)).score(0.01) == pytest.approx(0.9 + 0.1 * 0.01, abs=1e-9)


def test_empty_pushforward_error():
    with pytest.raises(StreamdecError, match="empty pushforward"):
        singularity_score(hist(np.zeros(8)))


@given(st.lists(st.floats(0, 10), min_size=4, max_size=64).filter(lambda m: sum(m) > 0),
       st.floats(0.1, 10.0))
@settings(max_examples=80, deadline=None)
def test_score_monotone_and_scale_invariant(m, c):
    a = singularity_score(hist(m))
    assert all(x <= y + 1e-15 for x, y in zip(a.scores, a.scores[1:]))
    b = singularity_score(hist(np.asarray(m) * c))
    assert np.allclose(a.scores, b.scores, atol=1e-12)


def test_score_invariant_under_affine_value_change():
    f = gallery.volcano((64, (-1.25, -1.25), 2.5))
    mask = critical_set(f)
    a = singularity_score(pushforward(f, mask, 256))
    g = f * 3.0
    b = singularity_score(pushforward(g, mask, 256))
    assert a.scores == b.scores


def test_wsp_radial_singular():
    f = gallery.radial_bump((256, (-1.25, -1.25), 2.5))
    rep = wsp_report(f, decompose(f))
    assert rep.verdict == SINGULAR
    assert len(rep.components) == 1 and rep.components[0].curve.score(0.01) >= 0.95


def test_wsp_two_disjoint_bumps():
    f = gallery.two_bumps()
    rep = wsp_report(f, decompose(f))
    assert len(rep.components) == 2
    assert rep.verdict == SINGULAR and rep.cross_ok
    assert np.isnan(rep.cross_scores[0, 0])


def test_wsp_terraced_calibration():
    f = terraced_field(128, 3)
    assert critical_set(f).area() > 0.3 * f.values.size * f.h**2
    rep = wsp_report(f, decompose(f))
    assert rep.verdict == AC_DETECTED


def test_wsp_estar_agrees_on_monotone():
    f = gallery.radial_bump((128, (-1.25, -1.25), 2.5))
    rep = wsp_report(f, decompose(f), with_estar=True, n_levels=64)
    c = rep.components[0]
    assert c.estar_curve is None or c.estar_curve.verdict == c.verdict
    d = rep.as_dict()
    assert d["verdict"] == SINGULAR and "note" in d


def test_wsp_threads_match_serial():
    f = gallery.two_bumps((96, (-1.6, -1.6), 3.2))
    comps = decompose(f)
    a = wsp_report(f, comps).as_dict()
    b = wsp_report(f, comps, workers=2).as_dict()
    assert a == b
