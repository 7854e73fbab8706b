import math

import numpy as np
import pytest

from streamdec import gallery
from streamdec.errors import StreamdecError
from streamdec.field import total_variation
from streamdec.monodec import decompose, extract_saturated, is_monotone
from streamdec.region import RegionMask, holes
from streamdec.weakdiv import SQUARE, chain_rule_test, control_threshold, default_family, divergence_defect

NELSON_256 = (256, (-1.5, -0.5), 3.0)


@pytest.fixture(scope="module")
def nelson256():
    f, v, rho, rho2 = gallery.nelson(NELSON_256)
    return f, v, rho, rho2, default_family(f)


@pytest.mark.parametrize("name", sorted(gallery.GENERATORS))
def test_generators_vanish_on_outer_ring(name):
    f = gallery.GENERATORS[name](grid=gallery.DEFAULT_GRIDS[name])
    v = f.values
    assert not (v[0].any() or v[-1].any() or v[:, 0].any() or v[:, -1].any())


def test_nelson_ring_is_zero(nelson256):
    f, v, rho, rho2, _ = nelson256
    for a in (f.values, rho.values, rho2.values):
        assert not (a[0].any() or a[-1].any() or a[:, 0].any() or a[:, -1].any())


def test_nelson_stream_continuous_across_gluing_lines():
    e = 1e-14
    ys = np.linspace(0.05, 1.95, 39)
    d = np.abs(gallery.nelson_stream(e, ys) - gallery.nelson_stream(-e, ys))
    assert d.max() <= 1e-12
    xs = np.linspace(-0.95, 0.95, 39)
    d = np.abs(gallery.nelson_stream(xs, 1 + e) - gallery.nelson_stream(xs, 1 - e))
    assert d.max() <= 1e-12
    # on the triangle edges the stream function meets the zero exterior
    t = np.linspace(0.01, 0.99, 50)
    assert np.abs(gallery.nelson_stream(t - e, t)).max() <= 1e-12
    assert np.abs(gallery.nelson_stream(-(t - e), 2 - t)).max() <= 1e-12


def test_nelson_velocity_is_rotated_gradient(rng):
    x = rng.uniform(-0.9, 0.9, 200)
    y = rng.uniform(0.05, 1.95, 200)
    yr = np.where(y > 1, 2 - y, y)
    keep = (np.abs(x) < yr - 0.02) & (np.abs(x) > 0.02) & (np.abs(y - 1) > 0.02)
    x, y = x[keep], y[keep]
    d = 1e-6
    fx = (gallery.nelson_stream(x + d, y) - gallery.nelson_stream(x - d, y)) / (2 * d)
    fy = (gallery.nelson_stream(x, y + d) - gallery.nelson_stream(x, y - d)) / (2 * d)
    vx, vy = gallery.nelson_velocity(x, y)
    assert np.allclose(vx, -fy, rtol=1e-6, atol=1e-6)
    assert np.allclose(vy, fx, rtol=1e-6, atol=1e-6)


def test_nelson_coverage_error():
    with pytest.raises(StreamdecError, match="cover"):
        gallery.nelson((64, (-1.0, -0.5), 2.0))


def test_nelson_dipole_defects(nelson256):
    f, v, rho, rho2, fam = nelson256
    d = divergence_defect(rho2, v, fam)
    seen = 0
    for k in range(len(fam)):
        want = (fam.phi(k, 0.0, 2.0) if fam.contains(k, (0.0, 2.0)) else 0.0) \
            - (fam.phi(k, 0.0, 0.0) if fam.contains(k, (0.0, 0.0)) else 0.0)
        if abs(want) > 0.1:
            seen += 1
            assert abs(d.raw[k] - want) <= 0.1 * abs(want)
    assert seen >= 6


def test_nelson_chain_rule_violated(nelson256):
    f, v, rho, rho2, fam = nelson256
    thr = control_threshold(v, fam)
    assert divergence_defect(rho, v, fam).max_normalized <= thr
    rep = chain_rule_test(rho, v, SQUARE, fam, threshold=thr)
    assert rep.verdict == "violated" and rep.witness_test is not None


def test_nelson_lp_trends():
    p15, p2 = [], []
    for k in range(4):
        f, v, _, _ = gallery.nelson((96 * 2**k, (-1.5, -0.5), 3.0))
        p15.append(gallery.lp_norm(v, 1.5))
        p2.append(gallery.lp_norm(v, 2.0) ** 2)
    inc15 = np.diff(p15)
    # increments shrink geometrically: the p = 1.5 norm converges
    assert np.all(np.abs(inc15[1:] / inc15[:-1]) < 0.8)
    # the squared p = 2 norm grows by a nearly fixed amount per doubling (logarithmic divergence)
    inc2 = np.diff(p2)
    assert np.all(inc2 > 1.0)
    assert np.max(np.abs(inc2 / inc2.mean() - 1)) <= 0.1


def test_lp_norm_rejects_small_p(nelson256):
    with pytest.raises(StreamdecError):
        gallery.lp_norm(nelson256[1], 0.5)


def test_radial_bump_examples():
    f = gallery.radial_bump((128, (-1.25, -1.25), 2.5))
    assert is_monotone(f) and len(decompose(f)) == 1
    g = gallery.radial_bump((128, (-1.25, -1.25), 2.5), (0.1, 0.0), 0.5, 2.0)
    assert g.values.max() <= 2.0 and is_monotone(g)


def test_two_bumps_examples():
    f = gallery.two_bumps()
    assert not is_monotone(f)
    assert len(decompose(f)) == 2
    g = gallery.two_bumps(overlap=True)
    assert not is_monotone(g)
    comps = decompose(g)
    assert len(comps) == 2
    assert abs(sum(c.tv for c in comps) - total_variation(g)) <= 1e-12 * total_variation(g)


def test_two_bumps_flag_mismatch():
    with pytest.raises(StreamdecError, match="overlap flag"):
        gallery.two_bumps(separation=0.5, overlap=False)
    with pytest.raises(StreamdecError, match="overlap flag"):
        gallery.two_bumps(separation=2.0, overlap=True)


def test_volcano_examples():
    f = gallery.volcano()
    high = RegionMask(f.values >= 0.5, f.h)
    assert len(holes(high)) == 1
    capped = f.with_values(np.minimum(f.values, 0.95))
    h = extract_saturated(capped)
    tv = total_variation(capped)
    assert abs(total_variation(h) + total_variation(h - capped) - tv) <= 1e-12 * tv
    assert not np.any((h.values - capped.values)[np.hypot(*f.coords()) > 0.7])
