import math

import numpy as np
import pytest

from streamdec import gallery
from streamdec.errors import StreamdecError
from streamdec.transport1d import (CircleState, CircleWeight, Snapshot, advect, apply_beta,
                                   foliate_and_advect, nonuniqueness_demo, random_test_functions,
                                   renormalization_check, snapshot_of, state_from_function,
                                   weak_residual, weighted_mass)


def smooth(L):
    return lambda s: 0.5 + 0.4 * np.sin(2 * np.pi * s / L) + 0.1 * np.cos(6 * np.pi * s / L)


def test_full_revolution_returns():
    L = 2.0
    w = CircleWeight(L, np.ones(64))
    st = state_from_function(w, smooth(L))
    out = advect(w, st, L)
    assert np.allclose(out.values, st.values, rtol=0, atol=1e-14)


def test_density_two_halves_speed():
    L, n = 4.0, 64
    w = CircleWeight(L, np.full(n, 2.0))
    rng = np.random.default_rng(3)
    st = CircleState(rng.normal(size=n))
    out = advect(w, st, 1.0)
    # hidden time 1 is arclength 1/2 = 8 segments downstream
    assert np.allclose(out.values, np.roll(st.values, 8), atol=1e-13)


def test_zero_density_rejected():
    with pytest.raises(StreamdecError, match="non-increasing A"):
        CircleWeight(1.0, np.array([1.0, 0.0, 1.0]))


def test_composition_and_mass(rng):
    w = CircleWeight(3.0, rng.uniform(0.5, 2.0, 200), ((1.1, 0.4),))
    st = state_from_function(w, smooth(3.0), atom_values=[0.7])
    a = advect(w, advect(w, st, 0.37), 0.81)
    b = advect(w, st, 1.18)
    assert np.allclose(a.values, b.values, atol=1e-12)
    assert abs(weighted_mass(w, a) - weighted_mass(w, st)) <= 1e-12


def test_weak_residual_oracle_on_travelling_wave():
    # a = 1: rho(t, s) = g(s - t) solves the equation, rho(t, s) = g(s - 2t) does not
    L, n, T = 1.0, 4096, 0.6
    w = CircleWeight(L, np.ones(n))
    fam = random_test_functions(L, T, 50, np.random.default_rng(1))
    br = np.arange(n + 1) * (L / n)
    mid = 0.5 * (br[:-1] + br[1:])

    def wave(speed):
        # cell averages of sin(2 pi (s - speed t)) would blur; use exact piece values on a fine grid
        return lambda t: Snapshot(br, np.sin(2 * np.pi * (mid - speed * t)), np.zeros(0))

    good = np.abs(weak_residual(w, wave(1.0), fam)).max()
    bad = np.abs(weak_residual(w, wave(2.0), fam)).max()
    assert good <= 1e-5
    assert bad >= 1e-2


def test_advect_weak_residual(rng):
    L, n, T = 1.0, 1024, 0.7
    w = CircleWeight(L, rng.uniform(0.5, 2.0, n))
    st = state_from_function(w, smooth(L))
    fam = random_test_functions(L, T, 100, rng)
    r = weak_residual(w, lambda t: snapshot_of(w, advect(w, st, t)), fam)
    assert np.abs(r).max() <= 1e-6


def test_advect_weak_residual_with_atom(rng):
    L, n, T = 1.0, 512, 0.5
    w = CircleWeight(L, rng.uniform(0.5, 2.0, n), ((0.3, 0.2),))
    st = state_from_function(w, smooth(L), atom_values=[1.3])
    fam = random_test_functions(L, T, 100, rng)
    # the atom sheds a sharp front, so the time integrand has many kinks: refine Gauss-Legendre
    r = weak_residual(w, lambda t: snapshot_of(w, advect(w, st, t)), fam, n_time=1024)
    assert np.abs(r).max() <= 1e-6


def test_renormalization_identity():
    w = CircleWeight(1.0, np.ones(128))
    rep = renormalization_check(w, state_from_function(w, smooth(1.0)), lambda r: r, 0.3)
    assert rep.cell_distance == 0.0 and rep.profile_distance == 0.0


def test_renormalization_pure_shift():
    w = CircleWeight(1.0, np.ones(4096))
    st = state_from_function(w, smooth(1.0))
    # whole-segment shifts move values without averaging
    rep = renormalization_check(w, st, lambda r: r * r, 1228 * w.ds)
    assert rep.cell_distance <= 1e-10
    # otherwise the exact profiles still commute; cell averages differ by O(ds^2)
    rep = renormalization_check(w, st, lambda r: r * r, 0.3)
    assert rep.profile_distance <= 1e-10
    assert rep.cell_distance <= 1e-6


def test_renormalization_rough_density():
    rng = np.random.default_rng(7)
    w = CircleWeight(1.0, rng.uniform(0.5, 2.0, 4096))
    st = state_from_function(w, smooth(1.0))
    rep = renormalization_check(w, st, lambda r: r * r, 0.37)
    assert rep.cell_distance <= 1e-6
    assert rep.profile_distance <= 1e-12


def test_apply_beta_maps_profile():
    w = CircleWeight(1.0, np.ones(16))
    st = state_from_function(w, smooth(1.0))
    sq = apply_beta(st, w, np.square)
    assert np.array_equal(sq.values, st.values**2)


def test_nonuniqueness_demo():
    A, B, rep = nonuniqueness_demo(1.0, 0.25, 0.5, 0.5, n=4096, n_tests=200)
    assert rep.residual_A <= 1e-12
    assert rep.residual_B <= 1e-6
    assert rep.initial_sup_A == rep.initial_sup_B == 0.0
    assert rep.sup_B == pytest.approx(1.0)
    assert B[-1].atom_values[0] == pytest.approx(-1.0)
    assert rep.max_principle_flag is False and rep.atom_sup == pytest.approx(1.0)
    # the two trajectories differ although both start from zero
    assert np.abs(B[-1].values).sum() > 0 and not np.abs(A[-1].values).any()


def test_nonuniqueness_wrong_atom_rate_fails_oracle():
    from streamdec.transport1d import _front_snapshot
    L, s0, m, T = 1.0, 0.25, 0.5, 0.5
    w = CircleWeight(L, np.ones(1024), ((s0, m),))
    fam = random_test_functions(L, T, 50, np.random.default_rng(0))
    r = weak_residual(w, lambda t: _front_snapshot(L, s0, t, -2 * t / m), fam)
    assert np.abs(r).max() >= 1e-2


def test_max_principle_flag():
    _, _, big = nonuniqueness_demo(1.0, 0.1, 100.0, 0.9, n=256, n_tests=5)
    assert big.atom_sup == pytest.approx(0.009) and not big.max_principle_flag
    _, _, small = nonuniqueness_demo(1.0, 0.1, 0.2, 0.9, n=256, n_tests=5)
    assert small.max_principle_flag


def test_nonuniqueness_rejects_wrap():
    with pytest.raises(StreamdecError, match="wrap"):
        nonuniqueness_demo(1.0, 0.2, 0.5, 1.0)


G = (128, (-1.25, -1.25), 2.5)


def test_foliate_stationary_on_functions_of_f():
    f = gallery.radial_bump(G)
    rho = f.with_values(0.3 + np.sin(2 * f.values) ** 2)
    out, rep = foliate_and_advect(f, rho, 0.4, levels=24)
    assert np.max(np.abs(out.values - rho.values)) <= 1e-6
    assert rep.covered.sum() > 0


def test_foliate_zero_time_exact():
    f = gallery.radial_bump(G)
    x, y = f.coords()
    rho = f.with_values(np.exp(-((x - 0.5) ** 2 + y**2) / 0.05))
    out, rep = foliate_and_advect(f, rho, 0.0, levels=16)
    assert np.array_equal(out.values[rep.covered], rho.values[rep.covered])


def test_foliate_rotates_angular_bump():
    f = gallery.radial_bump(G)
    x, y = f.coords()
    rho = f.with_values(np.exp(-((x - 0.5) ** 2 + y**2) / 0.02))
    t = 0.3
    out, rep = foliate_and_advect(f, rho, t, levels=32)
    assert rep.max_relative_mass_change <= 0.01
    # v = (2y, -2x): clockwise rotation at angular speed 2
    r = np.hypot(x, y)
    ring = rep.covered & (np.abs(r - 0.5) < 0.15)
    w = out.values[ring]
    ang = math.atan2(np.sum(w * y[ring]), np.sum(w * x[ring]))
    assert abs(ang - (-2 * t)) <= 0.1


def test_foliate_rejects_non_monotone():
    f = gallery.two_bumps((64, (-1.6, -1.6), 3.2))
    with pytest.raises(StreamdecError, match="expected monotone"):
        foliate_and_advect(f, f, 0.1)
