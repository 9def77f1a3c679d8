import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from twowell.density import TwoWellDensity
from twowell.errors import DomainError, GeometryError, InvalidInputError
from twowell.grid import GridField
from twowell.profile import (DoubleProfileSpec, ReducedDensity, analytic_K, build_double_profile,
                             double_profile_breakdown, double_profile_energy, kdp_equals_2k_report,
                             modica_mortola_bound, parse_w_rule, reduced_density_eval,
                             slope_energy, solve_single_profile)

SWEEP = (0.08, 0.04, 0.02)


@pytest.fixture(scope="module")
def rd():
    return ReducedDensity(TwoWellDensity(2, 1.0, 1.0, "hard-min"))


@pytest.fixture(scope="module")
def profiles(rd):
    return {e: solve_single_profile(rd, e, 4096) for e in SWEEP}


@pytest.fixture(scope="module")
def eps0(rd, profiles):
    return kdp_equals_2k_report(rd, SWEEP, "eps", profiles=profiles).eps0


# reduced density --------------------------------------------------------------

def test_reduced_density_values(rd):
    assert reduced_density_eval(rd, 1.0) == 0.0
    assert reduced_density_eval(rd, 2.0) == 0.0
    assert reduced_density_eval(rd, 1.5) == pytest.approx(0.25, abs=1e-14)
    with pytest.raises(InvalidInputError):
        reduced_density_eval(rd, math.nan)


@given(t=st.floats(-5, 5))
def test_reduced_density_nonnegative_and_symmetric(t):
    rd = ReducedDensity(TwoWellDensity(2, 1.0, 1.0, "hard-min"))
    assert rd(t) >= 0
    if 1.0 <= t <= 2.0:
        assert rd(t) == pytest.approx(rd(3.0 - t), abs=1e-12)


# analytic constant --------------------------------------------------------------

@pytest.mark.parametrize("kappa,c,expected", [(1.0, 1.0, 0.5), (2.0, 1.0, 2.0), (1.0, 4.0, 1.0)])
def test_analytic_K_closed_forms(kappa, c, expected):
    assert analytic_K(ReducedDensity(TwoWellDensity(2, kappa, c, "hard-min"))) == pytest.approx(expected, rel=1e-9)


def test_analytic_K_agrees_with_adaptive_quadrature():
    rd = ReducedDensity(TwoWellDensity(2, 0.7, 1.3, "smooth-harmonic"))
    ref = 2 * quad(lambda s: math.sqrt(max(rd(s), 0.0)), 1.0, 1.7, limit=200)[0]
    assert analytic_K(rd) == pytest.approx(ref, rel=1e-6)


def test_analytic_K_needs_enough_points(rd):
    with pytest.raises(DomainError):
        analytic_K(rd, 999)


# single profile -------------------------------------------------------------------

def test_single_profile_within_two_percent(profiles):
    sol = profiles[0.02]
    assert abs(sol.energy / 0.5 - 1) <= 0.02
    assert sol.bc_ok


def test_single_profile_monotone_in_eps(profiles, rd):
    # refinement-matched sweep: the cell count scales like 1/eps^2
    coarse = solve_single_profile(rd, 0.04, 1024)
    fine = solve_single_profile(rd, 0.02, 4096)
    assert coarse.energy >= fine.energy - 1e-12
    assert fine.energy >= analytic_K(rd) - 1e-9
    assert min(p.energy for p in profiles.values()) >= analytic_K(rd) - 1e-9


def test_single_profile_decreases_from_initial_ramp(profiles):
    for sol in profiles.values():
        assert sol.energy < sol.trace[0]
        assert all(b <= a for a, b in zip(sol.trace, sol.trace[1:]))


def test_single_profile_clamps_exact(profiles):
    sol = profiles[0.04]
    n = sol.n_clamp
    assert np.all(sol.slopes[:n + 1] == 2.0) and np.all(sol.slopes[-n - 1:] == 1.0)
    assert abs(np.interp(0.0, sol.grid, sol.psi)) <= 1e-15


def test_single_profile_above_modica_mortola(profiles, rd):
    for sol in profiles.values():
        assert sol.energy >= modica_mortola_bound(sol.slopes, rd) - 1e-9


def test_single_profile_no_overshoot(profiles):
    for sol in profiles.values():
        assert sol.slopes.min() >= 1.0 - 1e-3 and sol.slopes.max() <= 2.0 + 1e-3


def test_single_profile_rejects_bad_input(rd):
    for kw in ({"eps": 0.0}, {"eps": 0.1, "N": 32}, {"eps": 0.1, "clamp_fraction": 0.2}):
        with pytest.raises(DomainError):
            solve_single_profile(rd, **kw)


@settings(max_examples=40, deadline=None)
@given(center=st.floats(-0.2, 0.2), width=st.floats(1e-3, 0.2), eps=st.floats(0.02, 0.2),
       wobble=st.floats(0.0, 0.3))
def test_energy_dominates_modica_mortola_sum(center, width, eps, wobble):
    rd = ReducedDensity(TwoWellDensity(2, 1.0, 1.0, "hard-min"))
    N = 1024
    t = np.linspace(-0.5, 0.5, N + 1)
    v = 1.0 + 1.0 / (1.0 + np.exp((t - center) / width)) + wobble * np.sin(9 * t) ** 2
    E = slope_energy(v, 1.0 / N, eps, rd)
    assert E >= 0.98 * modica_mortola_bound(v, rd)


# double profile --------------------------------------------------------------------

def test_double_profile_layer_slope(profiles, eps0, rd):
    dp = build_double_profile(profiles[eps0], 0.02, DoubleProfileSpec(0.02, eps0), 1.0)
    name, a, b = dp.pieces[2]
    assert name == "layer"
    assert np.all(dp.slopes[a:b + 1] == 2.0)
    assert abs(dp.w_eff - 0.02) <= dp.z.spacing[0]
    assert np.all(dp.slopes[:dp.pieces[0][2] + 1] == 1.0)


def test_double_profile_converges_in_measure(profiles, eps0):
    """(z - t)/w approaches the indicator of t > 0 away from the two transition zones."""
    eps = w = 0.01
    h = 2.0
    dp = build_double_profile(profiles[eps0], eps, DoubleProfileSpec(w, eps0, h), 1.0)
    t = np.asarray(dp.z.node_coords()).ravel()
    zv = np.asarray(dp.z.values).ravel()
    off = np.abs((zv - t) / w - (t > 0))
    frac = float(np.mean(off > 0.05))
    ratio = eps / eps0
    assert frac <= 3 * ratio**2 / (2 * h)


@pytest.mark.parametrize("rule", ["eps^2", "eps^3", "1*eps^2"])
def test_width_rules_outside_class_rejected(rule):
    with pytest.raises(InvalidInputError):
        parse_w_rule(rule)


def test_width_rules_accepted():
    assert parse_w_rule("eps") == (1.0, 1.0)
    assert parse_w_rule("3*eps") == (3.0, 1.0)
    assert parse_w_rule("sqrt-eps") == (1.0, 0.5)


def test_too_narrow_layer_rejected(profiles, eps0):
    with pytest.raises(DomainError):
        build_double_profile(profiles[eps0], 0.02, DoubleProfileSpec(0.02**2, eps0), 1.0)


def test_double_profile_overlap_rejected(profiles, eps0):
    with pytest.raises(GeometryError):
        build_double_profile(profiles[eps0], 0.02, DoubleProfileSpec(1.9, eps0, h=1.0), 1.0)


def test_double_profile_bounded_by_twice_reference(profiles, eps0, rd):
    for e in (0.04, 0.02):
        dp = build_double_profile(profiles[eps0], e, DoubleProfileSpec(e, eps0), 1.0)
        assert double_profile_energy(dp, e, rd) <= 2 * profiles[eps0].energy * 1.01


def test_affine_double_profile_energy_zero(rd):
    z = GridField((400,), (0.01,), np.linspace(-2, 2, 401))
    assert double_profile_energy(z, 0.05, rd) <= 1e-20


def test_double_profile_energy_width_independent(profiles, eps0, rd):
    e = 0.02
    vals = [double_profile_energy(build_double_profile(profiles[eps0], e, DoubleProfileSpec(k * e, eps0), 1.0), e, rd)
            for k in (1, 2, 10)]
    assert max(vals) - min(vals) <= 1e-9


def test_double_profile_pieces_add_up(profiles, eps0, rd):
    dp = build_double_profile(profiles[eps0], 0.02, DoubleProfileSpec(0.02, eps0), 1.0)
    parts = double_profile_breakdown(dp, rd)
    total = double_profile_energy(dp, 0.02, rd)
    assert abs(sum(parts.values()) - total) <= 1e-12
    assert parts["layer"] == 0.0 and parts["outer-left"] == 0.0 and parts["outer-right"] == 0.0
    assert parts["transition-left"] == pytest.approx(parts["transition-right"], rel=1e-12)


def test_double_profile_B_well_matches(profiles, eps0, rd):
    spec = DoubleProfileSpec(0.02, eps0)
    a = double_profile_energy(build_double_profile(profiles[eps0], 0.02, spec, 1.0, "A"), 0.02, rd)
    b = double_profile_energy(build_double_profile(profiles[eps0], 0.02, spec, 1.0, "B"), 0.02, rd)
    assert abs(a - b) <= 1e-9


def test_kdp_report_sweep(rd, profiles):
    rep = kdp_equals_2k_report(rd, SWEEP, "eps", profiles=profiles)
    assert rep.eps0_within_tolerance and rep.eps0 == 0.08
    ratios = [r.ratio for r in rep.rows]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] <= 1.05
    with pytest.raises(InvalidInputError):
        kdp_equals_2k_report(rd, SWEEP, "eps^3", profiles=profiles)
    with pytest.raises(InvalidInputError):
        kdp_equals_2k_report(rd, SWEEP[::-1], "eps", profiles=profiles)
