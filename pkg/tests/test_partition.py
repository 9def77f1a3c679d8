import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import SWEEP, random_rotation
from twowell.errors import DomainError, InvalidInputError
from twowell.generators import generate_example_sequence, generate_laminate
from twowell.grid import GridField, affine_field
from twowell.harness import loglog_slope
from twowell.partition import (build_partition, coarsen_partition, component_translations,
                               jump_height_extract, p_exponent, rescaled_displacement,
                               selection_margin, sigma_candidates, slice_area_function)
from twowell.rigidity import PHASE_A, PHASE_B, decompose_phases, phase_matrices


def band_phi(nx, nz, bands):
    """Cells labelled by horizontal bands given as (first_row, stop_row, phase)."""
    phi = np.zeros((nx, nz), dtype=np.int8)
    for a, b, ph in bands:
        phi[:, a:b] = ph
    return phi


def piecewise_field(phi, spacing, R, translations, kappa=1.0):
    """Nodal field equal to R M x + t on the cells of each band; node rows take the cell row above."""
    nx, nz = phi.shape
    y = affine_field(np.eye(2), (nx, nz), spacing)
    x = y.node_coords()
    vals = np.empty_like(x)
    for j in range(nz + 1):
        row = min(j, nz - 1)
        ph = phi[0, row]
        M = phase_matrices(ph, kappa, 2)
        vals[:, j] = x[:, j] @ (R @ M).T + translations[row]
    return y.with_values(vals)


def run_partition(y, eps, kappa=1.0, R=None):
    dec = decompose_phases(y, kappa, "full")
    R = dec.R if R is None else R
    part = build_partition(dec.phi, eps, y.spacing, y.origin)
    return dec, component_translations(y, R, part, kappa)


phase_fields = st.integers(4, 10).flatmap(
    lambda nx: st.integers(6, 30).flatmap(
        lambda nz: st.lists(st.integers(0, 1), min_size=nx * nz, max_size=nx * nz).map(
            lambda v: np.array(v, dtype=np.int8).reshape(nx, nz))))


# exponent and thresholds ----------------------------------------------------------

def test_p_exponent_values():
    assert p_exponent(2) == 1.75
    assert p_exponent(3) == pytest.approx(7 / 6, abs=1e-15)
    assert all(1 < p_exponent(d) < 2 for d in range(2, 20))
    with pytest.raises(DomainError):
        p_exponent(1)


@given(eps=st.floats(1e-4, 0.99), d=st.integers(2, 3))
def test_sigma_candidates_inside_bracket(eps, d):
    c = sigma_candidates(eps, d)
    top = eps ** p_exponent(d)
    assert len(c) == 16 and np.all(c > top / 2) and np.all(c < top)


# slice areas -------------------------------------------------------------------------

def test_slice_area_examples():
    phi = band_phi(10, 20, [(5, 9, PHASE_B)])
    sp = (0.1, 0.05)
    assert np.allclose(slice_area_function(np.zeros((10, 20), np.int8), "A", sp), 1.0)
    fB = slice_area_function(phi, "B", sp)
    assert np.allclose(fB[5:9], 1.0) and np.all(fB[:5] == 0) and np.all(fB[9:] == 0)


def test_slice_area_of_example_field():
    eps = 0.1
    y = generate_example_sequence(eps, 1.0)
    dec = decompose_phases(y, 1.0, "full")
    fB = slice_area_function(dec.phi, "B", y.spacing)
    rows = np.flatnonzero(fB > 0)
    assert abs(rows.size * y.spacing[1] - 2 * eps) <= 4 * y.spacing[1]


# partition construction ------------------------------------------------------------

def test_single_phase_single_layer():
    part = build_partition(np.zeros((6, 12), np.int8), 0.1)
    (c,) = part.components
    assert c.kind == "layer" and c.phase == PHASE_A and len(c.cells) == 72


def test_fat_three_band_laminate():
    phi = band_phi(10, 60, [(20, 40, PHASE_B)])
    part = build_partition(phi, 0.1, (0.1, 1 / 30))
    assert len(part.components) == 3
    got = sorted((c.interval[0], c.label, c.kind) for c in part.components)
    assert [g[1] for g in got] == ["A", "B", "A"] and all(g[2] == "layer" for g in got)
    assert [pytest.approx(g[0]) for g in got] == [0.0, 2 / 3, 4 / 3]


def test_example_half_regime_has_thick_B_layer():
    eps = 0.04
    y = generate_example_sequence(eps, 0.5)
    _, part = run_partition(y, eps)
    assert len(part.components) >= 3
    B = [c for c in part.components if c.label == "B" and c.kind == "layer"]
    assert len(B) == 1
    assert abs((B[0].interval[1] - B[0].interval[0]) - 2 * np.sqrt(eps)) <= 2 * eps**2


def test_partition_rejects_bad_labels():
    with pytest.raises(InvalidInputError):
        build_partition(np.full((4, 4), 2), 0.1)
    with pytest.raises(DomainError):
        build_partition(np.zeros((4, 4), np.int8), 0.0)


@settings(max_examples=60, deadline=None)
@given(phi=phase_fields, eps=st.floats(0.02, 0.5))
def test_partition_is_exact_and_sorted(phi, eps):
    part = build_partition(phi, eps)
    cells = np.concatenate([c.cells for c in part.components])
    assert len(cells) == phi.size and len(np.unique(cells)) == phi.size
    vols = [c.volume for c in part.components]
    assert all(a >= b for a, b in zip(vols, vols[1:]))
    top = eps ** part.p_exponent
    assert top / 2 < part.sigma_eps < top
    owner = part.owner()
    rows = np.arange(phi.shape[1])
    for j, c in enumerate(part.components):
        mask = owner == j
        assert np.all(phi[mask] == c.phase)
        used = rows[np.any(mask, axis=0)]
        assert c.layers[0] <= used.min() and used.max() < c.layers[1]
        assert (c.kind == "small-volume") == (c.volume <= part.sigma_eps * part.height)


# translations -------------------------------------------------------------------------

def exact_laminate(R, b, kappa=1.0):
    """A|B|A laminate on (0,1)^2 with interfaces on node rows 12 and 20 of a 8x32 grid."""
    y = generate_laminate(["A", "B", "A"], [0.375, 0.625], kappa, R, 0.0, (8, 32), b=b)
    e2 = R[:, 1]
    expected = {(0, "A"): b, (12, "B"): b - kappa * 0.375 * e2, (20, "A"): b + kappa * 0.25 * e2}
    return y, expected


def test_translation_of_exact_affine_piece(rng):
    R = random_rotation(rng)
    b = np.array([0.3, -0.7])
    y, expected = exact_laminate(R, b)
    phi = band_phi(8, 32, [(12, 20, PHASE_B)])
    part = component_translations(y, R, build_partition(phi, 0.3, y.spacing), 1.0)
    assert len(part.components) == 3
    for c in part.components:
        assert np.allclose(c.translation, expected[(c.layers[0], c.label)], atol=1e-12)


def test_example_top_translation():
    eps = 0.1
    y = generate_example_sequence(eps, 2.0)
    _, part = run_partition(y, eps, R=np.eye(2))
    top = max((c for c in part.components if c.label == "A"), key=lambda c: c.interval[0])
    assert top.translation[1] == pytest.approx(2 * eps**2, rel=0.05)
    assert abs(top.translation[0]) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), shift=st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_translation_equivariance(seed, shift):
    rng = np.random.default_rng(seed)
    R = random_rotation(rng)
    phi = band_phi(6, 30, [(10, 18, PHASE_B)])
    y = piecewise_field(phi, (1 / 6, 1 / 15), R, [rng.standard_normal(2) * 0.1] * 30)
    y = y.with_values(y.values + 1e-3 * rng.standard_normal(y.values.shape))
    c = np.array(shift)
    part = build_partition(phi, 0.2, y.spacing)
    p0 = component_translations(y, R, part, 1.0)
    p1 = component_translations(y.with_values(y.values + c), R, part, 1.0)
    for a, b in zip(p0.components, p1.components):
        assert np.allclose(b.translation - a.translation, c, atol=1e-12)
    u0 = rescaled_displacement(y, R, p0, 0.2).u.values
    u1 = rescaled_displacement(y.with_values(y.values + c), R, p1, 0.2).u.values
    assert np.allclose(u0, u1, atol=1e-10)


# coarsening ------------------------------------------------------------------------------

def _two_A_bands(gap):
    phi = band_phi(6, 40, [(18, 22, PHASE_B)])
    trans = [np.zeros(2)] * 20 + [np.array([0.0, gap])] * 20
    y = piecewise_field(phi, (1 / 6, 1 / 20), np.eye(2), trans)
    return y, component_translations(y, np.eye(2), build_partition(phi, 0.1, y.spacing), 1.0)


def test_coarsen_leaves_separated_components():
    _, part = _two_A_bands(5.0)
    assert coarsen_partition(part, 0.1, 10) is part


def test_coarsen_merges_close_components():
    _, part = _two_A_bands(0.2)
    out = coarsen_partition(part, 0.1, 10)
    A = [c for c in out.components if c.label == "A"]
    assert len(A) == 1
    biggest = max((c for c in part.components if c.label == "A"), key=lambda c: c.volume)
    assert np.array_equal(A[0].translation, biggest.translation)


def test_coarsen_needs_translations():
    with pytest.raises(InvalidInputError):
        coarsen_partition(build_partition(np.zeros((4, 4), np.int8), 0.1), 0.1)


@settings(max_examples=40, deadline=None)
@given(phi=phase_fields, seed=st.integers(0, 10_000), thr=st.floats(0.5, 20))
def test_coarsening_idempotent_and_selective(phi, seed, thr):
    rng = np.random.default_rng(seed)
    eps = 0.1
    nx, nz = phi.shape
    y = GridField((nx, nz), (1 / nx, 1 / nz), rng.standard_normal((nx + 1, nz + 1, 2)))
    part = component_translations(y, np.eye(2), build_partition(phi, eps, y.spacing), 1.0)
    once = coarsen_partition(part, eps, thr)
    twice = coarsen_partition(once, eps, thr)
    assert twice is once
    assert selection_margin(once, eps) >= thr
    cells = np.concatenate([c.cells for c in once.components])
    assert len(np.unique(cells)) == phi.size == len(cells)


def test_example_quadratic_regime_merges_A(example_sweeps):
    row = next(r for r in example_sweeps[2.0].rows if r["eps"] == 0.05)
    phases = [c["phase"] for c in row["components"]]
    assert phases.count("A") == 1


def test_example_half_regime_keeps_A_split(example_sweeps):
    for row in example_sweeps[0.5].rows:
        phases = [c["phase"] for c in row["components"]]
        assert phases.count("A") == 2, f"eps={row['eps']}: A components merged"


# rescaled displacement ------------------------------------------------------------------

def test_exact_piecewise_field_has_zero_displacement(rng):
    R = random_rotation(rng)
    y, _ = exact_laminate(R, np.array([1.0, 2.0]))
    phi = band_phi(8, 32, [(12, 20, PHASE_B)])
    part = component_translations(y, R, build_partition(phi, 0.2, y.spacing), 1.0)
    u = rescaled_displacement(y, R, part, 0.2)
    assert np.max(np.abs(u.u.values)) <= 1e-12


def test_example_linear_regime_jump(example_sweeps):
    for row in example_sweeps[1.0].rows:
        if row["eps"] <= 0.05:
            assert row["jump_z"] == pytest.approx(2.0, rel=0.10)
            assert abs(row["jump_x"]) <= 0.2
            assert row["jump_deviation"] <= 0.05 * row["jump_height"]


def test_example_quadratic_regime_jump_vanishes(example_sweeps):
    for row in example_sweeps[2.0].rows:
        if row["eps"] <= 0.05:
            assert row["jump_height"] <= 0.1 * 2.0


def test_double_transition_jump_points_up():
    from conftest import sweep
    for row in sweep("double-interface").rows:
        assert row["jump_z"] > 0 and abs(row["jump_x"]) <= 1e-9 * row["jump_z"]


# jump extraction --------------------------------------------------------------------------

def test_jump_of_exact_split():
    vals = np.zeros((5, 21, 2))
    vals[:, 11:] = [0.5, 2.0]
    u = GridField((4, 20), (0.25, 0.1), vals)
    rep = jump_height_extract(u, (1.0, 1.1), offset=3)
    assert np.array_equal(rep.jump, [0.5, 2.0]) and rep.deviation == 0.0


def test_jump_extraction_guards():
    u = GridField((4, 20), (0.25, 0.1), np.zeros((5, 21, 2)))
    with pytest.raises(InvalidInputError):
        jump_height_extract(u, (1.0, 1.1), offset=2)
    with pytest.raises(InvalidInputError):
        jump_height_extract(u, (0.1, 0.2), offset=3)


# small-volume trend ----------------------------------------------------------------------------

def test_small_volume_total_trend(example_sweeps):
    """Where small-volume pieces occur, their total shrinks at least like eps^(p - 0.2)."""
    rows = example_sweeps[2.0].rows
    pos = [(r["eps"], r["small_volume_total"]) for r in rows if r["small_volume_total"] > 0]
    assert len(pos) >= 2
    slope = loglog_slope([e for e, _ in pos], [v for _, v in pos])
    assert slope >= p_exponent(2) - 0.2
    for l in (1.0, 0.5):
        assert all(r["small_volume_total"] <= 2 * r["eps"] ** p_exponent(2) for r in example_sweeps[l].rows)
