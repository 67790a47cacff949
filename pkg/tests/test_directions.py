import json
import math

import numpy as np
import pytest

from hrigid.directions import (ArcProfile, Case, ClassifierTolerances, DirectionSet, bin_index,
                               classify, deform_direction_set, estimate_profile, export_json,
                               sample_direction_set, synthetic_profile)
from hrigid.errors import EmptyDirectionSet, TooFewSamples

BOX = (-5, 5, -5, 5)
PLANE_NORMAL = np.array([2.0, 3.0, -1.0]) / math.sqrt(14.0)


def plane_top(theta):
    s = 2 * np.cos(theta) + 3 * np.sin(theta)
    return s / np.sqrt(1 + s * s)


@pytest.fixture(scope="module")
def affine_ds():
    return sample_direction_set("1+2*x+3*y", BOX, 2000, seed=0)


def test_constant_field_is_equator():
    ds = sample_direction_set("5", BOX, 100, seed=3)
    assert np.all(ds.samples[:, 2] == 0)
    assert len(ds) == 100 * 99


def test_antipodal_closure_bitwise():
    ds = sample_direction_set("x^2 - y", BOX, 50, seed=1)
    k = len(ds) // 2
    np.testing.assert_array_equal(ds.samples[k:], -ds.samples[:k])


def test_unit_norm_and_no_poles():
    ds = sample_direction_set("exp(x) * y", (-1, 1, -1, 1), 200, seed=2)
    assert np.max(np.abs(np.linalg.norm(ds.samples, axis=1) - 1)) <= 1e-12
    assert np.max(np.abs(ds.samples[:, 2])) < 1 - 1e-12


def test_affine_samples_on_great_circle(affine_ds):
    # brute force: every chord of a plane lies in that plane
    assert np.max(np.abs(affine_ds.samples @ PLANE_NORMAL)) <= 1e-10


def test_parabola_has_steep_chords():
    # the chord from (1.9, 0) to (2, 0) already has slope 3.9
    oracle = 3.9 / math.hypot(1, 3.9)
    ds = sample_direction_set("x^2", (-2, 2, -2, 2), 200, seed=0)
    assert oracle > 0.9
    assert ds.samples[:, 2].max() >= 0.9


def test_sampling_is_deterministic():
    a = sample_direction_set("sin(x)+y", BOX, 60, seed=7)
    b = sample_direction_set("sin(x)+y", BOX, 60, seed=7)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert a.to_csv() == b.to_csv()


def test_pair_budget_subsamples_without_repeats():
    full = sample_direction_set("x + y^2", BOX, 80, seed=5)
    part = sample_direction_set("x + y^2", BOX, 80, seed=5, pair_budget=1000)
    assert len(part) == 2000
    raw = part.samples[:1000]
    assert len(np.unique(raw, axis=0)) == 1000
    # every sub-sampled chord is one of the full set's chords
    full_raw = {tuple(v) for v in full.samples[: len(full) // 2]}
    assert all(tuple(v) in full_raw for v in raw)


def test_sampling_errors():
    with pytest.raises(TooFewSamples):
        sample_direction_set("x", BOX, 1)
    with pytest.raises(ValueError):
        sample_direction_set("x", (1, 0, 0, 1), 10)


def test_csv_format():
    ds = sample_direction_set("7", BOX, 5, seed=0)
    text = ds.to_csv()
    lines = text.split("\n")
    assert lines[0] == "x,y,z"
    assert "\r" not in text and text.endswith("\n")
    assert len(lines) - 2 == len(ds)
    back = np.array([[float(t) for t in line.split(",")] for line in lines[1:-1]])
    np.testing.assert_array_equal(back, ds.samples)


def test_bin_convention():
    bins = 4
    assert bin_index(-math.pi / 2, bins) == 0        # right end of the first bin
    assert bin_index(-math.pi / 2 + 1e-9, bins) == 1
    assert bin_index(math.pi, bins) == 3
    assert bin_index(0.0, bins) == 1


def test_profile_constant_field():
    p = estimate_profile(sample_direction_set("7", BOX, 500, seed=0), 360)
    assert not p.empty.any()
    assert np.all(p.zmax == 0) and np.all(p.zmin == 0)


def test_profile_affine_matches_closed_form(affine_ds):
    p = estimate_profile(affine_ds, 360)
    edges = p.edges
    # zmax estimates the highest point of the curve over each bin
    fine = np.linspace(edges[:-1], edges[1:], 200)
    oracle = plane_top(fine).max(axis=0)
    assert np.max(np.abs(p.zmax - oracle)) <= 0.02
    assert np.all(p.zmax <= oracle + 1e-4)


def test_profile_single_sample():
    ds = DirectionSet(np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]))
    p = estimate_profile(ds, 360)
    k = bin_index(0.0, 360)
    assert p.zmax[k] == 0 and p.zmin[k] == 0
    assert p.count.sum() == 2
    assert p.empty.sum() == 358


def test_profile_invariants():
    p = estimate_profile(sample_direction_set("x^2 + y", (-2, 2, -2, 2), 300, seed=4), 360)
    ok = ~p.empty
    assert np.all(p.zmin[ok] <= p.zmax[ok])
    np.testing.assert_allclose(p.zmin, -np.roll(p.zmax, -180), atol=1e-12)


def test_profile_errors():
    with pytest.raises(EmptyDirectionSet):
        estimate_profile(DirectionSet(np.zeros((0, 3))), 360)


def test_profile_json():
    p = estimate_profile(sample_direction_set("x", BOX, 20, seed=0), 8)
    data = json.loads(export_json(p.to_json()))
    assert len(data["bins"]) == 8
    assert data["bins"][0]["theta_lo"] == -math.pi
    assert set(data["bins"][0]) == {"theta_lo", "theta_hi", "zmin", "zmax", "count"}


@pytest.mark.parametrize("field", ["1+2*x+3*y", "7"])
def test_classify_case_a(field, affine_ds):
    ds = affine_ds if field != "7" else sample_direction_set(field, BOX, 2000, seed=0)
    label = classify(estimate_profile(ds, 360))
    assert label.case is Case.A
    assert label.witness is not None


def test_classify_synthetic_b():
    assert classify(synthetic_profile(lambda t: np.ones_like(t))).case is Case.B


def test_classify_synthetic_c():
    w = 2 * math.pi / 360
    centre = -math.pi + w * 100.5
    label = classify(synthetic_profile(lambda t: np.where(np.abs(t - centre) < w / 2, 0.0, 1.0)))
    assert label.case is Case.C
    assert label.witness == pytest.approx(centre)


def test_classify_synthetic_d():
    label = classify(synthetic_profile(lambda t: np.where((t > 0.3) & (t < 1.8), 0.0, 1.0)))
    assert label.case is Case.D
    lo, hi = label.interval
    assert 0 < hi - lo < math.pi
    assert lo == pytest.approx(0.3, abs=2 * math.pi / 360)
    assert hi == pytest.approx(1.8, abs=2 * math.pi / 360)


def test_classify_d_interval_too_long():
    # just short of pi: outside the open length range, but no degenerate arc yet
    label = classify(synthetic_profile(lambda t: np.where((t > 0.0) & (t < 3.13), 0.0, 1.0)))
    assert label.case is Case.INDETERMINATE


def test_classify_low_interval_beyond_pi_is_case_a():
    # a bin and its antipode both at height 0 give a one-point arc
    label = classify(synthetic_profile(lambda t: np.where((t > -0.1) & (t < 3.3), 0.0, 1.0)))
    assert label.case is Case.A


def test_classify_is_rotation_invariant():
    base = synthetic_profile(lambda t: np.where((t > 0.3) & (t < 1.8), 0.0, 1.0))
    for shift in (0, 17, 180, 359):
        assert classify(base.rolled(shift)).case is Case.D


def test_classify_empty_bins_indeterminate():
    ds = DirectionSet(np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]))
    assert classify(estimate_profile(ds, 360)).case is Case.INDETERMINATE


def test_classify_inconsistent_profile_indeterminate():
    p = synthetic_profile(lambda t: np.ones_like(t))
    bad = ArcProfile(p.zmax, p.zmin + 0.5, p.count)
    assert classify(bad).case is Case.INDETERMINATE


def test_classifier_tolerances_positive():
    with pytest.raises(ValueError):
        ClassifierTolerances(eps_pole=0.0)


def test_nonrigid_fields_not_case_b_c_d():
    for field in ("x^2", "exp(x)"):
        label = classify(estimate_profile(sample_direction_set(field, (-2, 2, -2, 2), 300, 0)))
        assert label.case is Case.INDETERMINATE


def test_deform_identity_and_equator():
    ds = sample_direction_set("x*y", BOX, 40, seed=0)
    np.testing.assert_array_equal(deform_direction_set(ds, 1.0).samples, ds.samples)
    eq = sample_direction_set("3", BOX, 40, seed=0)
    np.testing.assert_array_equal(deform_direction_set(eq, 7.0).samples, eq.samples)


def test_deform_affine_circle(affine_ds):
    image = deform_direction_set(affine_ds, 2.0)
    normal = np.array([4.0, 6.0, -1.0]) / math.sqrt(53.0)
    assert np.max(np.abs(image.samples @ normal)) <= 1e-10
    assert image.meta["psi_c"] == 2.0
