import json
import math
from pathlib import Path

import numpy as np
import pytest

from hrigid.directions import DirectionSet, sample_direction_set
from hrigid.errors import EmptyDirectionSet, FitFailure, SystemViolated
from hrigid.funceq import Grid, classify_solution, residual
from hrigid.rigidity import (Decision, GraphCloud, RigidityConfig, decide, direction_obstruction,
                             find_isometry, full_rigidity_pipeline, hausdorff, minmax_scaling_check,
                             plane_fit, rotation_angle, rotation_lemma_check, rotation_w,
                             sample_graph, split_form, subcase_a2_reduce, translation_test)
from hrigid.sphere import RigidIsometry, nearest_orthogonal, psi

CALIBRATION = json.loads((Path(__file__).parent / "fixtures" / "exp_calibration.json").read_text())


# --- graph samples -----------------------------------------------------------

def test_sample_graph_constant():
    cloud = sample_graph("5", 3.0, (-1, 1, -1, 1), 50, seed=0)
    assert np.all(cloud.points[:, 2] == 5)


def test_sample_graph_rescaled_plane():
    cloud = sample_graph("1+2*x+3*y", 2.0, (-5, 5, -5, 5), 200, seed=0)
    x, y, z = cloud.points.T
    assert np.max(np.abs(z - (1 + 4 * x + 6 * y))) <= 1e-12
    assert cloud.meta["c"] == 2.0


def test_sample_graph_deterministic_and_interior_flag():
    a = sample_graph("exp(x)", 1.0, (0, 1, 0, 1), 10, seed=4)
    b = sample_graph("exp(x)", 1.0, (0, 1, 0, 1), 10, seed=4)
    np.testing.assert_array_equal(a.points, b.points)
    big = sample_graph("exp(x)", 1.0, (0, 1, 0, 1), 400, seed=4)
    x, y = big.points[:, 0], big.points[:, 1]
    inside = (x > 0.05) & (x < 0.95) & (y > 0.05) & (y < 0.95)
    np.testing.assert_array_equal(big.interior, inside)


# --- isometry search ---------------------------------------------------------

def test_find_isometry_recovers_known_motion(rng):
    cloud = sample_graph("sin(x) + 0.3*y^2", 1.0, (-2, 2, -2, 2), 400, seed=1)
    motion = RigidIsometry(nearest_orthogonal(rng.normal(size=(3, 3))), rng.normal(size=3) * 3)
    target = cloud.transformed(motion)
    fit = find_isometry(cloud, target)
    assert fit.rms <= 1e-9
    # the recovered map agrees with the true one on the cloud
    assert np.max(np.abs(fit.isometry(cloud.points) - motion(cloud.points))) <= 1e-6


def test_find_isometry_planes():
    src = sample_graph("1+2*x+3*y", 1.0, (-5, 5, -5, 5), 500, seed=0)
    tgt = sample_graph("1+2*x+3*y", 2.0, (-5, 5, -5, 5), 500, seed=0)
    fit = find_isometry(src, tgt)
    assert fit.rms <= 1e-6
    assert fit.overlap >= 0.5
    # oracle: the mapped source lies on the target plane z = 1 + 4x + 6y
    moved = fit.isometry(src.points)
    dist = np.abs(moved @ [4, 6, -1] + 1) / math.sqrt(53)
    assert np.max(dist) <= 1e-6


def test_find_isometry_exp_above_calibrated_threshold():
    box = tuple(CALIBRATION["box"])
    src = sample_graph("exp(x)", 1.0, box, 500, seed=0)
    tgt = sample_graph("exp(x)", 2.0, box, 500, seed=0)
    fit = find_isometry(src, tgt)
    assert fit.rms >= 0.01
    assert fit.rms > CALIBRATION["rms_threshold"]


def test_find_isometry_needs_points():
    tiny = GraphCloud(np.zeros((3, 3)), np.ones(3, dtype=bool))
    with pytest.raises(ValueError):
        find_isometry(tiny, tiny)


# --- translation theorems ----------------------------------------------------

@pytest.mark.parametrize("c", [2.0, 10.0, 0.5])
def test_translation_constant(c):
    fit = translation_test("7", c)
    assert fit.residual == 0
    np.testing.assert_array_equal(fit.offset, 0)


@pytest.mark.parametrize("c", [2.0, 10.0])
def test_translation_halfline_constant(c):
    fit = translation_test("x/sqrt(x^2+y^2)", c)
    assert fit.residual <= 1e-10
    np.testing.assert_array_equal(fit.offset, 0)


@pytest.mark.parametrize("c", [2.0, 3.0, 10.0])
def test_translation_linear_fails(c):
    # best offset leaves |(c-1) x| spread over x in [-2, 2]: half-range (c-1)*2
    fit = translation_test("x", c)
    oracle = (c - 1) * 2
    assert fit.residual == pytest.approx(oracle, rel=0.05)
    assert fit.residual >= 0.5 * 2


# --- direction obstruction ---------------------------------------------------

def test_obstruction_equator():
    ds = sample_direction_set("7", (-5, 5, -5, 5), 300, seed=0)
    obs = direction_obstruction(ds, 3.0)
    assert obs.residual <= 1e-10
    np.testing.assert_array_equal(obs.ort.ort, np.eye(3))


def test_obstruction_affine():
    ds = sample_direction_set("1+2*x+3*y", (-5, 5, -5, 5), 2000, seed=0)
    obs = direction_obstruction(ds, 2.0)
    assert obs.residual <= 0.02
    # oracle: the found map carries the plane's circle onto the image circle
    image_normal = np.array([4.0, 6.0, -1.0]) / math.sqrt(53)
    mapped = ds.samples[::97] @ obs.ort.ort.T
    assert np.max(np.abs(mapped @ image_normal)) <= 0.02


def test_obstruction_parabola():
    ds = sample_direction_set("x^2", (-2, 2, -2, 2), 500, seed=0)
    assert direction_obstruction(ds, 10.0).residual >= 0.05


def test_obstruction_empty():
    with pytest.raises(EmptyDirectionSet):
        direction_obstruction(DirectionSet(np.zeros((0, 3))), 2.0)


def test_hausdorff_oracle(rng):
    a, b = rng.normal(size=(40, 3)), rng.normal(size=(30, 3))
    dist = np.linalg.norm(a[:, None] - b[None], axis=2)
    assert hausdorff(a, b) == pytest.approx(max(dist.min(1).max(), dist.min(0).max()))


def test_obstruction_is_orthogonally_invariant(rng):
    # psi commutes with rotations about the z-axis, so rotating S about z
    # must not change the obstruction
    ds = sample_direction_set("x^2", (-2, 2, -2, 2), 150, seed=2)
    t = 0.7
    rz = np.array([[math.cos(t), -math.sin(t), 0], [math.sin(t), math.cos(t), 0], [0, 0, 1]])
    turned = DirectionSet(ds.samples @ rz.T)
    a = direction_obstruction(ds, 4.0).residual
    b = direction_obstruction(turned, 4.0).residual
    assert a == pytest.approx(b, abs=0.01)
    np.testing.assert_allclose(psi(4.0, ds.samples) @ rz.T, psi(4.0, turned.samples), atol=1e-15)


# --- rotation lemma ------------------------------------------------------------

def test_rotation_constants():
    assert rotation_angle(2, 1) == pytest.approx(math.atan(2) - math.pi / 4)
    assert rotation_w(2, 1) == pytest.approx(0.5 * math.sqrt(2.5))
    assert rotation_w(2, 1) == pytest.approx(0.790569, abs=1e-6)
    assert rotation_angle(1, 3) == 0
    assert rotation_w(1, 3) == pytest.approx(1 / 3)


def test_rotation_lemma_parabola():
    chk = rotation_lemma_check("x^2", 1.0, 2.0)
    assert chk.max_error <= 1e-6
    np.testing.assert_allclose(chk.y_curve, -rotation_w(2, 1) * chk.x ** 2, atol=1e-6)
    finer = rotation_lemma_check("x^2", 1.0, 2.0, fiber_step=0.025)
    assert finer.max_error <= 0.6 * chk.max_error


def test_rotation_lemma_trivial_scale():
    chk = rotation_lemma_check("x^2", 2.0, 1.0)
    assert chk.alpha == 0
    assert chk.max_error <= 1e-10


def test_rotation_lemma_constant():
    chk = rotation_lemma_check("3", 1.5, 2.0)
    assert chk.max_error <= 1e-10
    np.testing.assert_allclose(chk.y_curve, -rotation_w(2.0, 1.5) * 3, atol=1e-10)


def test_rotation_lemma_rejects_zero_slope():
    with pytest.raises(ValueError):
        rotation_lemma_check("x^2", 0.0, 2.0)


# --- subcase reduction ---------------------------------------------------------

def test_a2_constant():
    red = subcase_a2_reduce("5", 1.0, [2.0, 3.0])
    assert residual(red.system) <= 1e-10
    for e in red.system.entries:
        assert e.h == pytest.approx(math.sqrt(2 / (e.c ** 2 + 1)))
        assert e.v == pytest.approx(5 * (1 - e.h))


def test_a2_affine_incompatible():
    red = subcase_a2_reduce("1+2*x", 1.0, [2.0, 3.0])
    # oracle: the x-coefficient 2 - 2 h c cannot be cancelled by u or v,
    # so the best max-residual on [-10, 10] is |2 - 2 h c| * 10
    for e, res in zip(red.system.entries, red.fit_residuals):
        assert res == pytest.approx(abs(2 - 2 * e.h * e.c) * 10, rel=1e-6)
    with pytest.raises(SystemViolated):
        classify_solution(red.system)


def test_a2_parabola():
    with pytest.raises(FitFailure):
        subcase_a2_reduce("x^2", 1.0, [2.0], strict=True)
    assert subcase_a2_reduce("x^2", 1.0, [2.0]).fit_residuals[0] >= 1


def test_a2_rejects_nonpositive_d():
    with pytest.raises(ValueError):
        subcase_a2_reduce("x", 0.0, [2.0])


# --- diagnostics ---------------------------------------------------------------

def test_plane_fit_recovers_coefficients():
    cloud = sample_graph("1+2*x+3*y", 1.0, (-5, 5, -5, 5), 100, seed=0)
    a, b, d, res = plane_fit(cloud.points)
    # fitted as z = a + b x + d y
    assert (a, b, d) == pytest.approx((1, 2, 3), abs=1e-9)
    assert res <= 1e-9


def test_split_form_detection():
    g, d = split_form("x^2 + 2*y", (-2, 2, -2, 2))
    assert d == pytest.approx(2)
    assert g(3.0) == pytest.approx(9)
    assert split_form("x*y", (-2, 2, -2, 2)) is None


def test_minmax_scaling():
    # extreme sets of a rigid field scale with it: x + y on the unit disc
    # has its min and max at opposite boundary points, 2 apart
    base, scaled = minmax_scaling_check("x + y", 4.0)
    assert base == pytest.approx(2.0, abs=1e-3)
    assert scaled == pytest.approx(base / 4.0, rel=1e-9)


# --- pipeline ------------------------------------------------------------------

def test_decide_rule():
    assert decide(0.0, 0.0, 1e-3, 0.03) is Decision.RIGID
    assert decide(1.0, 1.0, 1e-3, 0.03) is Decision.NOT_RIGID
    assert decide(0.0, 1.0, 1e-3, 0.03) is Decision.INDETERMINATE
    assert decide(1.0, 0.0, 1e-3, 0.03) is Decision.INDETERMINATE


def test_pipeline_affine():
    res = full_rigidity_pipeline("1+2*x+3*y", [2, 5, 10], RigidityConfig(box=(-5, 5, -5, 5)))
    assert res.decision is Decision.RIGID
    assert all(v.decision is Decision.RIGID for v in res.verdicts)
    assert res.summary["case"]["case"] == "A"
    fit = res.summary["plane_fit"]
    assert (fit["a"], fit["b"], fit["d"]) == pytest.approx((1, 2, 3), abs=1e-9)
    assert fit["residual"] <= 1e-9


def test_pipeline_exp():
    res = full_rigidity_pipeline("exp(x)", [2, 5])
    assert res.decision is Decision.NOT_RIGID
    for v in res.verdicts:
        assert v.decision is Decision.NOT_RIGID
        assert v.rms > CALIBRATION["rms_threshold"]
        assert v.obstruction > CALIBRATION["obstruction_threshold"]


def test_pipeline_constant():
    res = full_rigidity_pipeline("7", [2])
    assert res.decision is Decision.RIGID
    assert res.verdicts[0].translation_residual == 0
    data = res.to_json()
    assert data["verdicts"][0]["decision"] == "Rigid"
    json.dumps(data, allow_nan=False)


def test_pipeline_rejects_bad_scales():
    with pytest.raises(ValueError):
        full_rigidity_pipeline("x", [])
    with pytest.raises(ValueError):
        full_rigidity_pipeline("x", [2, -1])


def test_config_validation():
    with pytest.raises(ValueError):
        RigidityConfig(tol_align=0)
    with pytest.raises(ValueError):
        RigidityConfig(n=2)
