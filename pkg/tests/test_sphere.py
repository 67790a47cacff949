import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hrigid.errors import DegenerateChord
from hrigid.sphere import (RigidIsometry, azimuth, compose, direction, nearest_orthogonal, psi,
                           rotation_about_x, rotvec_matrix, signed_permutations)

unit = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 1e-3).map(
    lambda v: np.asarray(v) / np.linalg.norm(v))
scale = st.floats(1e-3, 1e3)


def random_isometry(rng):
    m = nearest_orthogonal(rng.normal(size=(3, 3)))
    return RigidIsometry(m, rng.normal(size=3))


def test_direction_examples():
    np.testing.assert_array_equal(direction((1, 0, 0), (0, 0, 0)), [1, 0, 0])
    with pytest.raises(DegenerateChord):
        direction((1, 1, 1), (1, 1, 1))


def test_direction_antisymmetric_and_unit(rng):
    for _ in range(50):
        p, q = rng.normal(size=(2, 3))
        d = direction(p, q)
        np.testing.assert_array_equal(direction(q, p), -d)
        assert abs(np.linalg.norm(d) - 1) <= 1e-12


def test_psi_examples():
    np.testing.assert_allclose(psi(2, [0, 0, 1]), [0, 0, 1])
    np.testing.assert_allclose(psi(2, [1, 0, 0]), [1, 0, 0])
    h = math.sqrt(2) / 2
    np.testing.assert_allclose(psi(2, [0, h, h]), np.array([0, 1, 2]) / math.sqrt(5), atol=1e-15)


def test_psi_rejects_nonpositive():
    with pytest.raises(ValueError):
        psi(0.0, [1, 0, 0])


@settings(max_examples=200, deadline=None)
@given(unit, scale, scale)
def test_psi_laws(v, c1, c2):
    np.testing.assert_allclose(psi(c1, psi(c2, v)), psi(c1 * c2, v), atol=1e-12)
    np.testing.assert_allclose(psi(1.0, v), v, atol=1e-15)
    np.testing.assert_allclose(psi(c1, -v), -psi(c1, v), atol=1e-15)
    assert abs(np.linalg.norm(psi(c1, v)) - 1) <= 1e-12
    # azimuth is preserved and z keeps its sign
    w = psi(c1, v)
    assert np.sign(w[2]) == np.sign(v[2])
    if np.hypot(v[0], v[1]) > 1e-6:
        assert azimuth(w) == pytest.approx(azimuth(v), abs=1e-12)


def test_azimuth_range():
    assert azimuth([-1.0, 0.0, 0.0]) == math.pi
    assert azimuth([-1.0, -0.0, 0.0]) == math.pi
    assert azimuth([1.0, 0.0, 0.0]) == 0.0


def test_signed_permutations():
    mats = signed_permutations()
    assert len(mats) == 48
    np.testing.assert_array_equal(mats[0], np.eye(3))
    dets = [round(np.linalg.det(m)) for m in mats]
    assert dets == [1] * 24 + [-1] * 24
    assert len({m.tobytes() for m in mats}) == 48


def test_isometry_validation():
    with pytest.raises(ValueError):
        RigidIsometry(np.diag([1.0, 1.0, 1.1]), np.zeros(3))
    iso = RigidIsometry.fitted(np.diag([1.0, 1.0, 1.0 + 1e-6]) @ rotvec_matrix([0.1, 0.2, 0.3]), [1, 2, 3])
    np.testing.assert_allclose(iso.ort.T @ iso.ort, np.eye(3), atol=1e-10)
    assert abs(abs(iso.det) - 1) <= 1e-10


def test_compose_examples(rng):
    phi = random_isometry(rng)
    ident = RigidIsometry.identity()
    a = compose(ident, phi)
    np.testing.assert_array_equal(a.ort, phi.ort)
    np.testing.assert_array_equal(a.trans, phi.trans)
    b = compose(phi, phi.inverse())
    np.testing.assert_allclose(b.ort, np.eye(3), atol=1e-10)
    np.testing.assert_allclose(b.trans, 0, atol=1e-10)
    t = compose(RigidIsometry.translation([1, 2, 3]), RigidIsometry.translation([-4, 0.5, 1]))
    np.testing.assert_array_equal(t.trans, [-3, 2.5, 4])
    np.testing.assert_array_equal(t.ort, np.eye(3))


def test_compose_applies_right_operand_first(rng):
    a, b = random_isometry(rng), random_isometry(rng)
    p = rng.normal(size=(20, 3))
    np.testing.assert_allclose(compose(a, b)(p), a(b(p)), atol=1e-12)


def test_rotation_about_x():
    np.testing.assert_array_equal(rotation_about_x(0.0).ort, np.eye(3))
    np.testing.assert_allclose(rotation_about_x(math.pi / 2)([0, 1, 0]), [0, 0, 1], atol=1e-15)
    r = compose(rotation_about_x(0.7), rotation_about_x(-0.7))
    np.testing.assert_allclose(r.ort, np.eye(3), atol=1e-15)


def test_isometry_dict_round_trip(rng):
    phi = random_isometry(rng)
    again = RigidIsometry.from_dict(phi.to_dict())
    np.testing.assert_array_equal(again.ort, phi.ort)
    np.testing.assert_array_equal(again.trans, phi.trans)
    assert phi.orientation_preserving == (phi.det > 0)
