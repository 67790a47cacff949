"""Unit-sphere primitives and rigid isometries of R^3.

Unit vectors are plain float arrays of shape ``(3,)`` or ``(n, 3)``; every
function that builds one renormalises its output.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateChord

UNIT_TOL = 1e-12
ORTHO_TOL = 1e-10


def normalize(v):
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / norm


def direction(p, q):
    """Unit vector pointing from ``q`` to ``p``."""
    d = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    norm = np.linalg.norm(d)
    if norm < 1e-12:
        raise DegenerateChord(f"points {p} and {q} coincide")
    return d / norm


def psi(c, v):
    """Vertical stretch of sphere points: ``(x, y, cz) / |(x, y, cz)|``.

    Works row-wise on ``(n, 3)`` arrays.  ``c`` must be positive.  Points
    of the equator are fixed, and returned bit for bit.
    """
    if not c > 0:
        raise ValueError("psi needs c > 0")
    v = np.asarray(v, dtype=float)
    w = v.copy()
    w[..., 2] *= c
    out = normalize(w)
    flat = v[..., 2] == 0
    out[flat] = v[flat]
    return out


def azimuth(v):
    """Azimuth in (-pi, pi]; ``atan2``'s -pi is folded onto pi."""
    v = np.asarray(v, dtype=float)
    theta = np.arctan2(v[..., 1], v[..., 0])
    return np.where(theta <= -np.pi, np.pi, theta)


def nearest_orthogonal(m):
    """Polar factor of ``m``: the orthogonal matrix closest in Frobenius norm."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=float))
    return u @ vt


def rotation_matrix_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotvec_matrix(omega):
    """Rodrigues formula for the rotation by ``|omega|`` about ``omega``."""
    omega = np.asarray(omega, dtype=float)
    theta = np.linalg.norm(omega)
    if theta < 1e-300:
        return np.eye(3)
    k = omega / theta
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(theta) * kx + (1.0 - np.cos(theta)) * (kx @ kx)


def signed_permutations():
    """The 48 signed permutation matrices (axis-aligned orthogonal frames).

    The first 24 are rotations, the last 24 reflections; identity first.
    """
    mats = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            m = np.zeros((3, 3))
            for row, (col, s) in enumerate(zip(perm, signs)):
                m[row, col] = s
            mats.append(m)
    mats.sort(key=lambda m: (np.linalg.det(m) < 0, -np.trace(m)))
    return mats


@dataclass(frozen=True)
class RigidIsometry:
    """``p -> ort @ p + trans`` with ``ort`` orthogonal."""

    ort: np.ndarray = field(default_factory=lambda: np.eye(3))
    trans: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        ort = np.array(self.ort, dtype=float).reshape(3, 3)
        trans = np.array(self.trans, dtype=float).reshape(3)
        if np.max(np.abs(ort.T @ ort - np.eye(3))) > ORTHO_TOL:
            raise ValueError("orthogonal part is not orthogonal")
        ort.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "ort", ort)
        object.__setattr__(self, "trans", trans)

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def translation(cls, t):
        return cls(np.eye(3), t)

    @classmethod
    def fitted(cls, m, t):
        """Isometry from a numerically fitted matrix, projected onto O(3)."""
        return cls(nearest_orthogonal(m), t)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.ort))

    @property
    def orientation_preserving(self) -> bool:
        return self.det > 0

    def apply(self, points):
        points = np.asarray(points, dtype=float)
        return points @ self.ort.T + self.trans

    __call__ = apply

    def inverse(self) -> "RigidIsometry":
        return RigidIsometry(self.ort.T, -(self.ort.T @ self.trans))

    def to_dict(self):
        return {
            "ort": [float(v) for v in self.ort.reshape(-1)],
            "trans": [float(v) for v in self.trans],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(np.reshape(data["ort"], (3, 3)), data["trans"])


def compose(a: RigidIsometry, b: RigidIsometry) -> RigidIsometry:
    """The isometry applying ``b`` first, then ``a``."""
    return RigidIsometry(a.ort @ b.ort, a.ort @ b.trans + a.trans)


def rotation_about_x(angle: float) -> RigidIsometry:
    return RigidIsometry(rotation_matrix_x(angle), np.zeros(3))
