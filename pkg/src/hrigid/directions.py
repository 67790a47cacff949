"""Chord-direction sets of surface graphs and their case classification.

The direction set of a graph is the set of unit vectors ``(p - q)/|p - q|``
over distinct graph points.  It is antipodally symmetric and, for a
continuous function, meets every vertical half great circle in an arc.  We
sample it over a finite window, summarise it per azimuth by the highest and
lowest z reached (the arc profile), and sort the profile into the four
shapes A-D that a rigid function can produce.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import EmptyDirectionSet, TooFewSamples
from .expr import FieldLike, as_field
from .sphere import azimuth, psi

DEFAULT_PAIR_BUDGET = 2_000_000


@dataclass(frozen=True)
class DirectionSet:
    """Sampled chord directions, closed under ``v -> -v``.

    ``samples[:k]`` are the raw chords and ``samples[k:]`` their antipodes,
    so the closure holds bit for bit.
    """

    samples: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.samples)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "y", "z"])
        for row in self.samples:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"meta": _jsonable(self.meta), "samples": self.samples.tolist()}


def _jsonable(meta):
    out = {}
    for k, v in meta.items():
        if isinstance(v, np.ndarray):
            v = v.tolist()
        elif isinstance(v, (np.floating, np.integer)):
            v = v.item()
        out[k] = v
    return out


def _check_box(box):
    x0, x1, y0, y1 = map(float, box)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate box {box}")
    return x0, x1, y0, y1


def sample_direction_set(field: FieldLike, box, n: int, seed: int = 0,
                         pair_budget: int = DEFAULT_PAIR_BUDGET) -> DirectionSet:
    """Chord directions between ``n`` uniform random graph points in ``box``.

    All ``n(n-1)/2`` pairs are used when they fit in ``pair_budget``,
    otherwise a uniform random subset of pairs of that size.
    """
    if n < 2:
        raise TooFewSamples(f"need at least 2 points, got {n}")
    field = as_field(field)
    x0, x1, y0, y1 = _check_box(box)
    rng = np.random.default_rng(seed)
    xy = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])
    z = field(xy[:, 0], xy[:, 1])
    pts = np.column_stack([xy, z])

    n_pairs = n * (n - 1) // 2
    if n_pairs <= pair_budget:
        i, j = np.triu_indices(n, k=1)
    else:
        flat = np.sort(rng.choice(n_pairs, size=pair_budget, replace=False))
        i, j = _unrank_pairs(flat, n)
    chords = pts[i] - pts[j]
    del i, j
    norms = np.linalg.norm(chords, axis=1)
    keep = norms >= 1e-12
    chords = chords[keep] / norms[keep, None]
    samples = np.concatenate([chords, -chords])
    meta = {
        "box": [x0, x1, y0, y1],
        "n": int(n),
        "seed": int(seed),
        "pairs": int(len(chords)),
        "pair_budget": int(pair_budget),
        "field": field.source,
    }
    return DirectionSet(samples, meta)


def _unrank_pairs(r, n):
    # row-major index into the strict upper triangle -> (i, j)
    r = np.asarray(r, dtype=np.int64)
    b = 2 * n - 1
    i = np.floor((b - np.sqrt(b * b - 8.0 * r)) / 2).astype(np.int64)
    start = i * (2 * n - i - 1) // 2
    # guard against floating error in the square root
    too_far = start > r
    i[too_far] -= 1
    start = i * (2 * n - i - 1) // 2
    nxt = (i + 1) * (2 * n - i - 2) // 2
    short = r >= nxt
    i[short] += 1
    start = i * (2 * n - i - 1) // 2
    j = r - start + i + 1
    return i, j


def deform_direction_set(ds: DirectionSet, c: float) -> DirectionSet:
    """Apply ``psi(c, .)`` to every sample; antipodal closure is preserved."""
    meta = dict(ds.meta)
    meta["psi_c"] = float(c) * meta.get("psi_c", 1.0)
    if c == 1:
        return DirectionSet(ds.samples.copy(), meta)
    return DirectionSet(psi(c, ds.samples), meta)


# ---------------------------------------------------------------------------
# Arc profile
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArcProfile:
    """Per-azimuth extent of the direction set.

    Bin ``k`` covers ``(-pi + k*w, -pi + (k+1)*w]`` with ``w = 2*pi/bins``.
    ``zmax[k]`` estimates the height of the top endpoint of the arc at that
    azimuth and ``zmin[k]`` the bottom one; empty bins hold NaN.
    """

    zmax: np.ndarray
    zmin: np.ndarray
    count: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def bins(self) -> int:
        return len(self.zmax)

    @property
    def width(self) -> float:
        return 2 * math.pi / self.bins

    @property
    def edges(self):
        return -math.pi + self.width * np.arange(self.bins + 1)

    @property
    def centers(self):
        return -math.pi + self.width * (np.arange(self.bins) + 0.5)

    @property
    def empty(self):
        return self.count == 0

    def to_json(self) -> dict:
        edges = self.edges
        rows = []
        for k in range(self.bins):
            empty = bool(self.count[k] == 0)
            rows.append({
                "theta_lo": float(edges[k]),
                "theta_hi": float(edges[k + 1]),
                "zmin": None if empty else float(self.zmin[k]),
                "zmax": None if empty else float(self.zmax[k]),
                "count": int(self.count[k]),
            })
        return {"bins": rows, "meta": _jsonable(self.meta)}

    def rolled(self, shift: int) -> "ArcProfile":
        """Profile with every bin moved ``shift`` places (x-axis relabelled)."""
        return replace(
            self,
            zmax=np.roll(self.zmax, shift),
            zmin=np.roll(self.zmin, shift),
            count=np.roll(self.count, shift),
        )


def bin_index(theta, bins):
    w = 2 * math.pi / bins
    k = np.ceil((np.asarray(theta) + math.pi) / w).astype(np.int64) - 1
    return np.clip(k, 0, bins - 1)


def estimate_profile(ds: DirectionSet, bins: int = 360) -> ArcProfile:
    if bins < 8:
        raise ValueError("need at least 8 azimuth bins")
    samples = np.asarray(ds.samples)
    if len(samples) == 0:
        raise EmptyDirectionSet("direction set has no samples")
    # poles carry no azimuth
    ok = np.hypot(samples[:, 0], samples[:, 1]) > 1e-12
    samples = samples[ok]
    zmax = np.full(bins, np.nan)
    zmin = np.full(bins, np.nan)
    count = np.zeros(bins, dtype=np.int64)
    if len(samples):
        k = bin_index(azimuth(samples), bins)
        order = np.argsort(k, kind="stable")
        k = k[order]
        z = samples[order, 2]
        starts = np.flatnonzero(np.r_[True, k[1:] != k[:-1]])
        used = k[starts]
        zmax[used] = np.maximum.reduceat(z, starts)
        zmin[used] = np.minimum.reduceat(z, starts)
        count[used] = np.diff(np.r_[starts, len(k)])
    meta = dict(ds.meta)
    meta["bins"] = int(bins)
    return ArcProfile(zmax, zmin, count, meta)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


class Case(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class ClassifierTolerances:
    eps_pole: float = 0.05
    eps_zero: float = 0.05
    eps_arc: float = 0.02
    eps_len_bins: float = 2.0

    def __post_init__(self):
        for name in ("eps_pole", "eps_zero", "eps_arc", "eps_len_bins"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def to_json(self):
        return {
            "eps_pole": self.eps_pole,
            "eps_zero": self.eps_zero,
            "eps_arc": self.eps_arc,
            "eps_len_bins": self.eps_len_bins,
        }


@dataclass(frozen=True)
class CaseLabel:
    case: Case
    witness: Optional[float] = None
    interval: Optional[tuple] = None
    scores: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "case": self.case.value,
            "witness": self.witness,
            "interval": None if self.interval is None else list(self.interval),
            "scores": self.scores,
        }


def _cyclic_runs(mask):
    """Maximal runs of True in a cyclic boolean array as (start, length)."""
    n = len(mask)
    if mask.all():
        return [(0, n)]
    if not mask.any():
        return []
    first_false = int(np.argmin(mask))
    rolled = np.roll(mask, -first_false)
    runs = []
    k = 0
    while k < n:
        if rolled[k]:
            start = k
            while k < n and rolled[k]:
                k += 1
            runs.append(((start + first_false) % n, k - start))
        else:
            k += 1
    return runs


def classify(profile: ArcProfile, tol: ClassifierTolerances = ClassifierTolerances()) -> CaseLabel:
    """Decide which of the shapes A-D the profile shows.

    A: some azimuth has a degenerate arc (``zmax - zmin <= eps_arc``).
    B: ``zmax`` reaches the pole at every azimuth.
    C: ``zmax`` is ~0 on a single bin and ~1 everywhere else.
    D: ``zmax`` is ~0 on one contiguous interval of length strictly between
       ``eps_len`` and ``pi - eps_len`` and ~1 elsewhere.
    Tests run in that order.  Any empty bin, a profile that is not
    antipodally consistent (within ``eps_arc``), or a profile matching none
    of the shapes gives ``Indeterminate``.
    """
    zmax, zmin = profile.zmax, profile.zmin
    centers = profile.centers
    w = profile.width
    if profile.empty.any():
        return CaseLabel(Case.INDETERMINATE,
                         scores={"empty_bins": int(profile.empty.sum())})

    # a genuine profile is antipodally consistent and has zmin <= zmax;
    # anything else is unreliable and gets no definite label
    mismatch = float(np.max(zmin - zmax))
    if profile.bins % 2 == 0:
        mirror = np.max(np.abs(zmin + np.roll(zmax, -(profile.bins // 2))))
        mismatch = max(mismatch, float(mirror))
    if mismatch > tol.eps_arc:
        return CaseLabel(Case.INDETERMINATE, scores={"inconsistency": mismatch})

    arc = zmax - zmin
    k_arc = int(np.argmin(arc))
    high = zmax >= 1.0 - tol.eps_pole
    low = zmax <= tol.eps_zero
    scores = {
        "min_arc": float(arc[k_arc]),
        "min_zmax": float(zmax.min()),
        "low_bins": int(low.sum()),
        "high_bins": int(high.sum()),
        "other_bins": int((~(low | high)).sum()),
    }
    if arc[k_arc] <= tol.eps_arc:
        return CaseLabel(Case.A, witness=float(centers[k_arc]), scores=scores)
    if high.all():
        return CaseLabel(Case.B, scores=scores)
    if not (low | high).all():
        return CaseLabel(Case.INDETERMINATE, scores=scores)
    runs = _cyclic_runs(low)
    if len(runs) != 1:
        return CaseLabel(Case.INDETERMINATE, scores=scores)
    start, length = runs[0]
    if length == 1:
        return CaseLabel(Case.C, witness=float(centers[start]), scores=scores)
    span = length * w
    eps_len = tol.eps_len_bins * w
    if eps_len < span < math.pi - eps_len:
        lo = -math.pi + start * w
        lo = (lo + math.pi) % (2 * math.pi) - math.pi
        return CaseLabel(Case.D, interval=(float(lo), float(lo + span)), scores=scores)
    return CaseLabel(Case.INDETERMINATE, scores=scores)


def synthetic_profile(top, bins: int = 360) -> ArcProfile:
    """Profile with ``zmax = top(theta)`` at bin centres.

    ``zmin`` follows from antipodal symmetry: ``zmin(theta) = -zmax(theta + pi)``
    (``bins`` must be even).
    """
    if bins % 2:
        raise ValueError("bins must be even")
    w = 2 * math.pi / bins
    centers = -math.pi + w * (np.arange(bins) + 0.5)
    zmax = np.asarray(top(centers), dtype=float) * np.ones(bins)
    zmin = -np.roll(zmax, -bins // 2)
    return ArcProfile(zmax, zmin, np.ones(bins, dtype=np.int64), {"synthetic": True})


def export_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"
