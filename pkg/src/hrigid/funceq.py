"""Scale-shift functional equations ``g(x) = h_c g(c x + u_c) + v_c``.

The continuous solutions of such a system over a rich enough set of scales
are the constants and the two-sided power laws::

    g(x) = a + b1 (d - x)^s   (x < d)
    g(x) = a + b2 (x - d)^s   (x >= d)

with ``h_c = c^-s``, ``u_c = d (1 - c)`` and ``v_c = a (1 - h_c)``; the
affine functions are the ``s = 1, b1 = -b2`` members.  This module checks
a sampled ``g`` against a finite system and recovers the family parameters.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    AllScalesOne,
    InsufficientScales,
    NonPositiveScale,
    NotCoherent,
    NotPowerLaw,
    SystemViolated,
    ZeroScaleFactor,
)
from .expr import FieldLike, ScalarField, as_field, parse


@dataclass(frozen=True)
class ScaleEntry:
    c: float
    h: float
    u: float = 0.0
    v: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"scale c must be positive, got {self.c}")


@dataclass(frozen=True)
class Grid:
    lo: float = -10.0
    hi: float = 10.0
    n: int = 512

    def __post_init__(self):
        if self.n < 16:
            raise ValueError("grid needs at least 16 points")
        if not self.hi > self.lo:
            raise ValueError("grid needs hi > lo")

    @property
    def points(self):
        return np.linspace(self.lo, self.hi, self.n)

    @property
    def step(self):
        return (self.hi - self.lo) / (self.n - 1)


@dataclass(frozen=True)
class FuncEqSystem:
    entries: tuple
    g: ScalarField
    grid: Grid = Grid()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise ValueError("system needs at least one scale entry")
        object.__setattr__(self, "g", as_field(self.g, arity=1))

    @classmethod
    def from_json(cls, data) -> "FuncEqSystem":
        grid = data.get("grid", {})
        entries = [
            ScaleEntry(*(_number(e.get(k, 0.0)) for k in ("c", "h", "u", "v")))
            for e in data["entries"]
        ]
        return cls(
            entries,
            ScalarField.from_source(data["g"], arity=1),
            Grid(_number(grid.get("lo", -10.0)), _number(grid.get("hi", 10.0)),
                 int(grid.get("n", 512))),
        )

    def to_json(self):
        return {
            "g": self.g.source,
            "grid": {"lo": self.grid.lo, "hi": self.grid.hi, "n": self.grid.n},
            "entries": [{"c": e.c, "h": e.h, "u": e.u, "v": e.v} for e in self.entries],
        }


def _number(value) -> float:
    """A float from a JSON number or a constant expression such as ``"pi"``."""
    if isinstance(value, str):
        expr = parse(value)
        if expr.variables():
            raise ValueError(f"{value!r} is not a constant")
        return float(expr.evaluate(0.0))
    return float(value)


def entry_residuals(system: FuncEqSystem) -> np.ndarray:
    """Max abs residual of each entry over the grid."""
    x = system.grid.points
    gx = system.g(x)
    out = []
    for e in system.entries:
        out.append(float(np.max(np.abs(gx - e.h * system.g(e.c * x + e.u) - e.v))))
    return np.array(out)


def residual(system: FuncEqSystem) -> float:
    """``max |g(x) - h_c g(c x + u_c) - v_c|`` over entries and grid."""
    return float(np.max(entry_residuals(system)))


# ---------------------------------------------------------------------------
# Pair shifts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairShift:
    """Translation identity ``g(x + u12) = g(x) + v12`` implied by two entries."""

    c1: float
    c2: float
    u12: float
    v12: float


def pair_shift(e1: ScaleEntry, e2: ScaleEntry) -> PairShift:
    hh = e1.h * e2.h
    if hh == 0:
        raise ZeroScaleFactor("pair shift needs nonzero h for both scales")
    u12 = e1.u * (e2.c - 1) - e2.u * (e1.c - 1)
    v12 = (e1.v * (e2.h - 1) - e2.v * (e1.h - 1)) / hh
    return PairShift(e1.c, e2.c, u12, v12)


def check_translation_equation(g: FieldLike, shift: PairShift, grid=Grid()) -> float:
    """``max |g(x + u12) - g(x) - v12|`` over the grid."""
    g = as_field(g, arity=1)
    x = grid.points if isinstance(grid, Grid) else np.asarray(grid, dtype=float)
    return float(np.max(np.abs(g(x + shift.u12) - g(x) - shift.v12)))


def shifts_coherent(entries: Sequence[ScaleEntry], tol: float = 1e-9) -> bool:
    """True when every pair shift vanishes, i.e. all ``u_c`` share one centre."""
    for i, a in enumerate(entries):
        for b in entries[i + 1:]:
            u12 = a.u * (b.c - 1) - b.u * (a.c - 1)
            if abs(u12) > tol * max(1.0, abs(a.u), abs(b.u)) * max(1.0, a.c, b.c):
                return False
    return True


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


class ExponentFit(NamedTuple):
    s: float
    max_log_residual: float


class ShiftFit(NamedTuple):
    d: float
    max_residual: float


def fit_exponent(entries, tol: float = 1e-8) -> ExponentFit:
    """Least-squares ``s`` in ``log h = -s log c``.

    ``entries`` is a sequence of ``(c, h)`` pairs.  Raises
    :class:`NotPowerLaw` when the worst log-residual exceeds ``tol``.
    """
    pairs = [(float(c), float(h)) for c, h in entries]
    if len({c for c, _ in pairs}) < 2:
        raise InsufficientScales("need at least two distinct scales")
    if any(h <= 0 for _, h in pairs):
        raise NonPositiveScale("h = c^-s is positive; got a non-positive h")
    logc = np.log([c for c, _ in pairs])
    logh = np.log([h for _, h in pairs])
    denom = float(np.dot(logc, logc))
    if denom == 0:
        raise InsufficientScales("all scales equal 1")
    s = -float(np.dot(logc, logh)) / denom
    res = float(np.max(np.abs(logh + s * logc)))
    if res > tol:
        raise NotPowerLaw(s, res, tol)
    return ExponentFit(s, res)


def fit_shift(entries, tol: float = 1e-8) -> ShiftFit:
    """Least-squares ``d`` in ``u_c = d (1 - c)`` from ``(c, u)`` pairs."""
    pairs = [(float(c), float(u)) for c, u in entries]
    a = np.array([1.0 - c for c, _ in pairs])
    u = np.array([u for _, u in pairs])
    denom = float(np.dot(a, a))
    if denom == 0:
        raise AllScalesOne("every scale is 1; the centre is undetermined")
    d = float(np.dot(a, u)) / denom
    res = float(np.max(np.abs(u - d * a)))
    if res > tol:
        raise NotCoherent(d, res, tol)
    return ShiftFit(d, res)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


class Kind(str, enum.Enum):
    CONSTANT = "Constant"
    AFFINE = "Affine"
    TWO_SIDED_POWER = "TwoSidedPower"
    NONE = "None"


@dataclass(frozen=True)
class SolutionFamily:
    kind: Kind
    params: dict = field(default_factory=dict)
    fit_residual: float = float("nan")
    notes: tuple = ()

    def __post_init__(self):
        if self.kind is Kind.TWO_SIDED_POWER:
            p = self.params
            if not p["s"] > 0 or (p["b1"] == 0 and p["b2"] == 0):
                raise ValueError("two-sided power family needs s > 0 and (b1, b2) != (0, 0)")

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind is Kind.CONSTANT:
            return np.full_like(x, p["a"])
        if self.kind is Kind.AFFINE:
            return p["a"] + p["b"] * x
        if self.kind is Kind.TWO_SIDED_POWER:
            return two_sided_power(x, p["a"], p["b1"], p["b2"], p["d"], p["s"])
        raise ValueError("no closed form for kind None")

    def to_json(self):
        return {
            "kind": self.kind.value,
            "params": {k: float(v) for k, v in self.params.items()},
            "fit_residual": _finite_or_none(self.fit_residual),
            "notes": list(self.notes),
        }


def _finite_or_none(v):
    return float(v) if v is not None and math.isfinite(v) else None


def two_sided_power(x, a, b1, b2, d, s):
    x = np.asarray(x, dtype=float)
    left = x < d
    out = np.empty_like(x)
    out[left] = a + b1 * (d - x[left]) ** s
    out[~left] = a + b2 * (x[~left] - d) ** s
    return out


@dataclass(frozen=True)
class FamilyTolerances:
    sys: float = 1e-8
    const: float = 1e-9
    fit: float = 1e-7
    exponent: float = 1e-8
    shift: float = 1e-8


def classify_solution(system: FuncEqSystem, tol: FamilyTolerances = FamilyTolerances()) -> SolutionFamily:
    """Identify which solution family the sampled ``g`` belongs to.

    Raises :class:`SystemViolated` if the system itself does not hold on the
    grid.  Otherwise tries, in order: constant, affine with ``h_c = 1/c``,
    two-sided power law with centre from the shifts and exponent from the
    ``h_c``.  Anything else is reported as kind ``None``.
    """
    res = residual(system)
    if not res <= tol.sys:
        raise SystemViolated(res, tol.sys)
    x = system.grid.points
    gx = system.g(x)
    notes = []
    entries = system.entries
    regime = "coherent" if shifts_coherent(entries) else "additive"
    notes.append(f"shift regime: {regime}")

    spread = float(np.max(gx) - np.min(gx))
    if spread <= tol.const:
        return SolutionFamily(Kind.CONSTANT, {"a": float(np.mean(gx))}, spread / 2,
                              tuple(notes))

    # affine: a + b x together with h_c = 1/c
    design = np.column_stack([np.ones_like(x), x])
    (a, b), *_ = np.linalg.lstsq(design, gx, rcond=None)
    aff_res = float(np.max(np.abs(design @ [a, b] - gx)))
    if aff_res <= tol.fit * max(1.0, float(np.max(np.abs(gx)))):
        if _exponent_is_one(entries, tol.exponent):
            return SolutionFamily(Kind.AFFINE, {"a": float(a), "b": float(b)}, aff_res,
                                  tuple(notes))
        notes.append("affine g but h_c is not 1/c")

    try:
        d = fit_shift([(e.c, e.u) for e in entries], tol.shift).d
    except (NotCoherent, AllScalesOne) as exc:
        notes.append(f"no common centre: {exc}")
        return SolutionFamily(Kind.NONE, {}, float("nan"), tuple(notes))
    try:
        s = fit_exponent([(e.c, e.h) for e in entries], tol.exponent).s
    except (NotPowerLaw, NonPositiveScale, InsufficientScales) as exc:
        notes.append(f"h_c is not a power law: {exc}")
        return SolutionFamily(Kind.NONE, {"d": d}, float("nan"), tuple(notes))
    if not s > 0:
        notes.append(f"fitted exponent s={s:.6g} is not positive")
        return SolutionFamily(Kind.NONE, {"d": d, "s": s}, float("nan"), tuple(notes))

    # the kink at d spoils the fit; drop grid points within half a step of it
    keep = np.abs(x - d) > system.grid.step / 2
    xs, gs = x[keep], gx[keep]
    left = xs < d
    design = np.column_stack([
        np.ones_like(xs),
        np.where(left, np.abs(d - xs) ** s, 0.0),
        np.where(left, 0.0, np.abs(xs - d) ** s),
    ])
    coef, *_ = np.linalg.lstsq(design, gs, rcond=None)
    a, b1, b2 = (float(v) for v in coef)
    pow_res = float(np.max(np.abs(design @ coef - gs)))
    scale = max(1.0, float(np.max(np.abs(gs))))
    if pow_res <= tol.fit * scale and max(abs(b1), abs(b2)) > tol.const:
        return SolutionFamily(
            Kind.TWO_SIDED_POWER,
            {"a": a, "b1": b1, "b2": b2, "d": d, "s": s},
            pow_res,
            tuple(notes),
        )
    notes.append(f"power-law fit residual {pow_res:.3g}")
    return SolutionFamily(Kind.NONE, {"d": d, "s": s}, pow_res, tuple(notes))


def _exponent_is_one(entries, tol):
    pairs = [(e.c, e.h) for e in entries]
    if len({c for c, _ in pairs}) >= 2 and all(h > 0 for _, h in pairs):
        try:
            return abs(fit_exponent(pairs, tol).s - 1.0) <= tol
        except (NotPowerLaw, InsufficientScales):
            return False
    return all(abs(h * c - 1.0) <= tol for c, h in pairs)


def power_family_system(a, b1, b2, d, s, scales, grid=Grid(), g: Optional[FieldLike] = None):
    """A consistent system for the two-sided power family.

    ``g`` defaults to an expression for the family (needs ``b1 == b2`` or
    ``s`` where the odd part is finite at ``d``).
    """
    if g is None:
        g = power_family_expression(a, b1, b2, d, s)
    entries = []
    for c in scales:
        h = c ** (-s)
        entries.append(ScaleEntry(c, h, d * (1 - c), a * (1 - h)))
    return FuncEqSystem(entries, as_field(g, arity=1), grid)


def power_family_expression(a, b1, b2, d, s) -> str:
    """Expression text for the two-sided power family.

    Uses ``|x-d|^s`` for the even part and ``(x-d)|x-d|^(s-1)`` for the odd
    part, so the text is only defined at ``x = d`` when ``b1 == b2`` or
    ``s >= 1``.
    """
    even = (b1 + b2) / 2
    odd = (b2 - b1) / 2
    text = f"{a!r} + {even!r}*abs(x - ({d!r}))^{s!r}"
    if odd != 0:
        text += f" + {odd!r}*(x - ({d!r}))*abs(x - ({d!r}))^({s - 1!r})"
    return text
