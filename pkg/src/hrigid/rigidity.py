"""Numerical tests of horizontal rigidity for surfaces z = f(x, y).

``f`` is horizontally rigid for a scale ``c`` when some isometry of R^3
carries graph(f) onto graph(f(c .)).  Over a finite window this module
gathers three kinds of evidence for each scale:

* an isometry search between sampled graph clouds (ICP with point-to-plane
  refinement, many orthogonal seeds, both orientations);
* the direction obstruction: the orthogonal part of such an isometry must
  carry the chord-direction set S onto ``psi_c(S)``;
* the translation-only test (only constant functions pass for c != 1).

The verdicts are evidence relative to the sampled window, not proofs.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .directions import (
    Case,
    ClassifierTolerances,
    DirectionSet,
    classify,
    estimate_profile,
    sample_direction_set,
)
from .errors import DomainError, EmptyDirectionSet, ExtractionFailure, FitFailure, SystemViolated
from .expr import BinOp, FieldLike, Num, ScalarField, Var, as_field
from .funceq import FamilyTolerances, FuncEqSystem, Grid, ScaleEntry, classify_solution
from .sphere import (
    RigidIsometry,
    psi,
    rotation_about_x,
    rotvec_matrix,
    signed_permutations,
)

# ---------------------------------------------------------------------------
# Graph clouds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphCloud:
    """Points ``(x, y, f(c x, c y))`` over a box.

    ``interior`` flags points at least ``margin`` (a fraction of the box
    side) away from the box boundary; only those count when another cloud
    is compared against this one.  The flags travel with the points, so
    moving the cloud by an isometry keeps the comparison intrinsic.
    """

    points: np.ndarray
    interior: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    def transformed(self, iso: RigidIsometry) -> "GraphCloud":
        meta = dict(self.meta)
        meta["moved"] = True
        return GraphCloud(iso.apply(self.points), self.interior, meta)


def sample_graph(field: FieldLike, c: float, box, n: int, seed: int = 0,
                 margin: float = 0.05) -> GraphCloud:
    """Scrambled-Halton points in ``box`` lifted to the graph of ``f(c .)``."""
    if n < 4:
        raise ValueError("need at least 4 points")
    if not c > 0:
        raise ValueError("scale must be positive")
    field = as_field(field)
    x0, x1, y0, y1 = map(float, box)
    unit = qmc.Halton(d=2, scramble=True, seed=seed).random(n)
    xy = qmc.scale(unit, [x0, y0], [x1, y1])
    z = field(c * xy[:, 0], c * xy[:, 1])
    mx, my = margin * (x1 - x0), margin * (y1 - y0)
    interior = ((xy[:, 0] >= x0 + mx) & (xy[:, 0] <= x1 - mx)
                & (xy[:, 1] >= y0 + my) & (xy[:, 1] <= y1 - my))
    meta = {"field": field.source, "c": float(c), "box": [x0, x1, y0, y1],
            "n": int(n), "seed": int(seed), "margin": float(margin)}
    return GraphCloud(np.column_stack([xy, z]), interior, meta)


def estimate_normals(points, k: int = 10, tree: Optional[cKDTree] = None):
    """Unit normals from the smallest principal axis of each k-neighbourhood."""
    points = np.asarray(points, dtype=float)
    k = min(k, len(points))
    tree = tree if tree is not None else cKDTree(points)
    _, idx = tree.query(points, k=k)
    nb = points[idx]
    nb = nb - nb.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", nb, nb)
    _, vecs = np.linalg.eigh(cov)
    return vecs[:, :, 0]


def principal_axes(points):
    """Eigenvectors (columns, ascending eigenvalue) of the scatter matrix."""
    centred = points - points.mean(axis=0)
    _, vecs = np.linalg.eigh(centred.T @ centred)
    return vecs


# ---------------------------------------------------------------------------
# Isometry search
# ---------------------------------------------------------------------------


class Alignment(NamedTuple):
    isometry: RigidIsometry
    rms: float
    overlap: float
    converged: bool
    seed: str


def _kabsch(src, dst, orientation):
    """Orthogonal R (det = orientation) and t minimising |R src + t - dst|."""
    cs, cd = src.mean(axis=0), dst.mean(axis=0)
    h = (src - cs).T @ (dst - cd)
    u, _, vt = np.linalg.svd(h)
    r = vt.T @ u.T
    if np.linalg.det(r) * orientation < 0:
        vt = vt.copy()
        vt[-1] *= -1
        r = vt.T @ u.T
    return r, cd - r @ cs


class _Target:
    def __init__(self, cloud: GraphCloud, k_normals: int):
        self.points = np.asarray(cloud.points, dtype=float)
        self.interior = np.asarray(cloud.interior, dtype=bool)
        self.tree = cKDTree(self.points)
        self.normals = estimate_normals(self.points, k_normals, self.tree)

    def score(self, moved):
        """Point-to-plane rms over the overlap and the overlap fraction."""
        _, idx = self.tree.query(moved)
        inside = self.interior[idx]
        if not inside.any():
            return math.inf, 0.0
        diff = moved[inside] - self.points[idx[inside]]
        dist = np.einsum("ij,ij->i", diff, self.normals[idx[inside]])
        return float(np.sqrt(np.mean(dist * dist))), float(inside.mean())


def _icp(src, target: _Target, r, t, max_iter, n_point, min_overlap, max_angle=0.2):
    orientation = 1.0 if np.linalg.det(r) > 0 else -1.0
    converged = False
    it = 0
    # point-to-point stage: robust pull into overlap
    while it < min(n_point, max_iter):
        it += 1
        moved = src @ r.T + t
        _, idx = target.tree.query(moved)
        inside = target.interior[idx]
        use = inside if inside.sum() >= max(3, min_overlap * len(src) / 4) else np.ones_like(inside)
        r_new, t_new = _kabsch(src[use], target.points[idx[use]], orientation)
        step = np.max(np.abs(r_new - r)) + np.max(np.abs(t_new - t)) / (1 + np.max(np.abs(t)))
        r, t = r_new, t_new
        if step < 1e-10:
            break
    # point-to-plane stage with a capped, backtracked linearised step
    rms, overlap = target.score(src @ r.T + t)
    floor = min(min_overlap, overlap)
    while it < max_iter:
        it += 1
        moved = src @ r.T + t
        _, idx = target.tree.query(moved)
        use = target.interior[idx]
        if use.sum() < 6:
            break
        p = moved[use]
        q = target.points[idx[use]]
        nrm = target.normals[idx[use]]
        centre = p.mean(axis=0)
        pc = p - centre
        scale = 1.0 + np.max(np.abs(pc))
        a = np.column_stack([np.cross(pc, nrm) / scale, nrm])
        b = -np.einsum("ij,ij->i", p - q, nrm)
        sol, *_ = np.linalg.lstsq(a, b, rcond=None)
        omega, tau = sol[:3] / scale, sol[3:]
        angle = np.linalg.norm(omega)
        if angle > max_angle:
            omega, tau = omega * (max_angle / angle), tau * (max_angle / angle)
        accepted = False
        for _ in range(12):
            rot = rotvec_matrix(omega)
            r_try = rot @ r
            t_try = rot @ (t - centre) + centre + tau
            rms_try, ov_try = target.score(src @ r_try.T + t_try)
            if ov_try >= floor and rms_try <= rms:
                accepted = True
                break
            omega, tau = omega / 2, tau / 2
        if not accepted:
            converged = True
            break
        small = np.linalg.norm(omega) < 1e-13 and np.linalg.norm(tau) < 1e-12 * scale
        gain = rms - rms_try
        r, t, rms = r_try, t_try, rms_try
        if small or gain <= 1e-15 * max(1.0, rms):
            converged = True
            break
    # keep the matrix exactly orthogonal
    u, _, vt = np.linalg.svd(r)
    return u @ vt, t, converged


def find_isometry(source: GraphCloud, target: GraphCloud, extra_seeds: Sequence = (),
                  max_iter: int = 60, point_iters: int = 25, min_overlap: float = 0.5,
                  k_normals: int = 10, stop_rms: float = 1e-10,
                  world_frames: bool = False, random_seeds: int = 0,
                  seed: int = 0) -> Alignment:
    """Best rigid isometry carrying ``source`` onto ``target``.

    Seeds are the 48 axis-aligned orthogonal frames expressed in the
    principal-axis frames of both clouds (24 rotations, 24 reflections),
    followed by ``extra_seeds`` (orthogonal matrices, e.g. from the
    direction obstruction).  Each seed starts with matched centroids and is
    refined by point-to-point then point-to-plane ICP.  The score is the
    rms point-to-tangent-plane distance of source points whose nearest
    target point is interior; seeds leaving less than ``min_overlap`` of the
    source in the overlap are discarded.  ``world_frames`` and
    ``random_seeds`` widen the search for offline oracle runs.
    """
    src = np.asarray(source.points, dtype=float)
    if len(src) < 4 or len(target) < 4:
        raise ValueError("clouds need at least 4 points")
    tgt = _Target(target, k_normals)
    e_src, e_tgt = principal_axes(src), principal_axes(tgt.points)
    seeds = [(f"frame{i}", e_tgt @ a @ e_src.T) for i, a in enumerate(signed_permutations())]
    seeds += [(f"extra{i}", np.asarray(m, dtype=float)) for i, m in enumerate(extra_seeds)]
    if world_frames:
        seeds += [(f"world{i}", a) for i, a in enumerate(signed_permutations())]
    if random_seeds:
        from scipy.spatial.transform import Rotation

        rots = Rotation.random(random_seeds, random_state=seed).as_matrix()
        seeds += [(f"random{i}", m) for i, m in enumerate(rots)]
        seeds += [(f"random{i}r", m @ np.diag([1.0, 1.0, -1.0])) for i, m in enumerate(rots)]

    c_src, c_tgt = src.mean(axis=0), tgt.points.mean(axis=0)
    best = None
    fallback = None
    for label, r0 in seeds:
        r0 = np.asarray(r0, dtype=float)
        u, _, vt = np.linalg.svd(r0)
        r0 = u @ vt
        t0 = c_tgt - r0 @ c_src
        r, t, converged = _icp(src, tgt, r0, t0, max_iter, point_iters, min_overlap)
        rms, overlap = tgt.score(src @ r.T + t)
        cand = Alignment(RigidIsometry(r, t), rms, overlap, converged, label)
        if fallback is None or overlap > fallback.overlap:
            fallback = cand
        if overlap < min_overlap:
            continue
        if best is None or rms < best.rms:
            best = cand
        if best.rms <= stop_rms:
            break
    if best is None:
        return fallback._replace(rms=math.inf)
    return best


# ---------------------------------------------------------------------------
# Translation test
# ---------------------------------------------------------------------------


class TranslationFit(NamedTuple):
    offset: np.ndarray
    residual: float


def _translation_residual(field, cz, xs, ys, u):
    try:
        r = cz - field(xs - u[0], ys - u[1])
    except DomainError:
        return math.inf, 0.0
    lo, hi = float(np.min(r)), float(np.max(r))
    return (hi - lo) / 2, (hi + lo) / 2


def translation_test(field: FieldLike, c: float, box=(-2, 2, -2, 2), grid_n: int = 40,
                     search=None, coarse_n: int = 21) -> TranslationFit:
    """Best translation ``(u1, u2, w)`` in ``f(c x, c y) ~ f(x - u1, y - u2) + w``.

    The objective is the max abs residual on a ``grid_n x grid_n`` grid over
    ``box``.  For fixed ``(u1, u2)`` the optimal ``w`` is the mid-range of
    the residual, so only the horizontal offset is searched: a coarse grid
    over ``search`` (default: the box half-widths), then Nelder-Mead.
    """
    if not c > 0:
        raise ValueError("scale must be positive")
    field = as_field(field)
    x0, x1, y0, y1 = map(float, box)
    gx, gy = np.meshgrid(np.linspace(x0, x1, grid_n), np.linspace(y0, y1, grid_n))
    xs, ys = gx.ravel(), gy.ravel()
    cz = field(c * xs, c * ys)
    if search is None:
        search = ((x1 - x0) / 2, (y1 - y0) / 2)
    su, sv = search

    best_u = np.zeros(2)
    best_res, best_w = _translation_residual(field, cz, xs, ys, best_u)
    if best_res > 0:
        cand = [np.array([a, b]) for a in np.linspace(-su, su, coarse_n)
                for b in np.linspace(-sv, sv, coarse_n)]
        for u in cand:
            res, w = _translation_residual(field, cz, xs, ys, u)
            if res < best_res:
                best_res, best_w, best_u = res, w, u
        opt = minimize(lambda u: _translation_residual(field, cz, xs, ys, u)[0], best_u,
                       method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 2000})
        res, w = _translation_residual(field, cz, xs, ys, opt.x)
        if res < best_res:
            best_res, best_w, best_u = res, w, opt.x
    return TranslationFit(np.array([best_u[0], best_u[1], best_w]), float(best_res))


# ---------------------------------------------------------------------------
# Direction obstruction
# ---------------------------------------------------------------------------


def dedupe_index(samples, cell: float):
    """Indices of one representative (the first) per cubic cell of side ``cell``."""
    samples = np.asarray(samples, dtype=float)
    m = int(math.ceil(2.0 / cell)) + 3
    k = np.floor((samples + 1.0) / cell).astype(np.int64) + 1
    key = (k[:, 0] * m + k[:, 1]) * m + k[:, 2]
    _, first = np.unique(key, return_index=True)
    return np.sort(first)


def dedupe_directions(samples, cell: float):
    return np.asarray(samples)[dedupe_index(samples, cell)]


def _thin_pair(samples, c, cell):
    """Thinned copies of S and psi_c(S) sharing one index set.

    Representatives are picked densely in both S and its image, so the
    stretching done by psi_c does not open gaps in either copy.
    """
    img = psi(c, samples)
    keep = np.union1d(dedupe_index(samples, cell), dedupe_index(img, cell))
    return samples[keep], img[keep]


def hausdorff(a, b, tree_a=None, tree_b=None) -> float:
    tree_a = tree_a if tree_a is not None else cKDTree(a)
    tree_b = tree_b if tree_b is not None else cKDTree(b)
    d_ab, _ = tree_b.query(a)
    d_ba, _ = tree_a.query(b)
    return float(max(d_ab.max(), d_ba.max()))


def _sphere_icp(src, dst_tree, dst, r, iters):
    orientation = 1.0 if np.linalg.det(r) > 0 else -1.0
    for _ in range(iters):
        _, idx = dst_tree.query(src @ r.T)
        h = src.T @ dst[idx]
        u, _, vt = np.linalg.svd(h)
        r_new = vt.T @ u.T
        if np.linalg.det(r_new) * orientation < 0:
            vt = vt.copy()
            vt[-1] *= -1
            r_new = vt.T @ u.T
        if np.max(np.abs(r_new - r)) < 1e-12:
            return r_new
        r = r_new
    return r


class Obstruction(NamedTuple):
    ort: RigidIsometry
    residual: float


def direction_obstruction(ds: DirectionSet, c: float, cell: float = 0.004,
                          search_cell: float = 0.05, icp_iters: int = 20,
                          finalists: int = 3, extra_starts: Sequence = ()) -> Obstruction:
    """Orthogonal map R bringing ``psi_c(S)`` closest to ``R(S)``.

    Distance is the symmetric Hausdorff distance between the (cell-deduped)
    point sets.  The identity is tried first; other candidates come from
    principal-axis frames refined by ICP on a coarser copy of the sets and
    must beat it strictly.  ``extra_starts`` (orthogonal matrices) widen
    the search, e.g. for offline oracle runs.
    """
    samples = np.asarray(ds.samples, dtype=float)
    if len(samples) == 0:
        raise EmptyDirectionSet("direction set has no samples")
    fine, fine_img = _thin_pair(samples, c, cell)
    tree_img = cKDTree(fine_img)
    best_r = np.eye(3)
    best = hausdorff(fine, fine_img, tree_b=tree_img)
    if best <= 1e-13:
        return Obstruction(RigidIsometry(best_r), best)

    coarse, coarse_img = _thin_pair(fine, c, search_cell)
    coarse_tree = cKDTree(coarse_img)
    e_s, e_p = principal_axes_origin(coarse), principal_axes_origin(coarse_img)
    signs = [np.diag(v) for v in itertools.product((1.0, -1.0), repeat=3)]
    starts = [np.eye(3)] + [e_p @ a @ e_s.T for a in signs]
    starts += [np.asarray(m, dtype=float) for m in extra_starts]
    scored = []
    for r0 in starts:
        r = _sphere_icp(coarse, coarse_tree, coarse_img, r0, icp_iters)
        scored.append((hausdorff(coarse @ r.T, coarse_img, tree_b=coarse_tree), r))
    scored.sort(key=lambda item: item[0])
    tree_fine = cKDTree(fine)
    for _, r in scored[:finalists]:
        # R(S) vs psi(S): query psi(S) against R(S) through R^T
        d_ab, _ = tree_img.query(fine @ r.T)
        d_ba, _ = tree_fine.query(fine_img @ r)
        h = float(max(d_ab.max(), d_ba.max()))
        if h < best:
            best, best_r = h, r
    return Obstruction(RigidIsometry(best_r), best)


def principal_axes_origin(points):
    _, vecs = np.linalg.eigh(points.T @ points)
    return vecs


# ---------------------------------------------------------------------------
# Rotation lemma
# ---------------------------------------------------------------------------


def rotation_angle(c: float, d: float) -> float:
    return math.atan(c * d) - math.atan(d)


def rotation_w(c: float, d: float) -> float:
    return math.sqrt(((c * d) ** 2 + 1) / (d * d + 1)) / (c * d)


class RotationCheck(NamedTuple):
    alpha: float
    w: float
    max_error: float
    x: np.ndarray
    y_curve: np.ndarray


def rotation_lemma_check(g: FieldLike, d: float, c: float, x_grid=(-2.0, 2.0, 401),
                         fiber_step: float = 0.05, y_range=(-50.0, 50.0),
                         bisections: int = 32) -> RotationCheck:
    """Rotate graph(g(x) + d y) about the x-axis and trace its trace on z = 0.

    For every x on the grid the graph fibre ``y -> (x, y, g(x) + d y)`` is
    sampled with spacing ``fiber_step``, rotated by
    ``arctan(c d) - arctan(d)``, and the sign change of the rotated height is
    bracketed; ``bisections`` halvings of that bracket locate the crossing.
    The extraction error is therefore proportional to ``fiber_step``.
    Returns the max deviation of the traced curve from ``-w g(x)``.
    """
    if d == 0:
        raise ValueError("d must be nonzero")
    if not c > 0:
        raise ValueError("c must be positive")
    g = as_field(g, arity=1)
    f = ScalarField(BinOp("+", g.expression, BinOp("*", Num(float(d)), Var("y"))), 2)
    alpha = rotation_angle(c, d)
    w = rotation_w(c, d)
    rot = rotation_about_x(alpha)

    lo, hi, nx = x_grid
    x = np.linspace(lo, hi, int(nx))
    y_lo, y_hi = y_range
    ys = np.arange(y_lo, y_hi + fiber_step / 2, fiber_step)

    def rotated(xv, yv):
        pts = np.stack([xv, yv, f(xv, yv)], axis=-1)
        return rot.apply(pts)

    xx, yy = np.meshgrid(x, ys, indexing="ij")
    height = rotated(xx, yy)[..., 2]
    sign = np.sign(height)
    change = sign[:, :-1] * sign[:, 1:] <= 0
    if not change.any(axis=1).all():
        bad = x[~change.any(axis=1)]
        raise ExtractionFailure(f"no crossing of z = 0 on fibres at x = {bad[:3]}...")
    k = np.argmax(change, axis=1)
    a = ys[k].copy()
    b = ys[k + 1].copy()
    s_a = np.sign(height[np.arange(len(x)), k])
    for _ in range(bisections):
        mid = (a + b) / 2
        s_mid = np.sign(rotated(x, mid)[:, 2])
        same = s_mid == s_a
        a = np.where(same, mid, a)
        b = np.where(same, b, mid)
    y_curve = rotated(x, (a + b) / 2)[:, 1]
    err = float(np.max(np.abs(y_curve + w * g(x))))
    return RotationCheck(alpha, w, err, x, y_curve)


# ---------------------------------------------------------------------------
# Subcase A2: reduction to the functional equation
# ---------------------------------------------------------------------------


class Reduction(NamedTuple):
    system: FuncEqSystem
    fit_residuals: tuple


def _sse_for_shift(g, x, gx, c, h, u):
    try:
        r = gx - h * g(c * x + u)
    except DomainError:
        return math.inf, 0.0
    v = float(np.mean(r))
    return float(np.sum((r - v) ** 2)), v


def subcase_a2_reduce(g: FieldLike, d: float, scales: Sequence[float], grid: Grid = Grid(),
                      tol: float = 1e-8, strict: bool = False, scan_n: int = 801) -> Reduction:
    """Build ``g(x) = h_c g(c x + u_c) + v_c`` with ``h_c = sqrt((d^2+1)/((cd)^2+1))``.

    ``u_c`` and ``v_c`` are fitted per scale by least squares on the grid
    (``v`` in closed form, ``u`` by a scan plus bounded refinement).  With
    ``strict`` a scale whose best max-residual exceeds ``tol`` raises
    :class:`FitFailure`; otherwise the residuals are returned alongside.
    """
    if not d > 0:
        raise ValueError("d must be positive")
    if not scales:
        raise ValueError("need at least one scale")
    g = as_field(g, arity=1)
    x = grid.points
    gx = g(x)
    entries, residuals = [], []
    span = (grid.hi - grid.lo)
    for c in scales:
        h = math.sqrt((d * d + 1) / ((c * d) ** 2 + 1))
        reach = (abs(c) + 1) * span
        cand = np.linspace(-reach, reach, scan_n)
        cand = cand[np.argsort(np.abs(cand), kind="stable")]
        sse = np.array([_sse_for_shift(g, x, gx, c, h, u)[0] for u in cand])
        i = int(np.argmin(sse))
        u_best, sse_best = float(cand[i]), float(sse[i])
        if sse_best > 0 and math.isfinite(sse_best):
            step = 2 * reach / (scan_n - 1)
            opt = minimize_scalar(lambda u: _sse_for_shift(g, x, gx, c, h, u)[0],
                                  bounds=(u_best - step, u_best + step), method="bounded",
                                  options={"xatol": 1e-12})
            if opt.fun < sse_best:
                u_best = float(opt.x)
        _, v_best = _sse_for_shift(g, x, gx, c, h, u_best)
        entry = ScaleEntry(float(c), h, u_best, v_best)
        try:
            res = float(np.max(np.abs(gx - h * g(c * x + u_best) - v_best)))
        except DomainError:
            res = math.inf
        if strict and not res <= tol:
            raise FitFailure(f"no (u, v) fits scale c={c}: best residual {res:.3g}")
        entries.append(entry)
        residuals.append(res)
    return Reduction(FuncEqSystem(entries, g, grid), tuple(residuals))


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def minmax_separation(field: FieldLike, centre=(0.0, 0.0), radius: float = 1.0,
                      n_r: int = 201, n_t: int = 720, atol: float = 1e-9) -> float:
    """Distance between the argmin and argmax sets of ``field`` on a disc."""
    field = as_field(field)
    r = np.linspace(0, radius, n_r)
    t = np.linspace(-math.pi, math.pi, n_t, endpoint=False)
    rr, tt = np.meshgrid(r, t)
    xs = centre[0] + (rr * np.cos(tt)).ravel()
    ys = centre[1] + (rr * np.sin(tt)).ravel()
    z = field(xs, ys)
    lo = np.column_stack([xs, ys])[z <= z.min() + atol]
    hi = np.column_stack([xs, ys])[z >= z.max() - atol]
    dist, _ = cKDTree(hi).query(lo)
    return float(dist.min())


def minmax_scaling_check(field: FieldLike, c: float, centre=(0.0, 0.0), radius: float = 1.0):
    """Separation of extreme sets of f on B(x, R) and of f(c .) on B(x/c, R/c).

    The second should be the first divided by ``c``; returns both.
    """
    field = as_field(field)
    base = minmax_separation(field, centre, radius)
    scaled = minmax_separation(field.rescaled(c), (centre[0] / c, centre[1] / c), radius / c)
    return base, scaled


def plane_fit(points):
    """Least-squares ``z = a + b x + d y``; returns ``(a, b, d, max residual)``."""
    pts = np.asarray(points, dtype=float)
    design = np.column_stack([np.ones(len(pts)), pts[:, 0], pts[:, 1]])
    coef, *_ = np.linalg.lstsq(design, pts[:, 2], rcond=None)
    res = float(np.max(np.abs(design @ coef - pts[:, 2])))
    return float(coef[0]), float(coef[1]), float(coef[2]), res


def split_form(field: FieldLike, box, n: int = 21, tol: float = 1e-9):
    """Detect ``f(x, y) = g(x) + d y``; returns ``(g, d)`` or ``None``."""
    field = as_field(field)
    x0, x1, y0, y1 = map(float, box)
    xs, ys = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n))
    xs, ys = xs.ravel(), ys.ravel()
    g = field.restrict_y(0.0)
    try:
        fz = field(xs, ys)
        gz = g(xs)
    except DomainError:
        return None
    diff = fz - gz
    if np.allclose(ys, 0):
        return None
    d = float(np.dot(diff, ys) / np.dot(ys, ys))
    scale = max(1.0, float(np.max(np.abs(fz))))
    if np.max(np.abs(diff - d * ys)) > tol * scale:
        return None
    return g, d


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


class Decision(str, enum.Enum):
    RIGID = "Rigid"
    NOT_RIGID = "NotRigid"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class RigidityConfig:
    box: tuple = (-3.0, 3.0, -3.0, 3.0)
    n: int = 500
    n_directions: Optional[int] = None
    seed: int = 0
    bins: int = 360
    tol_align: float = 1e-3
    tol_dir: float = 0.03
    min_overlap: float = 0.5
    translation_grid: int = 40
    pair_budget: int = 2_000_000
    classifier: ClassifierTolerances = ClassifierTolerances()
    family: FamilyTolerances = FamilyTolerances()
    funceq_grid: Grid = Grid()
    run_a2: bool = True

    def __post_init__(self):
        for name in ("tol_align", "tol_dir", "min_overlap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n < 4:
            raise ValueError("n must be at least 4")


@dataclass
class RigidityVerdict:
    c: float
    decision: Decision
    isometry: Optional[RigidIsometry]
    rms: float
    obstruction: float
    translation_residual: float
    overlap: float
    notes: list = field(default_factory=list)

    def to_json(self):
        return {
            "c": self.c,
            "decision": self.decision.value,
            "rms": _num(self.rms),
            "obstruction": _num(self.obstruction),
            "translation_residual": _num(self.translation_residual),
            "overlap": _num(self.overlap),
            "isometry": None if self.isometry is None else self.isometry.to_dict(),
            "notes": list(self.notes),
        }


def _num(v):
    return float(v) if v is not None and math.isfinite(v) else None


@dataclass
class PipelineResult:
    verdicts: list
    decision: Decision
    case: object
    summary: dict

    def to_json(self):
        return {
            "decision": self.decision.value,
            "verdicts": [v.to_json() for v in self.verdicts],
            "summary": self.summary,
        }


def decide(rms: float, obstruction: float, tol_align: float, tol_dir: float) -> Decision:
    align_ok = rms <= tol_align
    dir_ok = obstruction <= tol_dir
    if align_ok and dir_ok:
        return Decision.RIGID
    if not align_ok and not dir_ok:
        return Decision.NOT_RIGID
    return Decision.INDETERMINATE


def scale_verdict(field: ScalarField, c: float, ds: DirectionSet, source: GraphCloud,
                  cfg: RigidityConfig) -> RigidityVerdict:
    obs = direction_obstruction(ds, c)
    trans = translation_test(field, c, cfg.box, grid_n=cfg.translation_grid)
    target = sample_graph(field, c, cfg.box, cfg.n, cfg.seed)
    align = find_isometry(source, target, extra_seeds=[obs.ort.ort], min_overlap=cfg.min_overlap)
    decision = decide(align.rms, obs.residual, cfg.tol_align, cfg.tol_dir)
    notes = [f"best isometry seed: {align.seed}",
             f"orientation: {'preserving' if align.isometry.orientation_preserving else 'reversing'}"]
    if not align.converged:
        notes.append("isometry refinement hit the iteration cap")
    if not math.isfinite(align.rms):
        notes.append(f"no candidate kept {cfg.min_overlap:.0%} overlap")
    if trans.residual <= 1e-9:
        notes.append("rigid via a translation")
    notes.append(f"verdict relative to the window {list(cfg.box)}")
    return RigidityVerdict(float(c), decision, align.isometry, align.rms, obs.residual,
                           trans.residual, align.overlap, notes)


def full_rigidity_pipeline(field: FieldLike, scales: Sequence[float],
                           cfg: RigidityConfig = RigidityConfig()) -> PipelineResult:
    """Direction-set case, per-scale verdicts and closed-form diagnostics."""
    field = as_field(field)
    scales = sorted(float(c) for c in scales)
    if not scales:
        raise ValueError("need at least one scale")
    if any(not c > 0 for c in scales):
        raise ValueError("scales must be positive")
    n_dir = cfg.n_directions or cfg.n
    ds = sample_direction_set(field, cfg.box, n_dir, cfg.seed, cfg.pair_budget)
    label = classify(estimate_profile(ds, cfg.bins), cfg.classifier)
    source = sample_graph(field, 1.0, cfg.box, cfg.n, cfg.seed)

    verdicts = [scale_verdict(field, c, ds, source, cfg) for c in scales]
    decisions = {v.decision for v in verdicts}
    if decisions == {Decision.RIGID}:
        overall = Decision.RIGID
    elif Decision.NOT_RIGID in decisions:
        overall = Decision.NOT_RIGID
    else:
        overall = Decision.INDETERMINATE

    a, b, d, plane_res = plane_fit(source.points)
    plane_scale = max(1.0, float(np.max(np.abs(source.points[:, 2]))))
    summary = {
        "case": label.to_json(),
        "scales": scales,
        "plane_fit": {"a": a, "b": b, "d": d, "residual": plane_res,
                      "affine": plane_res <= 1e-9 * plane_scale},
    }
    summary["split_form"] = _split_summary(field, scales, cfg, affine=summary["plane_fit"]["affine"])
    return PipelineResult(verdicts, overall, label.case, summary)


def _split_summary(field, scales, cfg, affine):
    split = split_form(field, cfg.box)
    if split is None:
        return {"detected": False}
    g, d = split
    out = {"detected": True, "g": g.source, "d": d}
    if affine:
        out["note"] = "graph is a plane; no reduction needed"
        return out
    if d == 0:
        out["note"] = "d = 0: the y-direction is a symmetry; rigidity reduces to g alone"
        return out
    if not cfg.run_a2:
        return out
    if d < 0:
        g = ScalarField(BinOp("*", Num(-1.0), g.expression), 1)
        d = -d
        out["note"] = "d < 0: analysed -f instead"
    red = subcase_a2_reduce(g, d, [c for c in scales if c != 1.0] or scales, cfg.funceq_grid)
    out["h"] = [e.h for e in red.system.entries]
    out["fit_residuals"] = [_num(r) for r in red.fit_residuals]
    try:
        fam = classify_solution(red.system, cfg.family)
        out["family"] = fam.to_json()
    except SystemViolated as exc:
        out["family"] = {"kind": "SystemViolated", "residual": _num(exc.residual)}
    return out
