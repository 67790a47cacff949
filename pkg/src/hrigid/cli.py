"""Command-line front end: ``hrigid <command> [options]``.

Every command accepts ``--config PATH`` (a JSON object whose keys are the
long option names, with dashes or underscores).  Explicit flags override the
file, which overrides the built-in defaults.  Reports go to ``--out`` (or
stdout) as UTF-8 JSON with sorted keys.  Files are written to a temporary
name and renamed into place, so a failed run leaves no partial output.  The
only non-deterministic datum, the wall-clock time, goes to a
``<out>.sidecar.json`` file next to the report.

Exit codes
    classify           0 definite case, 2 Indeterminate, 1 error
    rigidity           0 all Rigid, 3 any NotRigid, 2 any Indeterminate, 1 error
    funceq             0 Constant / Affine / TwoSidedPower, 3 None, 1 error
    rotation-check     0 max_error <= tol, 3 above tol, 1 error
    directions-export  0 written, 1 error
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .directions import ClassifierTolerances, Case, classify, estimate_profile, sample_direction_set
from .errors import ConfigError, HRigidError, SystemViolated
from .expr import as_field
from .funceq import FamilyTolerances, FuncEqSystem, Kind, classify_solution, residual
from .rigidity import Decision, RigidityConfig, full_rigidity_pipeline, rotation_lemma_check

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INDETERMINATE = 2
EXIT_NEGATIVE = 3


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------

DEFAULTS = {
    "classify": {"box": "-5,5,-5,5", "n": 2000, "seed": 0, "bins": 360,
                 "tol_pole": 0.05, "tol_zero": 0.05, "tol_arc": 0.02, "tol_len": 2.0},
    "rigidity": {"box": "-3,3,-3,3", "n": 500, "seed": 0, "bins": 360,
                 "tol_align": 1e-3, "tol_dir": 0.03, "min_overlap": 0.5},
    "funceq": {"tol_sys": 1e-8, "tol_const": 1e-9, "tol_fit": 1e-7,
               "tol_exponent": 1e-8, "tol_shift": 1e-8},
    "rotation-check": {"field": "x^2", "d": 1.0, "c": 2.0, "tol": 1e-6,
                       "fiber_step": 0.05, "x_range": "-2,2", "x_points": 401},
    "directions-export": {"box": "-5,5,-5,5", "n": 100, "seed": 0, "bins": 360},
}


def _floats(text, count=None, what="list"):
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        text = str(text).strip()
        vals = [float(v) for v in text.split(",")] if text else []
    if count is not None and len(vals) != count:
        raise ConfigError(f"{what} needs {count} comma-separated numbers, got {len(vals)}")
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{what} contains a non-finite value")
    return vals


def _shared(p, field=True, sampling=True):
    if field:
        p.add_argument("--field", help="expression in x and y, e.g. '1+2*x+3*y'")
    if sampling:
        p.add_argument("--box", help="sampling window 'x0,x1,y0,y1'")
        p.add_argument("--n", type=int, help="number of sample points")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--bins", type=int, help="azimuth bins for the arc profile")
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--config", help="JSON file with option values")


def build_parser():
    ap = argparse.ArgumentParser(prog="hrigid", description="Horizontal rigidity toolkit.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="label the direction set of a field with its case")
    _shared(p)
    p.add_argument("--tol-pole", type=float)
    p.add_argument("--tol-zero", type=float)
    p.add_argument("--tol-arc", type=float)
    p.add_argument("--tol-len", type=float, help="minimum arc length in bins")

    p = sub.add_parser("rigidity", help="per-scale rigidity verdicts for a field")
    _shared(p)
    p.add_argument("--scales", help="scales 'c1,c2,...'")
    p.add_argument("--tol-align", type=float)
    p.add_argument("--tol-dir", type=float)
    p.add_argument("--min-overlap", type=float)

    p = sub.add_parser("funceq", help="identify the solution family of a functional-equation system")
    _shared(p, sampling=False)
    p.add_argument("--system", help="JSON system file (g, entries, optional grid)")
    for name in ("sys", "const", "fit", "exponent", "shift"):
        p.add_argument(f"--tol-{name}", type=float)

    p = sub.add_parser("rotation-check", help="numerically verify the rotation lemma")
    _shared(p, sampling=False)
    p.add_argument("--d", type=float, help="slope of the linear y term")
    p.add_argument("--c", type=float, help="scale")
    p.add_argument("--tol", type=float, help="maximum allowed error")
    p.add_argument("--fiber-step", type=float)
    p.add_argument("--x-range", help="'x0,x1'")
    p.add_argument("--x-points", type=int)

    p = sub.add_parser("directions-export", help="write direction samples (CSV) and the arc profile (JSON)")
    _shared(p)
    p.add_argument("--profile-out", help="profile JSON path (default: <out stem>.profile.json)")
    return ap


def resolve(args):
    """Merge defaults, the optional config file and explicit flags."""
    merged = dict(DEFAULTS.get(args.command, {}))
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        merged.update({k.replace("-", "_"): v for k, v in data.items()})
    for key, value in vars(args).items():
        if key not in ("command", "config") and value is not None:
            merged[key] = value
    for key in [k for k in merged if k.startswith("tol") or k == "min_overlap"]:
        if not float(merged[key]) > 0:
            raise ConfigError(f"{key} must be positive")
    return merged


def _need(cfg, key):
    if cfg.get(key) in (None, ""):
        raise ConfigError(f"missing --{key.replace('_', '-')}")
    return cfg[key]


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def dumps(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def atomic_write(path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sidecar_path(path) -> Path:
    return Path(f"{path}.sidecar.json")


def emit(cfg, files):
    """Write ``{path: text}`` atomically, then one sidecar per file.

    ``files`` maps ``None`` to text destined for stdout.
    """
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    for path, text in files.items():
        if path is None:
            sys.stdout.write(text)
            continue
        atomic_write(path, text)
    for path in files:
        if path is not None:
            atomic_write(sidecar_path(path), dumps({"created": stamp, "version": __version__}))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_classify(cfg):
    field = as_field(_need(cfg, "field"))
    box = _floats(cfg["box"], 4, "box")
    ds = sample_direction_set(field, box, int(cfg["n"]), int(cfg["seed"]))
    profile = estimate_profile(ds, int(cfg["bins"]))
    tol = ClassifierTolerances(float(cfg["tol_pole"]), float(cfg["tol_zero"]),
                               float(cfg["tol_arc"]), float(cfg["tol_len"]))
    label = classify(profile, tol)
    report = {
        "case": label.case.value,
        "label": label.to_json(),
        "profile": profile.to_json(),
        "thresholds": tol.to_json(),
        "meta": _meta(ds.meta, bins=int(cfg["bins"])),
    }
    code = EXIT_INDETERMINATE if label.case is Case.INDETERMINATE else EXIT_OK
    return report, code


def cmd_rigidity(cfg):
    field = as_field(_need(cfg, "field"))
    scales = _floats(cfg.get("scales", ""), what="scales")
    if not scales:
        raise ConfigError("scale set is empty")
    if any(not c > 0 for c in scales):
        raise ConfigError("scales must be positive")
    rc = RigidityConfig(box=tuple(_floats(cfg["box"], 4, "box")), n=int(cfg["n"]),
                        seed=int(cfg["seed"]), bins=int(cfg["bins"]),
                        tol_align=float(cfg["tol_align"]), tol_dir=float(cfg["tol_dir"]),
                        min_overlap=float(cfg["min_overlap"]))
    result = full_rigidity_pipeline(field, scales, rc)
    report = result.to_json()
    report["meta"] = {"field": field.source, "box": list(rc.box), "n": rc.n, "seed": rc.seed,
                      "bins": rc.bins, "tol_align": rc.tol_align, "tol_dir": rc.tol_dir,
                      "min_overlap": rc.min_overlap}
    decisions = {v.decision for v in result.verdicts}
    if Decision.NOT_RIGID in decisions:
        code = EXIT_NEGATIVE
    elif Decision.INDETERMINATE in decisions:
        code = EXIT_INDETERMINATE
    else:
        code = EXIT_OK
    return report, code


def cmd_funceq(cfg):
    path = _need(cfg, "system")
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read system {path}: {exc}") from exc
    if cfg.get("field"):
        data = dict(data, g=cfg["field"])
    try:
        system = FuncEqSystem.from_json(data)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed system file: {exc}") from exc
    tol = FamilyTolerances(float(cfg["tol_sys"]), float(cfg["tol_const"]), float(cfg["tol_fit"]),
                           float(cfg["tol_exponent"]), float(cfg["tol_shift"]))
    family = classify_solution(system, tol)
    report = {
        "family": family.to_json(),
        "system_residual": float(residual(system)),
        "system": system.to_json(),
    }
    return report, EXIT_NEGATIVE if family.kind is Kind.NONE else EXIT_OK


def cmd_rotation_check(cfg):
    g = as_field(_need(cfg, "field"), arity=1)
    d, c, tol = float(cfg["d"]), float(cfg["c"]), float(cfg["tol"])
    if d == 0:
        raise ConfigError("d must be nonzero")
    if not c > 0:
        raise ConfigError("c must be positive")
    x0, x1 = _floats(cfg["x_range"], 2, "x-range")
    chk = rotation_lemma_check(g, d, c, x_grid=(x0, x1, int(cfg["x_points"])),
                               fiber_step=float(cfg["fiber_step"]))
    report = {
        "alpha": chk.alpha,
        "w": chk.w,
        "max_error": chk.max_error,
        "tol": tol,
        "meta": {"g": g.source, "d": d, "c": c, "fiber_step": float(cfg["fiber_step"]),
                 "x_range": [x0, x1], "x_points": int(cfg["x_points"])},
        "curve": {"x": chk.x.tolist(), "y": chk.y_curve.tolist()},
    }
    return report, EXIT_OK if chk.max_error <= tol else EXIT_NEGATIVE


def cmd_directions_export(cfg):
    field = as_field(_need(cfg, "field"))
    out = _need(cfg, "out")
    ds = sample_direction_set(field, _floats(cfg["box"], 4, "box"), int(cfg["n"]), int(cfg["seed"]))
    profile = estimate_profile(ds, int(cfg["bins"]))
    profile_out = cfg.get("profile_out") or str(Path(out).with_suffix("")) + ".profile.json"
    report = {"profile": profile.to_json(), "meta": _meta(ds.meta, bins=int(cfg["bins"]),
                                                          samples=len(ds))}
    return {out: ds.to_csv(), profile_out: dumps(report)}, EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "rigidity": cmd_rigidity,
    "funceq": cmd_funceq,
    "rotation-check": cmd_rotation_check,
    "directions-export": cmd_directions_export,
}


def _meta(meta, **extra):
    out = {k: v for k, v in meta.items()}
    out.update(extra)
    return out


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        result, code = COMMANDS[args.command](cfg)
        if args.command == "directions-export":
            files = result
        else:
            files = {cfg.get("out"): dumps(result)}
        emit(cfg, files)
    except SystemViolated as exc:
        print(f"hrigid {args.command}: system violated: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (HRigidError, ValueError, OSError) as exc:
        print(f"hrigid {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
