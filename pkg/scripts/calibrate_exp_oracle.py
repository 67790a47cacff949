"""Oracle run behind the non-rigidity thresholds for exp(x) at c = 2.

Runs the isometry search and the direction obstruction with a widened seed
set (all 48 signed permutations in world and principal frames, plus seeded
random rotations and reflections) at n = 2000 on [-3, 3]^2, and writes the
minima together with the derived thresholds to
``tests/fixtures/exp_calibration.json``.

    python3 scripts/calibrate_exp_oracle.py
"""

import argparse
import json
import time
from pathlib import Path

from scipy.spatial.transform import Rotation

from hrigid.directions import sample_direction_set
from hrigid.rigidity import direction_obstruction, find_isometry, sample_graph
from hrigid.sphere import signed_permutations

FIELD = "exp(x)"
C = 2.0
BOX = (-3.0, 3.0, -3.0, 3.0)
# thresholds sit at this fraction of the oracle minima
SAFETY = 0.5


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--random-seeds", type=int, default=24)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1]
                                         / "tests" / "fixtures" / "exp_calibration.json"))
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    source = sample_graph(FIELD, 1.0, BOX, args.n, args.seed)
    target = sample_graph(FIELD, C, BOX, args.n, args.seed + 1)
    align = find_isometry(source, target, world_frames=True,
                          random_seeds=args.random_seeds, seed=args.seed)
    print(f"alignment: rms={align.rms:.6g} overlap={align.overlap:.3f} seed={align.seed}")

    ds = sample_direction_set(FIELD, BOX, args.n, args.seed)
    rots = Rotation.random(args.random_seeds, random_state=args.seed).as_matrix()
    starts = list(signed_permutations()) + list(rots)
    obs = direction_obstruction(ds, C, extra_starts=starts)
    print(f"obstruction: residual={obs.residual:.6g}")

    payload = {
        "field": FIELD,
        "c": C,
        "box": list(BOX),
        "n": args.n,
        "seed": args.seed,
        "random_seeds": args.random_seeds,
        "oracle_rms": float(align.rms),
        "oracle_overlap": float(align.overlap),
        "oracle_obstruction": float(obs.residual),
        "safety": SAFETY,
        "rms_threshold": SAFETY * float(align.rms),
        "obstruction_threshold": SAFETY * float(obs.residual),
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out} in {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
