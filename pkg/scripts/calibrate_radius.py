"""Calibrate the parameter-ball radius R for the shipped torus families.

R is set to twice the largest (A2) witness norm seen over random
Grassmannian pairs, leaving headroom so witnesses lie in the interior.

    python3 scripts/calibrate_radius.py --pairs 200 --seed 0
"""
import argparse
import json
import time

from kinlab.family import calibrate_radius, torus_family


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pairs", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = {}
    for n in (2, 3):
        t0 = time.perf_counter()
        spec = torus_family(n)
        r = calibrate_radius(spec, num_pairs=args.pairs, seed=args.seed)
        out[f"T{n}"] = {"R": r, "max_witness_norm": r / 2, "N": spec.N,
                        "seconds": round(time.perf_counter() - t0, 2)}
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
