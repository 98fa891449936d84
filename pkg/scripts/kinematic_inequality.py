"""Empirical two-sided constant for the total intersection integral on T^2.

Random complementary geodesic segment pairs (volume products spanning a 15x
range or more) are pushed through the constructed family. The script reports
c_emp at M and 2M samples (the M run is the exact prefix of the 2M run) and
the relative change.

    python3 scripts/kinematic_inequality.py --samples 40 --radius 8 --flow-step 0.05
"""
import argparse
import json
import time

from kinlab.family import torus_family
from kinlab.kinematic import (CountingOptions, c_from_ratios, empirical_C, prefix_ratio_report,
                              random_geodesic_pairs)


def run(samples, radius, flow_step, pairs, seed, threads, len_lo, len_hi):
    fam = torus_family(2, radius, flow_step=flow_step)
    prs = random_geodesic_pairs(pairs, (len_lo, len_hi), seed=seed)
    vols = [V.total_volume * W.total_volume for _, V, W in prs]
    t0 = time.perf_counter()
    full = empirical_C(fam, prs, 2 * samples, seed, threads, CountingOptions(), keep_samples=True)
    half = prefix_ratio_report(full, prs, samples)
    change = abs(full.c_emp - half.c_emp) / half.c_emp
    degen = max(r.degenerate_fraction for r in full.reports.values())
    return {
        "R": fam.R, "flow_step": flow_step, "pairs": len(prs), "volume_span": max(vols) / min(vols),
        "samples": [samples, 2 * samples], "c_emp": [half.c_emp, full.c_emp], "relative_change": change,
        "all_ratios_in_band": all(1 / full.c_emp <= r <= full.c_emp for _, r in full.ratios),
        "normalized_c": [c_from_ratios([r for _, r in half.normalized]),
                         c_from_ratios([r for _, r in full.normalized])],
        "max_degenerate_fraction": degen, "failures": full.failures,
        "seconds": round(time.perf_counter() - t0, 1),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=40)
    ap.add_argument("--radius", type=float, default=None, help="family radius (default: calibrated)")
    ap.add_argument("--flow-step", type=float, default=0.05)
    ap.add_argument("--pairs", type=int, default=50)
    ap.add_argument("--seed", type=int, default=4)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--len-range", type=float, nargs=2, default=(0.04, 0.16))
    a = ap.parse_args()
    out = run(a.samples, a.radius, a.flow_step, a.pairs, a.seed, a.threads, *a.len_range)
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
