"""Monte Carlo integral of #((I + a) n J) over a in T^2 against |sin theta| len(I) len(J)."""
import argparse
import math
import time

from kinlab.kinematic import geodesic_pair, mc_translation_family, translation_family_oracle

CASES = [(math.pi / 2, 1.0, 1.0), (math.pi / 6, 0.5, 0.8), (math.pi / 4, 0.8, 0.5), (0.0, 0.5, 0.8)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--threads", type=int, default=1)
    a = ap.parse_args()
    print(f"{'theta':>8} {'lenI':>5} {'lenJ':>5} {'estimate':>10} {'std_err':>9} {'exact':>9} {'sec':>6}")
    for theta, li, lj in CASES:
        I, J = geodesic_pair(theta, li, lj)
        t0 = time.perf_counter()
        rep = mc_translation_family(I, J, a.samples, a.seed, a.threads)
        exact = translation_family_oracle(theta, li, lj)
        print(f"{theta:8.4f} {li:5.2f} {lj:5.2f} {rep.estimate:10.5f} {rep.std_error:9.5f} {exact:9.5f} "
              f"{time.perf_counter() - t0:6.2f}")


if __name__ == "__main__":
    main()
