"""Fiber-integral estimates as eps shrinks.

On the translation family the fiber over (p, q) is the single translation
q - p, so the estimate should approach sin_angle(sigma_p, sigma_q). On the
constructed family the script reports the spread of log-estimates over random
plane pairs.
"""
import argparse
import math

import numpy as np

from kinlab.family import TranslationFamily, random_plane, torus_family
from kinlab.geometry import GrassmannPlane, TorusPoint, sin_angle
from kinlab.kinematic import fiber_integral_estimate, fiber_integral_many


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=16_000_000, help="translation-family samples per eps")
    ap.add_argument("--constructed-samples", type=int, default=8000)
    ap.add_argument("--pairs", type=int, default=50)
    ap.add_argument("--theta", type=float, default=0.7)
    a = ap.parse_args()

    sp = GrassmannPlane.from_span(TorusPoint([0.2, 0.3]), np.array([[1.0], [0.0]]))
    sq = GrassmannPlane.from_span(TorusPoint([0.7, 0.6]), np.array([[math.cos(a.theta)], [math.sin(a.theta)]]))
    exact = sin_angle(sp.basis, sq.basis)
    print(f"translation family, target {exact:.5f}")
    for eps in (0.08, 0.04, 0.02, 0.01):
        r = fiber_integral_estimate(TranslationFamily(2), sp, sq, eps, a.samples, 8)
        print(f"  eps {eps:5.3f}: {r.estimate:.5f} +- {r.std_error:.5f}  accepted {r.extra['accepted']}")

    fam = torus_family(2, flow_step=0.05)
    rng = np.random.default_rng(11)
    planes = [(random_plane(rng, 2, 1), random_plane(rng, 2, 1)) for _ in range(a.pairs)]
    reps = fiber_integral_many(fam, planes, 0.05, a.constructed_samples, 5)
    logs = np.array([r.log_estimate for r in reps if not isinstance(r, Exception)])
    print(f"constructed family (R={fam.R}): {len(logs)}/{len(reps)} estimated, "
          f"log-estimate min {logs.min():.2f} median {np.median(logs):.2f} max {logs.max():.2f}")


if __name__ == "__main__":
    main()
