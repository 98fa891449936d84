"""Run every verification suite and print one line per suite."""
import argparse
import json

from kinlab.verify import VerifyConfig, run_all


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true", help="print the full report as JSON")
    a = ap.parse_args()
    batch = run_all(a.seed, VerifyConfig())
    if a.json:
        print(json.dumps(batch.to_dict(), indent=2, default=float))
        return
    for s in batch.suites:
        print(f"{'PASS' if s.passed else 'FAIL'} {s.claim:<12} {s.trials - s.failures}/{s.trials} "
              f"worst {s.worst_error:.3e}")


if __name__ == "__main__":
    main()
