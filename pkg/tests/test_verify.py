import numpy as np
import pytest

from kinlab import verify as V
from kinlab.family import torus_family


def test_suite_rng_distinct_streams():
    a = V.suite_rng(0, "A1").random()
    b = V.suite_rng(0, "A2").random()
    assert a != b and a == V.suite_rng(0, "A1").random()


def test_ridders_on_smooth_function():
    est, err = V.ridders(lambda h: (np.sin(1 + h) - np.sin(1 - h)) / (2 * h), 0.5)
    assert abs(est - np.cos(1)) < 1e-12 and err < 1e-10


def test_small_suites_pass(fam2):
    for rep in (V.suite_A1(fam2, 30, 1), V.suite_A2(fam2, 10, 1), V.suite_claim_2_2(fam2, 8, 1),
                V.suite_lemma_B2(100, 1), V.suite_prop_B1(fam2, 10, 1)):
        assert rep.passed, (rep.claim, rep.failure_examples)


def test_a2_on_t3(fam3):
    rep = V.suite_A2(fam3, 10, 2)
    assert rep.passed and rep.trials == 30


def test_batch_report_dict(fam2):
    cfg = V.VerifyConfig(a1_trials=4, a2_trials=2, claim22_trials=2, lemma_b2_trials=5, prop_b1_trials=2,
                         include_t3=False)
    batch = V.run_all(3, cfg, spec2=fam2)
    d = batch.to_dict()
    assert batch.passed and d["seed"] == 3
    assert [s["claim"] for s in d["suites"]][:2] == ["A1", "A2:T2"]


def test_suite_detects_broken_radius():
    # a radius below the witness norms must make A2 fail, not pass silently
    rep = V.suite_A2(torus_family(2, R=0.05), 5, 0)
    assert not rep.passed and rep.failures > 0
