"""Named property suites with a machine-readable pass/fail report.

Each suite returns a SuiteReport carrying (claim id, trials, failures, worst
error). Suites draw from their own sub-streams of the batch seed and run in a
fixed order so reports diff cleanly between runs.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .family import (FamilySpec, bump_eval, build_witness, check_witness, random_plane, torus_family,
                     translation_flow)
from .geometry import wrap_diff
from .kinematic import graph_volume_sides, nj_ratio_direct, nj_ratio_formula

WITNESS_POINT_TOL = 1e-8
WITNESS_GAP_TOL = 1e-6
CLAIM22_TOL = 1e-5
LEMMA_B2_TOL = 1e-9
PROP_B1_TOL = 1e-6
JACOBIAN_FD_TOL = 1e-5
TRIANGULAR_DIAG_TOL = 1e-6

SUITE_ORDER = ("A1", "A2", "claim_2_2", "lemma_B2", "prop_B1")


@dataclass
class SuiteReport:
    claim: str
    trials: int
    failures: int
    worst_error: float
    details: dict = field(default_factory=dict)
    failure_examples: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.trials > 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


@dataclass
class BatchReport:
    seed: int
    suites: list

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "passed": self.passed, "suites": [s.to_dict() for s in self.suites]}


def suite_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), SUITE_ORDER.index(name.split(":")[0])]))


def _note(examples, item, cap=10):
    if len(examples) < cap:
        examples.append(item)


# (A1) ---------------------------------------------------------------------

def triangular_block_check(spec: FamilySpec, x, t=None, round_index: int = 0):
    """d/dt of the first inner chart's block at x, with only that block's t set.

    Returns (block in chart units, expected diagonal, chart index). The block
    must be lower triangular, with diagonal beta(|q_j|) where q_j is the point
    right after the j-th axis flow; at t = 0 every q_j is phi_i(x).
    """
    n = spec.n
    i = int(spec.atlas.inner_charts(x)[0])
    w = np.zeros(spec.N)
    t = np.zeros(n) if t is None else np.asarray(t, dtype=float)
    sl = spec.block_slice(round_index, i)
    w[sl][:n] = t
    pd = spec.param_derivative(w, x)
    y = spec.atlas.chart_coords(i, x)
    # later blocks are the identity, earlier ones too, so only chart scaling remains
    block = pd[:, sl][:, :n] / spec.atlas.scale
    q = y.copy()
    diag = np.empty(n)
    for j in range(n):
        q = translation_flow(j, t[j], q, spec.flow_step)
        diag[j] = bump_eval(np.linalg.norm(q))
    return block, diag, i


def suite_A1(spec: FamilySpec, trials: int, seed: int) -> SuiteReport:
    """Rank-n parameter derivative at random (w, x), plus triangular structure at w = 0."""
    rng = suite_rng(seed, "A1")
    n = spec.n
    failures, examples, smins = 0, [], []
    for j in range(trials):
        w = spec.sample(rng)
        x = rng.random(n)
        sv = np.linalg.svd(spec.param_derivative(w, x), compute_uv=False)
        smins.append(sv[-1])
        if not (sv[-1] > 0 and sv[-1] > n * np.finfo(float).eps * sv[0]):
            failures += 1
            _note(examples, {"trial": j, "smin": float(sv[-1]), "smax": float(sv[0])})

    # triangular structure: exact at t = 0, and the zero pattern at random t
    tri_trials = max(1, min(trials, 50))
    tri_err = 0.0
    for j in range(tri_trials):
        x = rng.random(n)
        t = None if j % 2 == 0 else rng.uniform(-1.0, 1.0, n)
        block, diag, chart = triangular_block_check(spec, x, t)
        upper = block[np.triu_indices(n, 1)]
        err = float(np.max(np.abs(np.diag(block) - diag) / diag))
        exact_zero = bool(np.all(upper == 0.0))
        tol = 4 * np.finfo(float).eps if t is None else TRIANGULAR_DIAG_TOL
        if t is None:
            # identity parameters: the block is s_i beta(|phi_i(x)|) I on the nose
            err = float(np.max(np.abs(block - np.diag(diag))))
        tri_err = max(tri_err, err)
        if not exact_zero or err > tol or np.any(diag <= 0):
            failures += 1
            _note(examples, {"triangular_trial": j, "chart": chart, "upper": upper.tolist(), "diag_err": err})
    smins = np.array(smins)
    details = {
        "rank_trials": trials, "triangular_trials": tri_trials,
        "min_singular_value": float(smins.min()) if len(smins) else None,
        "median_min_singular_value": float(np.median(smins)) if len(smins) else None,
        "triangular_worst_diag_error": tri_err,
    }
    return SuiteReport("A1", trials + tri_trials, failures, tri_err, details, examples)


# (A2) ---------------------------------------------------------------------

def suite_A2(spec: FamilySpec, trials: int, seed: int, ks=None) -> SuiteReport:
    """Witnesses for random Grassmannian pairs at every k, verified by evaluation."""
    rng = suite_rng(seed, "A2")
    n = spec.n
    ks = list(range(n)) if ks is None else list(ks)
    failures, examples = 0, []
    worst, max_norm = 0.0, 0.0
    per_k = {}
    for k in ks:
        norms = []
        for j in range(trials):
            sp = random_plane(rng, n, k)
            sq = random_plane(rng, n, k)
            try:
                wit = build_witness(spec, sp, sq, check_radius=False)
            except Exception as exc:
                failures += 1
                _note(examples, {"k": k, "trial": j, "error": f"{type(exc).__name__}: {exc}"})
                continue
            perr, gap = check_witness(spec, wit.w, sp, sq)
            norms.append(wit.norm)
            worst = max(worst, perr / WITNESS_POINT_TOL, gap / WITNESS_GAP_TOL)
            if perr > WITNESS_POINT_TOL or gap > WITNESS_GAP_TOL or wit.norm > spec.R:
                failures += 1
                _note(examples, {"k": k, "trial": j, "point_error": perr, "gap": gap, "norm": wit.norm})
        per_k[k] = {"max_norm": max(norms) if norms else None, "trials": trials}
        max_norm = max([max_norm] + norms)
    details = {"n": n, "R": spec.R, "max_witness_norm": max_norm, "per_k": per_k,
               "tolerances": {"point": WITNESS_POINT_TOL, "gap": WITNESS_GAP_TOL}}
    # worst_error is the largest tolerance-normalized residual
    return SuiteReport(f"A2:T{n}", trials * len(ks), failures, worst, details, examples)


# tangent space of the incidence manifold -----------------------------------

def _step_counts(spec: FamilySpec, w) -> np.ndarray:
    t = spec.reshape(w)[..., :spec.n]
    return np.ceil(np.abs(t) / spec.flow_step)


def suite_claim_2_2(spec: FamilySpec, trials: int, seed: int) -> SuiteReport:
    """Along s -> (w + s hdot, p + s pdot), q(s) = Psi(w(s))(p(s)) satisfies
    qdot - dPsi pdot = d(ev_p) hdot."""
    rng = suite_rng(seed, "claim_2_2")
    n = spec.n
    failures, examples, worst = 0, [], 0.0
    for j in range(trials):
        w = spec.sample(rng)
        p = rng.random(n)
        hdot = rng.standard_normal(spec.N)
        hdot /= np.linalg.norm(hdot)
        pdot = rng.standard_normal(n)
        pdot /= np.linalg.norm(pdot)
        _, dh, dev = spec.evaluate_all(w, p)
        speed = np.linalg.norm(dev @ hdot) + np.linalg.norm(dh @ pdot)
        delta = 0.05 / max(1.0, speed)
        # keep the stencil inside one smoothness cell of the fixed-step flows
        while delta > 1e-12 and not np.array_equal(_step_counts(spec, w + delta * hdot),
                                                   _step_counts(spec, w - delta * hdot)):
            delta /= 4

        def quotient(h):
            qp = spec.apply(w + h * hdot, p + h * pdot)
            qm = spec.apply(w - h * hdot, p - h * pdot)
            return wrap_diff(qp - qm) / (2 * h)

        qdot, _ = ridders(quotient, delta)
        lhs = qdot - dh @ pdot
        rhs = dev @ hdot
        scale = max(np.linalg.norm(rhs), np.linalg.norm(dh @ pdot), 1e-300)
        err = float(np.linalg.norm(lhs - rhs) / scale)
        worst = max(worst, err)
        if not err <= CLAIM22_TOL:
            failures += 1
            _note(examples, {"trial": j, "rel_error": err, "initial_step": delta})
    return SuiteReport("claim_2_2", trials, failures, worst, {"tolerance": CLAIM22_TOL}, examples)


# linear-algebra identities ------------------------------------------------------

def suite_lemma_B2(trials: int, seed: int, max_dim: int = 8) -> SuiteReport:
    """det(G G^T)^(-1/2) against |det pi1| / NJ(pi2) on S = graph(G)."""
    rng = suite_rng(seed, "lemma_B2")
    failures, examples, worst = 0, [], 0.0
    for j in range(trials):
        a = int(rng.integers(1, max_dim + 1))
        b = int(rng.integers(1, a + 1))
        g = rng.standard_normal((b, a))
        lhs, rhs = graph_volume_sides(g)
        err = abs(lhs - rhs) / abs(lhs)
        worst = max(worst, err)
        if not err <= LEMMA_B2_TOL:
            failures += 1
            _note(examples, {"trial": j, "a": a, "b": b, "rel_error": err})
    return SuiteReport("lemma_B2", trials, failures, worst, {"tolerance": LEMMA_B2_TOL}, examples)


def ridders(diff, h0: float, shrink: float = 1.4, levels: int = 24):
    """Ridders' extrapolation of a central-difference quotient diff(h) -> array.

    The whole tableau is scanned (no early exit) since h0 may start outside
    the asymptotic regime. Returns (estimate, error_estimate).
    """
    c2 = shrink * shrink
    tab = [[np.asarray(diff(h0), dtype=float)]]
    best, err = tab[0][0], np.inf
    h = h0
    for i in range(1, levels):
        h /= shrink
        row = [np.asarray(diff(h), dtype=float)]
        fac = c2
        for j in range(1, i + 1):
            row.append((row[j - 1] * fac - tab[i - 1][j - 1]) / (fac - 1.0))
            fac *= c2
            e = max(np.max(np.abs(row[j] - row[j - 1])), np.max(np.abs(row[j] - tab[i - 1][j - 1])))
            if e <= err:
                err, best = e, row[j]
        tab.append(row)
    return best, err


def jacobian_fd_error(spec: FamilySpec, w, x, step: float | None = None) -> float:
    """Relative error of the spatial Jacobian against Ridders-extrapolated central differences."""
    n = spec.n
    jac = spec.jacobian(w, x)
    # the image must move well under half a period across the widest stencil
    h0 = 0.05 / max(1.0, np.linalg.norm(jac, 2)) if step is None else step
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        col, _ = ridders(lambda h: wrap_diff(spec.apply(w, x + h * e) - spec.apply(w, x - h * e)) / (2 * h), h0)
        cols.append(col)
    fd = np.column_stack(cols)
    return float(np.linalg.norm(fd - jac) / np.linalg.norm(jac))


def suite_prop_B1(spec: FamilySpec, trials: int, seed: int, check_fd: bool = True) -> SuiteReport:
    """|det J| / NJ(d ev_p) against the explicit incidence-space computation."""
    rng = suite_rng(seed, "prop_B1")
    n = spec.n
    failures, examples, worst, worst_fd = 0, [], 0.0, 0.0
    for j in range(trials):
        w = spec.sample(rng)
        p = rng.random(n)
        k = int(rng.integers(1, n))
        q = spec.apply(w, p)
        bv = random_plane(rng, n, k, p).basis
        bw = random_plane(rng, n, n - k, q).basis
        a = nj_ratio_formula(spec, w, p, bv, bw)
        b = nj_ratio_direct(spec, w, p, bv, bw)
        err = abs(a - b) / max(abs(a), 1e-300)
        worst = max(worst, err)
        bad = not err <= PROP_B1_TOL
        if check_fd:
            fd_err = jacobian_fd_error(spec, w, p)
            worst_fd = max(worst_fd, fd_err)
            bad |= not fd_err <= JACOBIAN_FD_TOL
        if bad:
            failures += 1
            _note(examples, {"trial": j, "formula": a, "direct": b, "rel_error": err})
    details = {"tolerance": PROP_B1_TOL, "jacobian_fd_tolerance": JACOBIAN_FD_TOL,
               "worst_jacobian_fd_error": worst_fd if check_fd else None}
    return SuiteReport(f"prop_B1:T{n}", trials, failures, worst, details, examples)


# batch ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VerifyConfig:
    a1_trials: int = 1000
    a2_trials: int = 100
    claim22_trials: int = 50
    lemma_b2_trials: int = 1000
    prop_b1_trials: int = 200
    include_t3: bool = True


def run_all(seed: int = 0, cfg: VerifyConfig = VerifyConfig(), spec2: FamilySpec | None = None,
            spec3: FamilySpec | None = None) -> BatchReport:
    spec2 = spec2 or torus_family(2)
    suites = [
        suite_A1(spec2, cfg.a1_trials, seed),
        suite_A2(spec2, cfg.a2_trials, seed),
    ]
    if cfg.include_t3:
        spec3 = spec3 or torus_family(3)
        suites.append(suite_A2(spec3, cfg.a2_trials, seed))
    suites += [
        suite_claim_2_2(spec2, cfg.claim22_trials, seed),
        suite_lemma_B2(cfg.lemma_b2_trials, seed),
        suite_prop_B1(spec2, cfg.prop_b1_trials, seed),
    ]
    return BatchReport(seed, suites)
