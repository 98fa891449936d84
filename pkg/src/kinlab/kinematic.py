"""Monte Carlo estimators for kinematic integrals over a family of diffeomorphisms.

Random parameters are drawn from per-block streams keyed by
``(seed, block_index)``; sample ``j`` always comes from block ``j // BLOCK``
and consumes a fixed number of variates, so every estimate is a function of
``(seed, num_samples)`` alone, independent of how work is split over threads.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaln

from .family import FamilySpec, TranslationFamily
from .geometry import GrassmannPlane, InvalidInput, det_J, normal_jacobian, torus_distance, wrap01
from .intersect import TAU_TRANS, count_intersections
from .submanifold import (MAX_EDGE, DiscreteSubmanifold, GeodesicSegment, _refine_curve, discretize,
                          from_vertices, orthonormal_frames, pushforward)

BLOCK = 256
UNRELIABLE_DEGENERATE = 0.05


class InsufficientSamples(RuntimeError):
    def __init__(self, accepted: int, total: int):
        super().__init__(f"no accepted samples ({accepted}/{total}); increase num_samples or eps")
        self.acceptance_rate = accepted / max(total, 1)


class SubmersionFailure(RuntimeError):
    pass


@dataclass
class EstimateReport:
    estimate: float
    std_error: float
    num_samples: int
    seed: int
    degenerate_fraction: float = 0.0
    config_hash: str = ""
    log_measure: float = 0.0
    mean: float = 0.0
    unreliable: bool = False
    extra: dict = field(default_factory=dict)
    samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def log_estimate(self) -> float:
        """log of the estimate; stays meaningful when the estimate itself underflows."""
        return math.log(self.mean) + self.log_measure if self.mean > 0 else -math.inf

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("samples")
        d["log_estimate"] = self.log_estimate
        return d


@dataclass
class RatioReport:
    ratios: list
    c_emp: float
    normalized: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "ratios": [[pid, r] for pid, r in self.ratios],
            "normalized": [[pid, r] for pid, r in self.normalized],
            "c_emp": self.c_emp,
            "failures": self.failures,
            "reports": {k: v.to_dict() for k, v in self.reports.items()},
        }


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=_json_default).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return repr(o)


def ball_log_volume(dim: int, radius: float) -> float:
    return 0.5 * dim * math.log(math.pi) + dim * math.log(radius) - gammaln(0.5 * dim + 1)


# sampling ----------------------------------------------------------------

def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(block)]))


def sample_params(family, seed: int, start: int, stop: int) -> np.ndarray:
    """Parameters of samples start..stop-1; identical whatever the chunking."""
    out = np.empty((stop - start, family.dim))
    many = getattr(family, "sample_many", None)
    j = start
    while j < stop:
        b = j // BLOCK
        first = b * BLOCK
        end = min(first + BLOCK, stop)
        rng = block_rng(seed, b)
        if many is not None:
            block = many(rng, end - first)
        else:
            block = np.array([family.sample(rng) for _ in range(end - first)])
        out[j - start:end - start] = block[j - first:]
        j = end
    return out


def _chunks(num_samples: int, threads: int):
    nblocks = -(-num_samples // BLOCK)
    per = max(1, -(-nblocks // max(1, threads)))
    edges = list(range(0, nblocks, per)) + [nblocks]
    return [(a * BLOCK, min(b * BLOCK, num_samples)) for a, b in zip(edges[:-1], edges[1:])]


def _run_chunks(fn, num_samples: int, threads: int) -> list:
    chunks = _chunks(num_samples, threads)
    if threads <= 1 or len(chunks) == 1:
        parts = [fn(a, b) for a, b in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ab: fn(*ab), chunks))
    return parts


def _report(values, log_measure, num_samples, seed, degenerate, chash, extra=None, keep=False):
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    sd = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    scale = math.exp(log_measure) if log_measure < 709 else math.inf
    est = scale * mean if mean != 0 else 0.0
    se = scale * sd / math.sqrt(len(values)) if sd != 0 else 0.0
    if not (math.isfinite(est) and math.isfinite(se)):
        raise OverflowError(f"estimate overflows float64 (log measure {log_measure:.1f})")
    dfrac = float(np.mean(degenerate)) if len(degenerate) else 0.0
    return EstimateReport(est, se, int(num_samples), int(seed), dfrac, chash, float(log_measure), mean,
                          dfrac > UNRELIABLE_DEGENERATE, extra or {}, values if keep else None)


# total intersection integral --------------------------------------------

@dataclass(frozen=True)
class CountingOptions:
    """Discretization controls for counting h(V) n W."""

    tau_trans: float = TAU_TRANS
    tangents: str = "chord"
    max_edge: float = MAX_EDGE
    max_depth: int = 24


def count_under(family, w, V: DiscreteSubmanifold, W: DiscreteSubmanifold,
                opts: CountingOptions = CountingOptions()):
    img = pushforward(V, family, w, tangents=opts.tangents, max_edge=opts.max_edge, max_depth=opts.max_depth)
    return count_intersections(img, W, opts.tau_trans)


def _union_curves(meshes):
    verts, elems, labels = [], [], []
    off = 0
    for i, m in enumerate(meshes):
        verts.append(m.vertices)
        elems.append(m.elements + off)
        labels.append(np.full(m.num_elements, i))
        off += len(m.vertices)
    union = from_vertices(1, np.vstack(verts), np.vstack(elems), check=False)
    return union, np.concatenate(labels)


def _pair_counter(family, pairs, opts: CountingOptions):
    """Per-sample counts for many (V, W) pairs sharing one family member.

    Curves V are refined together in a single pass so each sample costs one
    batched evaluation per refinement level. Refinement is element-local, so
    every pair's image is the same as if it were pushed forward alone.
    """
    vs = [v for v, _ in pairs]
    ws = [w for _, w in pairs]
    curves = all(v.dim == 1 for v in vs)
    if curves:
        union, labels = _union_curves(vs)

    def count(w):
        out = np.empty(len(pairs))
        degen = np.zeros(len(pairs), dtype=bool)
        if curves:
            verts, elems, img, lab, unresolved = _refine_curve(union, family, w, opts.max_edge, opts.max_depth,
                                                       labels=labels, strict=False)
            for i, W in enumerate(ws):
                sub = elems[lab == i]
                mesh = from_vertices(1, img, sub, check=False)
                if opts.tangents == "jacobian":
                    src = from_vertices(1, verts, sub, check=False)
                    _, jac = family.apply_with_jacobian(w, src.midpoints())
                    mesh = from_vertices(1, img, sub, check=False,
                                         tangents=orthonormal_frames(np.einsum("eij,ejk->eik", jac,
                                                                               src.element_tangents)))
                res = count_intersections(mesh, W, opts.tau_trans)
                out[i] = res.count
                # unresolved refinement is reported as a degenerate sample
                degen[i] = res.any_degenerate or bool(unresolved[lab == i].any())
        else:
            for i, (V, W) in enumerate(pairs):
                res = count_under(family, w, V, W, opts)
                out[i] = res.count
                degen[i] = res.any_degenerate
        return out, degen

    return count


def mc_total_intersections_many(family, pairs, num_samples: int, seed: int, threads: int = 1,
                                opts: CountingOptions = CountingOptions(), sampler=None,
                                chash: str = "", keep_samples: bool = False) -> list:
    """One EstimateReport per (V, W) pair, all driven by the same parameter samples."""
    for V, W in pairs:
        if V.dim + W.dim != V.n or V.n != W.n or V.n != family.n:
            raise InvalidInput("V and W must be complementary-dimensional in the family's torus")
    if num_samples < 1:
        raise InvalidInput("num_samples must be >= 1")
    count = _pair_counter(family, pairs, opts)

    def work(a, b):
        ws = sampler(a, b) if sampler is not None else sample_params(family, seed, a, b)
        counts = np.empty((b - a, len(pairs)))
        degen = np.empty((b - a, len(pairs)), dtype=bool)
        for i, w in enumerate(ws):
            counts[i], degen[i] = count(w)
        return counts, degen

    parts = _run_chunks(work, num_samples, threads)
    counts = np.concatenate([p[0] for p in parts])
    degen = np.concatenate([p[1] for p in parts])
    lm = family.log_measure()
    return [_report(counts[:, i], lm, num_samples, seed, degen[:, i], chash, keep=keep_samples)
            for i in range(len(pairs))]


def mc_total_intersections(family, V: DiscreteSubmanifold, W: DiscreteSubmanifold, num_samples: int,
                           seed: int, threads: int = 1, opts: CountingOptions = CountingOptions(),
                           sampler=None, chash: str = "", keep_samples: bool = False) -> EstimateReport:
    """Leb(H) x mean over uniform h of #(h(V) n W).

    ``sampler(start, stop)`` may replace the uniform parameter draws, e.g. to
    pin w = 0.
    """
    return mc_total_intersections_many(family, [(V, W)], num_samples, seed, threads, opts, sampler,
                                       chash, keep_samples)[0]


# translation family -----------------------------------------------------

def translation_family_oracle(theta: float, len_i: float, len_j: float) -> float:
    """Exact integral over T^2 of #((I + a) n J) for segments at angle theta."""
    return abs(math.sin(theta)) * len_i * len_j


def _batch_crossings(a0, da, b0, db, eps=1e-12, tau=TAU_TRANS):
    """Crossing counts of translated copies of one polyline against another.

    a0: (S, mA, 2) per-sample start vertices; da: (mA, 2); b0: (mB, 2); db: (mB, 2).
    Returns counts (S,) of strictly interior crossings and a flag for samples
    with a near-endpoint or parallel-collinear hit that needs exact treatment.
    """
    rel = b0[None, None, :, :] - a0[:, :, None, :]
    rel = rel - np.round(rel)
    den = da[:, None, 0] * db[None, :, 1] - da[:, None, 1] * db[None, :, 0]
    scale = np.linalg.norm(da, axis=-1)[:, None] * np.linalg.norm(db, axis=-1)[None, :]
    parallel = np.abs(den) <= tau * scale
    safe = np.where(parallel, 1.0, den)
    counts = np.zeros(a0.shape[0], dtype=np.int64)
    flag = np.zeros(a0.shape[0], dtype=bool)
    for lift in np.array([[x, y] for x in (-1.0, 0.0, 1.0) for y in (-1.0, 0.0, 1.0)]):
        off = rel + lift
        s = (off[..., 0] * db[None, None, :, 1] - off[..., 1] * db[None, None, :, 0]) / safe
        u = (off[..., 0] * da[None, :, None, 1] - off[..., 1] * da[None, :, None, 0]) / safe
        inside = ~parallel & (s > eps) & (s < 1 - eps) & (u > eps) & (u < 1 - eps)
        near = ~parallel & (s >= -eps) & (s <= 1 + eps) & (u >= -eps) & (u <= 1 + eps) & ~inside
        counts += inside.sum(axis=(1, 2))
        flag |= near.any(axis=(1, 2))
        if parallel.any():
            # distance of B's base from A's line, only relevant for collinear pieces
            dist = np.abs(off[..., 0] * da[None, :, None, 1] - off[..., 1] * da[None, :, None, 0])
            flag |= (parallel & (dist <= 1e-12)).any(axis=(1, 2))
    return counts, flag


def _as_mesh(x, resolution=None) -> DiscreteSubmanifold:
    if isinstance(x, DiscreteSubmanifold):
        return x
    if resolution is None:
        resolution = max(2, int(math.ceil(getattr(x, "length", 1.0) / 0.2)))
    return discretize(x, resolution)


def mc_translation_family(I, J, num_samples: int, seed: int, threads: int = 1,
                          chash: str = "", keep_samples: bool = False) -> EstimateReport:
    """Estimate the integral over a in T^2 of #((I + a) n J)."""
    family = TranslationFamily(2)
    A = _as_mesh(I)
    B = _as_mesh(J)
    a0 = A.vertices[A.elements[:, 0]]
    da = A.edge_vectors[:, 0]
    b0 = B.vertices[B.elements[:, 0]]
    db = B.edge_vectors[:, 0]

    def work(lo, hi):
        shifts = sample_params(family, seed, lo, hi)
        counts, flag = _batch_crossings(a0[None] + shifts[:, None, :], da, b0, db)
        degen = np.zeros(hi - lo, dtype=bool)
        for i in np.flatnonzero(flag):
            res = count_intersections(A.translated(shifts[i]), B)
            counts[i] = res.count
            degen[i] = res.any_degenerate
        return counts.astype(float), degen

    parts = _run_chunks(work, num_samples, threads)
    counts = np.concatenate([p[0] for p in parts])
    degen = np.concatenate([p[1] for p in parts])
    return _report(counts, 0.0, num_samples, seed, degen, chash, keep=keep_samples)


# normal Jacobian ratios -------------------------------------------------

def _bases(p, b_v, b_w):
    b_v = b_v.basis if isinstance(b_v, GrassmannPlane) else np.asarray(b_v, dtype=float)
    b_w = b_w.basis if isinstance(b_w, GrassmannPlane) else np.asarray(b_w, dtype=float)
    n = np.size(p.coords if hasattr(p, "coords") else p)
    return b_v.reshape(n, -1), b_w.reshape(n, -1)


def nj_ratio_formula(family, w, p, b_v, b_w) -> float:
    """|det J| / NJ(d ev_p) at (w, p)."""
    x = p.coords if hasattr(p, "coords") else np.asarray(p, dtype=float)
    b_v, b_w = _bases(x, b_v, b_w)
    _, dh, dev = family.evaluate_all(w, x)
    nj = normal_jacobian(dev)
    if nj < 1e-12:
        raise SubmersionFailure(f"NJ(d ev_p) = {nj:.3g} at the given parameters")
    return abs(det_J(dh, b_v, b_w)) / nj


def nj_ratio_direct(family, w, p, b_v, b_w) -> float:
    """NJ(pi_1) / NJ(pi_2) on an explicit orthonormal basis of the tangent space
    {(hdot, a, b) : -dh B_V a + B_W b = d(ev_p) hdot} of the incidence manifold."""
    x = p.coords if hasattr(p, "coords") else np.asarray(p, dtype=float)
    b_v, b_w = _bases(x, b_v, b_w)
    _, dh, dev = family.evaluate_all(w, x)
    return _nj_ratio_from_blocks(dev, dh @ b_v, b_w)


def _nj_ratio_from_blocks(dev, dhbv, b_w) -> float:
    n, big_n = dev.shape
    # constraint: dev hdot + dh B_V a - B_W b = 0 in coordinates (hdot, a, b)
    m = np.hstack([dev, dhbv, -b_w])
    # E is the orthogonal complement of the row space U of m. For the orthogonal
    # matrix [E | U] the minor det(E_top) equals det(U_bottom) up to sign, and
    # E_bottom E_bottom^T = I - U_bottom U_bottom^T.
    u, r = np.linalg.qr(m.T)
    d = np.abs(np.diag(r))
    if d.min() <= 1e-14 * d.max():
        raise SubmersionFailure("constraint matrix is rank deficient")
    u2 = u[big_n:]
    det1 = abs(np.linalg.det(u2))
    if det1 == 0.0:
        return 0.0
    # I - U2 U2^T = U1^T U1 since U has orthonormal columns
    u1 = u[:big_n]
    nj2 = normal_jacobian(u1.T)
    if nj2 <= 0:
        raise RuntimeError("projection to T_pV x T_qW is rank deficient on the tangent space")
    return float(det1 / nj2)


def graph_volume_sides(g: np.ndarray):
    """Both sides of det(G G^T)^(-1/2) = |det(pi1|S)| / NJ(pi2|S) for S = graph(G)."""
    b, a = g.shape
    lhs = normal_jacobian(g) ** -1.0
    q, _ = np.linalg.qr(np.vstack([np.eye(a), g]))
    rhs = abs(np.linalg.det(q[:a])) / normal_jacobian(q[a:])
    return lhs, rhs


# fiber integrals --------------------------------------------------------

def _check_planes(sigma_p: GrassmannPlane, sigma_q: GrassmannPlane):
    if sigma_p.k + sigma_q.k != sigma_p.n or sigma_p.n != sigma_q.n:
        raise InvalidInput("planes must be complementary")


def fiber_integral_many(family, plane_pairs, eps: float, num_samples: int, seed: int, threads: int = 1,
                        chash: str = "", keep_samples: bool = False) -> list:
    """Fiber-integral estimates for several (sigma_p, sigma_q), sharing parameter draws.

    Entries are EstimateReport, or InsufficientSamples when no draw landed in
    the eps-ball.
    """
    if not 0 < eps < 0.5:
        raise InvalidInput("eps must lie in (0, 1/2)")
    for sp, sq in plane_pairs:
        _check_planes(sp, sq)
    n = family.n
    ps = np.array([sp.base.coords for sp, _ in plane_pairs])
    qs = np.array([sq.base.coords for _, sq in plane_pairs])
    npair = len(plane_pairs)

    if isinstance(family, TranslationFamily):
        consts = np.array([abs(det_J(np.eye(n), sp.basis, sq.basis)) for sp, sq in plane_pairs])

        def work(lo, hi):
            a = sample_params(family, seed, lo, hi)
            hit = np.stack([torus_distance(wrap01(p + a), q) < eps for p, q in zip(ps, qs)], axis=1)
            return np.where(hit, consts[None, :], 0.0), hit
    else:
        def work(lo, hi):
            ws = sample_params(family, seed, lo, hi)
            vals = np.zeros((hi - lo, npair))
            hit = np.zeros((hi - lo, npair), dtype=bool)
            for i, w in enumerate(ws):
                img = family.apply(w, ps)
                idx = np.flatnonzero(torus_distance(img, qs) < eps)
                if len(idx):
                    jac = family.jacobian(w, ps[idx])
                    for j, dh in zip(idx, jac):
                        sp, sq = plane_pairs[j]
                        vals[i, j] = abs(det_J(dh, sp.basis, sq.basis))
                        hit[i, j] = True
            return vals, hit

    parts = _run_chunks(work, num_samples, threads)
    vals = np.concatenate([v for v, _ in parts])
    hits = np.concatenate([h for _, h in parts])
    log_measure = family.log_measure() - ball_log_volume(n, eps)
    out = []
    for j in range(npair):
        accepted = int(hits[:, j].sum())
        if accepted == 0:
            out.append(InsufficientSamples(0, num_samples))
            continue
        out.append(_report(vals[:, j], log_measure, num_samples, seed, np.zeros(0, dtype=bool), chash,
                           extra={"accepted": accepted, "acceptance_rate": accepted / num_samples, "eps": eps},
                           keep=keep_samples))
    return out


def fiber_integral_estimate(family, sigma_p: GrassmannPlane, sigma_q: GrassmannPlane, eps: float,
                            num_samples: int, seed: int, threads: int = 1, chash: str = "",
                            keep_samples: bool = False) -> EstimateReport:
    """Integral of |det J| / NJ(d ev_p) over {h : h(p) = q}.

    Co-area smoothing: the fiber integral is approximated by
    Leb(H) / Leb(B_eps) x mean of 1{h(p) in B_eps(q)} |det J|, since
    eta x NJ(d ev_p) = |det J|.
    """
    rep = fiber_integral_many(family, [(sigma_p, sigma_q)], eps, num_samples, seed, threads, chash,
                              keep_samples)[0]
    if isinstance(rep, Exception):
        raise rep
    return rep


# empirical constant ------------------------------------------------------

def empirical_C(family, pairs, num_samples: int, seed: int, threads: int = 1,
                opts: CountingOptions = CountingOptions(), keep_samples: bool = False) -> RatioReport:
    """Ratios estimate / (vol V vol W) over pairs, and the smallest C bracketing them.

    ``pairs`` is a list of (pair_id, V_mesh, W_mesh). A pair whose estimate
    fails is recorded in ``failures`` and skipped.
    """
    if len(pairs) < 2:
        raise InvalidInput("empirical_C needs at least two pairs")
    failures, reports = {}, {}
    if isinstance(family, TranslationFamily) and family.n == 2:
        for pid, V, W in pairs:
            try:
                reports[pid] = mc_translation_family(V, W, num_samples, seed, threads, keep_samples=keep_samples)
            except Exception as exc:  # keep the batch going
                failures[pid] = f"{type(exc).__name__}: {exc}"
    else:
        good = []
        for pid, V, W in pairs:
            if V.dim + W.dim != V.n or V.n != family.n:
                failures[pid] = "InvalidInput: dimensions are not complementary"
            else:
                good.append((pid, V, W))
        try:
            reps = mc_total_intersections_many(family, [(V, W) for _, V, W in good], num_samples, seed,
                                               threads, opts, keep_samples=keep_samples)
            reports = {pid: r for (pid, _, _), r in zip(good, reps)}
        except Exception as exc:
            for pid, _, _ in good:
                failures[pid] = f"{type(exc).__name__}: {exc}"
    ratios, normalized = [], []
    for pid, V, W in pairs:
        if pid not in reports:
            continue
        vol = V.total_volume * W.total_volume
        ratios.append((pid, reports[pid].estimate / vol))
        normalized.append((pid, reports[pid].mean / vol))
    return RatioReport(ratios, c_from_ratios([r for _, r in ratios]), normalized, failures, reports)


def prefix_ratio_report(report: RatioReport, pairs, count: int) -> RatioReport:
    """The RatioReport that a run with ``count`` samples would have produced.

    Needs per-sample values (keep_samples=True). Sample draws depend only on
    (seed, index), so a prefix is exactly the shorter run.
    """
    ratios, normalized = [], []
    for pid, V, W in pairs:
        rep = report.reports.get(pid)
        if rep is None:
            continue
        if rep.samples is None or len(rep.samples) < count:
            raise InvalidInput("per-sample values are required for prefix reports")
        vol = V.total_volume * W.total_volume
        mean = float(np.mean(rep.samples[:count]))
        ratios.append((pid, math.exp(rep.log_measure) * mean / vol))
        normalized.append((pid, mean / vol))
    return RatioReport(ratios, c_from_ratios([r for _, r in ratios]), normalized, dict(report.failures))


def c_from_ratios(vals) -> float:
    """max(1, max ratio, 1 / min ratio); infinite if any ratio is zero."""
    if not len(vals) or min(vals) <= 0:
        return math.inf
    return max(1.0, max(vals), 1.0 / min(vals))


def geodesic_pair(theta: float, len_i: float, len_j: float, start_i=(0.1, 0.2), start_j=(0.55, 0.35),
                  phi: float = 0.0):
    """Two geodesic segments with directions at angle theta (J rotated from I by theta)."""
    di = (math.cos(phi), math.sin(phi))
    dj = (math.cos(phi + theta), math.sin(phi + theta))
    return GeodesicSegment(start_i, di, len_i), GeodesicSegment(start_j, dj, len_j)


def random_geodesic_pairs(count: int, len_range=(0.04, 0.16), seed: int = 0, resolution: int = 2,
                          min_angle: float = 0.2):
    """Random complementary geodesic segment pairs on T^2.

    Lengths are log-uniform in ``len_range``; the first two pairs take the
    extreme lengths so the products vol V vol W span (hi / lo)^2.
    """
    if count < 2:
        raise InvalidInput("need at least two pairs")
    lo, hi = len_range
    if not 0 < lo < hi:
        raise InvalidInput("len_range must satisfy 0 < lo < hi")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x9E0D]))
    out = []
    for i in range(count):
        if i == 0:
            lv = lw = lo
        elif i == 1:
            lv = lw = hi
        else:
            lv, lw = np.exp(rng.uniform(math.log(lo), math.log(hi), 2))
        theta = rng.uniform(min_angle, math.pi - min_angle)
        phi = rng.uniform(0.0, 2.0 * math.pi)
        seg_i, seg_j = geodesic_pair(theta, float(lv), float(lw), tuple(rng.random(2)), tuple(rng.random(2)), phi)
        out.append((f"pair{i:03d}", discretize(seg_i, resolution), discretize(seg_j, resolution)))
    return out
