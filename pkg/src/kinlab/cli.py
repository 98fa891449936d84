"""Config-driven experiment runner.

    python -m kinlab run --config configs/translation-example.json --out out/ --threads 4
    python -m kinlab run --config cfg.json --set sampling.num_samples=20000 --seed 3

Exit codes: 0 success, 1 config/validation error, 2 estimator error,
3 verification suite failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import kinematic as km
from .family import TranslationFamily, grid_atlas, random_plane, torus_family
from .geometry import GrassmannPlane, InvalidInput, TorusPoint
from .intersect import write_records_csv
from .submanifold import ClosedGeodesic, Disk, GeodesicSegment, PlanePatch, circle, discretize
from .verify import VerifyConfig, run_all

EXIT_OK, EXIT_CONFIG, EXIT_ESTIMATOR, EXIT_SUITE = 0, 1, 2, 3

EXPERIMENTS = ("total-integral", "fiber-integral", "translation-example", "empirical-C", "verify")

DEFAULTS = {
    "manifold": "t2",
    "family": {"kind": "constructed", "R": None, "flow_step": 1e-2, "fd_step": 1e-6,
               "per_axis": None, "scale": None},
    "submanifolds": {},
    "sampling": {"num_samples": 1000, "seed": 0},
    "output": {"dir": "out", "csv": False},
}


class ConfigError(Exception):
    pass


# config handling ---------------------------------------------------------------

def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _line_of(text: str, path: str) -> int | None:
    """Line of the last key on a dotted path, located after its parents."""
    pos = 0
    for key in path.split("."):
        m = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if not m:
            return None
        pos = m.start()
    return text.count("\n", 0, pos) + 1


def load_config(path: str | Path) -> tuple[dict, str]:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}:1: top level must be a JSON object")
    return raw, text


def apply_override(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, value = assignment.split("=", 1)
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    node = cfg
    parts = key.split(".")
    for p in parts[:-1]:
        if not isinstance(node.setdefault(p, {}), dict):
            raise ConfigError(f"--set {key}: {p} is not an object")
        node = node[p]
    node[parts[-1]] = parsed


def _experiment(cfg: dict) -> dict:
    exp = cfg.get("experiment")
    if isinstance(exp, str):
        return {"name": exp}
    if isinstance(exp, dict):
        return exp
    return {}


def validate(cfg: dict, text: str = "", source: str = "config") -> None:
    errors = []

    def err(path, msg):
        line = _line_of(text, path) if text else None
        errors.append(f"{source}:{line if line else '?'}: {path}: {msg}")

    if cfg.get("manifold") not in ("t2", "t3"):
        err("manifold", "must be 't2' or 't3'")
    fam = cfg.get("family", {})
    if fam.get("kind") not in ("constructed", "translation"):
        err("family.kind", "must be 'constructed' or 'translation'")
    r = fam.get("R")
    if r is not None and not (isinstance(r, (int, float)) and math.isfinite(r) and r > 0):
        err("family.R", "must be a positive number or null")
    for key in ("flow_step", "fd_step"):
        v = fam.get(key)
        if not (isinstance(v, (int, float)) and v > 0):
            err(f"family.{key}", "must be a positive number")
    exp = _experiment(cfg)
    if exp.get("name") not in EXPERIMENTS:
        err("experiment", f"unknown experiment {exp.get('name')!r}; expected one of {', '.join(EXPERIMENTS)}")
    smp = cfg.get("sampling", {})
    ns = smp.get("num_samples")
    if not (isinstance(ns, int) and not isinstance(ns, bool) and ns >= 1):
        err("sampling.num_samples", "must be an integer >= 1")
    seed = smp.get("seed")
    if not (isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0):
        err("sampling.seed", "must be a non-negative integer")
    subs = cfg.get("submanifolds", {})
    if not isinstance(subs, dict):
        err("submanifolds", "must be an object of named specs")
        subs = {}
    for name, spec in subs.items():
        if not isinstance(spec, dict) or spec.get("type") not in _SUB_TYPES:
            err(f"submanifolds.{name}", f"type must be one of {', '.join(_SUB_TYPES)}")
    for key in ("V", "W", "sigma_p", "sigma_q", "I", "J"):
        if key in exp and exp[key] not in subs:
            err(f"experiment.{key}", f"refers to undefined submanifold {exp[key]!r}")
    if errors:
        raise ConfigError("\n".join(errors))


# building objects ------------------------------------------------------------------

_SUB_TYPES = ("geodesic-segment", "closed-geodesic", "circle", "plane-patch", "disk", "plane")


def build_family(cfg: dict):
    n = 2 if cfg["manifold"] == "t2" else 3
    fam = cfg["family"]
    if fam["kind"] == "translation":
        return TranslationFamily(n)
    atlas = grid_atlas(n, fam.get("per_axis"), fam.get("scale"))
    return torus_family(n, fam.get("R"), fam["flow_step"], fam["fd_step"], atlas=atlas)


def build_submanifold(spec: dict):
    t = spec["type"]
    if t == "plane":
        return GrassmannPlane.from_span(TorusPoint(spec["base"]), np.asarray(spec["basis"], dtype=float).T)
    if t == "geodesic-segment":
        geo = GeodesicSegment(tuple(spec["start"]), tuple(spec["direction"]), float(spec["length"]))
        res = spec.get("resolution", max(2, math.ceil(geo.length / 0.2)))
    elif t == "closed-geodesic":
        geo = ClosedGeodesic(tuple(spec["start"]), tuple(spec["winding"]))
        res = spec.get("resolution", max(8, math.ceil(geo.length / 0.05)))
    elif t == "circle":
        geo = circle(spec["center"], float(spec["radius"]), tuple(spec.get("plane", (0, 1))))
        res = spec.get("resolution", 64)
    elif t == "plane-patch":
        geo = PlanePatch(tuple(spec["origin"]), tuple(spec["u"]), tuple(spec["v"]), bool(spec.get("closed", False)))
        res = spec.get("resolution", 8)
    else:
        geo = Disk(tuple(spec["center"]), tuple(spec["normal"]), float(spec["radius"]))
        res = spec.get("resolution", 4)
    return discretize(geo, tuple(res) if isinstance(res, list) else res)


def resolve(raw: dict) -> dict:
    cfg = _merge(DEFAULTS, raw)
    cfg["experiment"] = _experiment(cfg)
    return cfg


def hashed_config(cfg: dict) -> dict:
    """The part of the config that determines results (output paths excluded)."""
    return {k: v for k, v in cfg.items() if k != "output"}


# experiments ------------------------------------------------------------------

def _counting_opts(exp: dict) -> km.CountingOptions:
    keys = ("tau_trans", "tangents", "max_edge", "max_depth")
    return km.CountingOptions(**{k: exp[k] for k in keys if k in exp})


def _run_translation(cfg, exp, family, subs, threads, chash, writer):
    smp = cfg["sampling"]
    if "I" in exp:
        seg_i, seg_j = subs[exp["I"]], subs[exp["J"]]
        oracle = None
    else:
        theta, li, lj = float(exp.get("theta", math.pi / 2)), float(exp.get("len_i", 1.0)), float(exp.get("len_j", 1.0))
        seg_i, seg_j = km.geodesic_pair(theta, li, lj)
        oracle = km.translation_family_oracle(theta, li, lj)
    rep = km.mc_translation_family(seg_i, seg_j, smp["num_samples"], smp["seed"], threads, chash,
                                   keep_samples=writer.enabled)
    writer.samples("samples.csv", rep.samples, rep.log_measure)
    out = {"report": rep.to_dict()}
    if oracle is not None:
        out["oracle"] = oracle
        out["abs_error"] = abs(rep.estimate - oracle)
        out["within_tolerance"] = abs(rep.estimate - oracle) <= max(0.02 * oracle, 3 * rep.std_error)
    return out, EXIT_OK


def _run_total(cfg, exp, family, subs, threads, chash, writer):
    smp = cfg["sampling"]
    V, W = subs[exp["V"]], subs[exp["W"]]
    rep = km.mc_total_intersections(family, V, W, smp["num_samples"], smp["seed"], threads,
                                    _counting_opts(exp), chash=chash, keep_samples=writer.enabled)
    writer.samples("samples.csv", rep.samples, rep.log_measure)
    if writer.enabled:
        from .intersect import count_intersections
        writer.records("identity_records.csv", count_intersections(V, W).records)
    return {"report": rep.to_dict(), "vol_V": V.total_volume, "vol_W": W.total_volume}, EXIT_OK


def _run_fiber(cfg, exp, family, subs, threads, chash, writer):
    smp = cfg["sampling"]
    eps = float(exp.get("eps", 0.02))
    if "random_planes" in exp:
        rp = exp["random_planes"]
        rng = np.random.default_rng(int(rp.get("seed", smp["seed"])))
        k = int(rp.get("k", 1))
        planes = [(random_plane(rng, family.n, k), random_plane(rng, family.n, family.n - k))
                  for _ in range(int(rp.get("count", 50)))]
        reps = km.fiber_integral_many(family, planes, eps, smp["num_samples"], smp["seed"], threads, chash)
        rows, logs = [], []
        for i, r in enumerate(reps):
            if isinstance(r, Exception):
                rows.append([i, "", "", 0])
                continue
            log_est = r.log_estimate
            logs.append(log_est)
            rows.append([i, repr(r.estimate), repr(log_est), r.extra["accepted"]])
        writer.table("fiber_estimates.csv", ["plane_pair", "estimate", "log_estimate", "accepted"], rows)
        missing = sum(isinstance(r, Exception) for r in reps)
        finite = [x for x in logs if math.isfinite(x)]
        out = {"count": len(reps), "insufficient": missing,
               "log_estimates": logs,
               "log_estimate_range": [min(finite), max(finite)] if finite else None,
               "all_positive": missing == 0 and len(finite) == len(reps)}
        return out, EXIT_OK if out["all_positive"] else EXIT_ESTIMATOR
    sp, sq = subs[exp["sigma_p"]], subs[exp["sigma_q"]]
    reps = {}
    for e in (eps, eps / 2):
        reps[e] = km.fiber_integral_estimate(family, sp, sq, e, smp["num_samples"], smp["seed"], threads, chash)
    a, b = reps[eps], reps[eps / 2]
    combined = math.hypot(a.std_error, b.std_error)
    return {"report": a.to_dict(), "half_eps_report": b.to_dict(),
            "eps_halving_consistent": abs(a.estimate - b.estimate) <= 3 * combined}, EXIT_OK


def _run_empirical_c(cfg, exp, family, subs, threads, chash, writer):
    smp = cfg["sampling"]
    if "pairs" in exp:
        pairs = [(f"{v}|{w}", subs[v], subs[w]) for v, w in exp["pairs"]]
    else:
        rp = exp.get("random_pairs", {})
        pairs = km.random_geodesic_pairs(int(rp.get("count", 50)), tuple(rp.get("len_range", (0.04, 0.16))),
                                         int(rp.get("seed", smp["seed"])), int(rp.get("resolution", 2)))
    rep = km.empirical_C(family, pairs, smp["num_samples"], smp["seed"], threads, _counting_opts(exp))
    vols = {pid: V.total_volume * W.total_volume for pid, V, W in pairs}
    writer.table("ratios.csv", ["pair", "vol_V_vol_W", "ratio", "normalized_ratio"],
                 [[pid, vols[pid], r, nr] for (pid, r), (_, nr) in zip(rep.ratios, rep.normalized)])
    return {"ratio_report": rep.to_dict()}, EXIT_OK


def _run_verify(cfg, exp, family, subs, threads, chash, writer):
    fields = VerifyConfig.__dataclass_fields__
    vc = VerifyConfig(**{k: exp[k] for k in fields if k in exp})
    spec2 = family if cfg["manifold"] == "t2" and not isinstance(family, TranslationFamily) else None
    batch = run_all(cfg["sampling"]["seed"], vc, spec2=spec2)
    return {"batch": batch.to_dict()}, EXIT_OK if batch.passed else EXIT_SUITE


_RUNNERS = {
    "translation-example": _run_translation,
    "total-integral": _run_total,
    "fiber-integral": _run_fiber,
    "empirical-C": _run_empirical_c,
    "verify": _run_verify,
}


class _Writer:
    def __init__(self, out_dir: Path, enabled: bool):
        self.dir = out_dir
        self.enabled = enabled
        self.files = []

    def table(self, name, header, rows):
        if not self.enabled:
            return
        with open(self.dir / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        self.files.append(name)

    def samples(self, name, values, log_measure):
        if not self.enabled or values is None:
            return
        running = np.cumsum(values) / np.arange(1, len(values) + 1)
        scale = math.exp(log_measure) if log_measure < 709 else math.inf
        self.table(name, ["index", "value", "running_estimate"],
                   [[i, repr(float(v)), repr(float(scale * m))] for i, (v, m) in enumerate(zip(values, running))])

    def records(self, name, recs):
        if not self.enabled:
            return
        write_records_csv(recs, self.dir / name)
        self.files.append(name)


def run(config_path, overrides=(), out_dir=None, seed=None, threads=1) -> int:
    t0 = time.perf_counter()
    try:
        raw, text = load_config(config_path)
        for o in overrides:
            apply_override(raw, o)
        if seed is not None:
            raw.setdefault("sampling", {})["seed"] = seed
        cfg = resolve(raw)
        validate(cfg, text, str(config_path))
        family = build_family(cfg)
        subs = {name: build_submanifold(spec) for name, spec in cfg["submanifolds"].items()}
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidInput, KeyError, TypeError, ValueError) as exc:
        print(f"{config_path}: invalid configuration: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir or cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    chash = km.config_hash(hashed_config(cfg))
    writer = _Writer(out, bool(cfg["output"].get("csv", False)))
    exp = cfg["experiment"]
    try:
        result, code = _RUNNERS[exp["name"]](cfg, exp, family, subs, max(1, int(threads)), chash, writer)
    except Exception as exc:  # estimator failures are reported, not raised
        result, code = {"error": f"{type(exc).__name__}: {exc}"}, EXIT_ESTIMATOR
        print(f"estimator error: {result['error']}", file=sys.stderr)
    summary = {
        "experiment": exp["name"],
        "config": cfg,
        "config_hash": chash,
        "exit_code": code,
        "result": result,
        "csv_files": writer.files,
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=km._json_default) + "\n")
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="kinlab", description="kinematic-formula experiments on flat tori")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("config_pos", nargs="?", help="config path (alternative to --config)")
    r.add_argument("--config", help="JSON config file")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="dotted-path override")
    r.add_argument("--out", help="output directory")
    r.add_argument("--seed", type=int, help="override sampling.seed")
    r.add_argument("--threads", type=int, default=1, help="worker threads (speed only)")
    args = ap.parse_args(argv)
    path = args.config or args.config_pos
    if not path:
        ap.error("a config path is required")
    return run(path, args.set, args.out, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())
