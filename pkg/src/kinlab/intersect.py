"""Intersection counting for complementary-dimensional meshes in T^2 and T^3.

Each element of B is shifted to its integer translate nearest the element of
A and then to the 3^n translates around it; because elements are shorter
than 0.4 this window contains every translate that can meet A's element.

Tie-breaking: a crossing located at a vertex or edge shared by several
elements is counted once and attributed to the lexicographically smallest
(element_V, element_W) pair. Parallel/coplanar overlaps count zero. Both
cases produce records with ``degenerate_flag`` set.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import product

import numpy as np

from .geometry import InvalidInput, TorusPoint, wrap01
from .submanifold import DiscreteSubmanifold

TAU_TRANS = 1e-9
REPORT_SIN = 1e-3
_EPS = 1e-12

_LIFTS = {n: np.array(list(product((-1.0, 0.0, 1.0), repeat=n))) for n in (2, 3)}


@dataclass(frozen=True)
class IntersectionRecord:
    point: TorusPoint
    element_V: int
    element_W: int
    sin_angle: float
    degenerate_flag: bool


@dataclass(frozen=True)
class IntersectionResult:
    count: int
    records: list

    @property
    def any_degenerate(self) -> bool:
        return any(r.degenerate_flag for r in self.records)

    def __iter__(self):
        # allows ``count, records = count_...(...)``
        return iter((self.count, self.records))


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _lifted_offsets(a0, b0):
    """(mA, mB, 3^n, n) translation of B's base vertex relative to A's."""
    n = a0.shape[-1]
    rel = b0[None, :, :] - a0[:, None, :]
    rel = rel - np.round(rel)
    return rel[:, :, None, :] + _LIFTS[n][None, None, :, :]


def _tangent_sin(ta, tb):
    return float(min(1.0, abs(np.linalg.det(np.hstack([ta, tb])))))


def _location_key(elems, e, coords, kind):
    """Identify where on an element a hit lies: interior, shared edge or vertex."""
    on = [i for i, c in enumerate(coords) if c > _EPS]
    verts = elems[e]
    if len(on) == len(coords):
        return (kind, "int", e), False
    return (kind, "sub", tuple(sorted(int(verts[i]) for i in on))), True


def _finalize(hits, A, B, tau_trans):
    """Group hits by location, apply tie-breaking, build records."""
    groups = {}
    for h in hits:
        groups.setdefault(h["key"], []).append(h)
    records = []
    count = 0
    for key, members in groups.items():
        best = min(members, key=lambda h: (h["eV"], h["eW"]))
        sin = _tangent_sin(A.element_tangents[best["eV"]], B.element_tangents[best["eW"]])
        degenerate = best["boundary"] or best["parallel"] or sin < tau_trans
        if not best["parallel"]:
            count += 1
        records.append(IntersectionRecord(TorusPoint(best["point"]), best["eV"], best["eW"], sin, degenerate))
    records.sort(key=lambda r: (r.element_V, r.element_W))
    return IntersectionResult(count, records)


def count_curve_curve_t2(A: DiscreteSubmanifold, B: DiscreteSubmanifold,
                         tau_trans: float = TAU_TRANS) -> IntersectionResult:
    """Transversal crossings between two polylines in T^2."""
    if A.n != 2 or B.n != 2 or A.dim != 1 or B.dim != 1:
        raise InvalidInput("count_curve_curve_t2 needs two curves in T^2")
    a0 = A.vertices[A.elements[:, 0]]
    da = A.edge_vectors[:, 0]
    db = B.edge_vectors[:, 0]
    off = _lifted_offsets(a0, B.vertices[B.elements[:, 0]])  # b0 - a0 per lift
    da_b = da[:, None, None, :]
    db_b = db[None, :, None, :]
    den = _cross2(da_b, db_b)
    scale = np.linalg.norm(da, axis=-1)[:, None, None] * np.linalg.norm(db, axis=-1)[None, :, None]
    parallel = np.broadcast_to(np.abs(den) <= tau_trans * scale, off.shape[:3])
    safe = np.where(parallel, 1.0, den)
    s = _cross2(off, db_b) / safe
    u = _cross2(off, da_b) / safe
    lo, hi = -_EPS, 1.0 + _EPS
    hit = ~parallel & (s >= lo) & (s <= hi) & (u >= lo) & (u <= hi)
    # collinear overlap: B's base on A's line and projections overlapping
    dist = np.abs(_cross2(off, da_b)) / np.linalg.norm(da, axis=-1)[:, None, None]
    la = np.einsum("ijkl,il->ijk", off, da) / np.sum(da * da, axis=-1)[:, None, None]
    lb = la + np.einsum("jl,il->ij", db, da)[:, :, None] / np.sum(da * da, axis=-1)[:, None, None]
    overlap = parallel & (dist <= 1e-12) & (np.maximum(la, lb) >= 0) & (np.minimum(la, lb) <= 1)
    hits = []
    for i, j, k in zip(*np.nonzero(hit)):
        si = float(np.clip(s[i, j, k], 0.0, 1.0))
        uj = float(np.clip(u[i, j, k], 0.0, 1.0))
        ka, ba = _location_key(A.elements, i, (1.0 - si, si), "A")
        kb, bb = _location_key(B.elements, j, (1.0 - uj, uj), "B")
        hits.append(dict(key=(ka, kb), eV=int(i), eW=int(j), boundary=ba or bb, parallel=False,
                         point=wrap01(a0[i] + si * da[i])))
    for i, j, k in zip(*np.nonzero(overlap)):
        hits.append(dict(key=(("A", "par", int(i)), ("B", "par", int(j))), eV=int(i), eW=int(j),
                         boundary=True, parallel=True, point=a0[i].copy()))
    return _finalize(hits, A, B, tau_trans)


def count_curve_surface_t3(A: DiscreteSubmanifold, B: DiscreteSubmanifold,
                           tau_trans: float = TAU_TRANS) -> IntersectionResult:
    """Segment-triangle crossings between a polyline and a surface in T^3."""
    if A.n != 3 or B.n != 3 or A.dim != 1 or B.dim != 2:
        raise InvalidInput("count_curve_surface_t3 needs a curve and a surface in T^3")
    a0 = A.vertices[A.elements[:, 0]]
    da = A.edge_vectors[:, 0]
    e1 = B.edge_vectors[:, 0]
    e2 = B.edge_vectors[:, 1]
    off = _lifted_offsets(a0, B.vertices[B.elements[:, 0]])  # b0 - a0
    nrm = np.cross(e1, e2)
    # solve a0 + s da = b0 + p e1 + q e2 by Cramer's rule
    det = np.einsum("il,jl->ij", da, nrm)[:, :, None]
    scale = np.linalg.norm(da, axis=-1)[:, None, None] * np.linalg.norm(nrm, axis=-1)[None, :, None]
    parallel = np.broadcast_to(np.abs(det) <= tau_trans * scale, off.shape[:3])
    safe = np.where(parallel, 1.0, det)
    s = np.einsum("ijkl,jl->ijk", off, nrm) / safe
    # Cramer: p = det[da, off, -e2] / det, q = det[da, -e1, off] / det
    da_off = np.cross(da[:, None, None, :], off)
    p = -np.einsum("ijkl,ijkl->ijk", da_off, e2[None, :, None, :]) / safe
    q = np.einsum("ijkl,ijkl->ijk", da_off, e1[None, :, None, :]) / safe
    lo, hi = -_EPS, 1.0 + _EPS
    hit = ~parallel & (s >= lo) & (s <= hi) & (p >= lo) & (q >= lo) & (p + q <= hi)
    hits = []
    for i, j, k in zip(*np.nonzero(hit)):
        si = float(np.clip(s[i, j, k], 0.0, 1.0))
        pj, qj = float(max(p[i, j, k], 0.0)), float(max(q[i, j, k], 0.0))
        ka, ba = _location_key(A.elements, i, (1.0 - si, si), "A")
        kb, bb = _location_key(B.elements, j, (1.0 - pj - qj, pj, qj), "B")
        hits.append(dict(key=(ka, kb), eV=int(i), eW=int(j), boundary=ba or bb, parallel=False,
                         point=wrap01(a0[i] + si * da[i])))
    # segment lying in a triangle's plane and overlapping it
    for i, j, k in zip(*np.nonzero(parallel)):
        o = off[i, j, k]
        height = abs(o @ nrm[j]) / np.linalg.norm(nrm[j])
        if height > 1e-12:
            continue
        if _coplanar_overlap(-o, da[i], e1[j], e2[j]):
            hits.append(dict(key=(("A", "par", int(i)), ("B", "par", int(j))), eV=int(i), eW=int(j),
                             boundary=True, parallel=True, point=a0[i].copy()))
    return _finalize(hits, A, B, tau_trans)


def _coplanar_overlap(a0, da, e1, e2) -> bool:
    """Segment a0 + s da (relative to the triangle's base vertex) vs triangle (0, e1, e2)."""
    g = np.array([[e1 @ e1, e1 @ e2], [e1 @ e2, e2 @ e2]])
    to_bary = np.linalg.solve(g, np.array([e1, e2]))
    p0 = to_bary @ a0
    p1 = to_bary @ (a0 + da)
    tri = [np.zeros(2), np.array([1.0, 0.0]), np.array([0.0, 1.0])]

    def inside(p):
        return p[0] >= -_EPS and p[1] >= -_EPS and p.sum() <= 1 + _EPS

    if inside(p0) or inside(p1):
        return True
    d = p1 - p0
    for a, b in zip(tri, tri[1:] + tri[:1]):
        e = b - a
        den = _cross2(d, e)
        if abs(den) < 1e-15:
            continue
        s = _cross2(a - p0, e) / den
        u = _cross2(a - p0, d) / den
        if -_EPS <= s <= 1 + _EPS and -_EPS <= u <= 1 + _EPS:
            return True
    return False


def count_intersections(A: DiscreteSubmanifold, B: DiscreteSubmanifold,
                        tau_trans: float = TAU_TRANS) -> IntersectionResult:
    """Dispatch on ambient dimension; A may be the curve or the surface."""
    if A.dim + B.dim != A.n or A.n != B.n:
        raise InvalidInput("submanifolds must have complementary dimensions")
    if A.n == 2:
        return count_curve_curve_t2(A, B, tau_trans)
    if A.dim == 1:
        return count_curve_surface_t3(A, B, tau_trans)
    res = count_curve_surface_t3(B, A, tau_trans)
    recs = [IntersectionRecord(r.point, r.element_W, r.element_V, r.sin_angle, r.degenerate_flag)
            for r in res.records]
    return IntersectionResult(res.count, sorted(recs, key=lambda r: (r.element_V, r.element_W)))


CSV_FIELDS = ["x", "y", "z", "element_V", "element_W", "sin_angle", "degenerate_flag"]


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for r in records:
            c = list(r.point.coords) + [""] * (3 - r.point.n)
            writer.writerow(c + [r.element_V, r.element_W, repr(r.sin_angle), int(r.degenerate_flag)])
