"""Discretized curves and surfaces in flat tori.

Every element is shorter than ``MAX_EDGE`` so that its lift to R^n is
unambiguous (the injectivity radius of R^n/Z^n is 1/2): an edge is always
recovered as the nearest-integer reduction of its vertex difference.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import GrassmannPlane, InvalidInput, TorusPoint, wrap01, wrap_diff

MAX_EDGE = 0.4


class ResolutionTooCoarse(InvalidInput):
    pass


class SubdivisionDepthExceeded(RuntimeError):
    pass


# specs -------------------------------------------------------------------

@dataclass(frozen=True)
class GeodesicSegment:
    """Straight segment ``start + s * direction``, s in [0, length]."""

    start: Sequence[float]
    direction: Sequence[float]
    length: float

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if self.length <= 0:
            raise InvalidInput("segment length must be positive")
        if np.linalg.norm(d) == 0:
            raise InvalidInput("geodesic direction must be nonzero")

    dim = 1
    closed = False

    def points(self, s: np.ndarray) -> np.ndarray:
        d = np.asarray(self.direction, dtype=float)
        d = d / np.linalg.norm(d)
        return np.asarray(self.start, dtype=float) + np.outer(s * self.length, d)


@dataclass(frozen=True)
class ClosedGeodesic:
    """Closed geodesic of homology class ``winding`` through ``start``."""

    start: Sequence[float]
    winding: Sequence[int]

    def __post_init__(self):
        if not any(self.winding):
            raise InvalidInput("winding vector must be nonzero")

    dim = 1
    closed = True

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.winding))

    def points(self, s: np.ndarray) -> np.ndarray:
        return np.asarray(self.start, dtype=float) + np.outer(s, np.asarray(self.winding, dtype=float))


@dataclass(frozen=True)
class ParametricCurve:
    """Curve given by a callback ``fn(s) -> (len(s), n)`` on s in [0, 1] (unwrapped)."""

    fn: Callable[[np.ndarray], np.ndarray]
    closed: bool = False
    dim = 1

    def points(self, s: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(s, dtype=float)), dtype=float)


def circle(center, radius: float, plane=(0, 1), n: int | None = None) -> ParametricCurve:
    """Round circle in a coordinate plane."""
    center = np.asarray(center, dtype=float)
    i, j = plane

    def fn(s):
        pts = np.tile(center, (len(s), 1))
        pts[:, i] += radius * np.cos(2 * np.pi * s)
        pts[:, j] += radius * np.sin(2 * np.pi * s)
        return pts

    return ParametricCurve(fn, closed=True)


@dataclass(frozen=True)
class PlanePatch:
    """Parallelogram ``origin + a*u + b*v`` in T^3; closed when u, v are lattice vectors."""

    origin: Sequence[float]
    u: Sequence[float]
    v: Sequence[float]
    closed: bool = False
    dim = 2

    def points(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        o = np.asarray(self.origin, dtype=float)
        return o + np.multiply.outer(a, np.asarray(self.u, dtype=float)) + np.multiply.outer(
            b, np.asarray(self.v, dtype=float))


@dataclass(frozen=True)
class Disk:
    """Flat round disk in T^3, triangulated by rings."""

    center: Sequence[float]
    normal: Sequence[float]
    radius: float
    dim = 2


# discrete meshes ---------------------------------------------------------

@dataclass(frozen=True)
class DiscreteSubmanifold:
    dim: int
    vertices: np.ndarray
    elements: np.ndarray
    edge_vectors: np.ndarray = field(repr=False)
    element_tangents: np.ndarray = field(repr=False)
    element_volumes: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.vertices.shape[1]

    @property
    def total_volume(self) -> float:
        return float(self.element_volumes.sum())

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    def tangent_plane(self, e: int) -> GrassmannPlane:
        return GrassmannPlane(TorusPoint(self.vertices[self.elements[e, 0]]), self.element_tangents[e])

    def max_edge(self) -> float:
        return float(np.linalg.norm(self.edge_vectors, axis=-1).max())

    def midpoints(self) -> np.ndarray:
        base = self.vertices[self.elements[:, 0]]
        return wrap01(base + self.edge_vectors.sum(axis=1) / (self.dim + 1))

    def translated(self, shift) -> "DiscreteSubmanifold":
        return from_vertices(self.dim, wrap01(self.vertices + np.asarray(shift, dtype=float)), self.elements,
                             tangents=self.element_tangents)


def _edges(dim, vertices, elements):
    base = vertices[elements[:, 0]]
    return np.stack([wrap_diff(vertices[elements[:, j]] - base) for j in range(1, dim + 1)], axis=1)


def orthonormal_frames(vecs: np.ndarray) -> np.ndarray:
    """Batched Gram-Schmidt on (m, n, k) column frames, k in {1, 2}."""
    vecs = np.asarray(vecs, dtype=float)
    a = vecs[..., 0]
    na = np.linalg.norm(a, axis=-1)
    scale = np.abs(vecs).max(axis=(1, 2)) if len(vecs) else np.zeros(0)
    if np.any(na <= 1e-14 * np.maximum(scale, 1e-300)):
        raise InvalidInput("degenerate element: zero-length edge")
    q1 = a / na[:, None]
    if vecs.shape[2] == 1:
        return q1[..., None]
    b = vecs[..., 1]
    b = b - np.sum(q1 * b, axis=-1)[:, None] * q1
    nb = np.linalg.norm(b, axis=-1)
    if np.any(nb <= 1e-14 * scale):
        raise InvalidInput("degenerate element: collinear edges")
    return np.stack([q1, b / nb[:, None]], axis=-1)


def from_vertices(dim: int, vertices, elements, tangents=None, check: bool = True) -> DiscreteSubmanifold:
    """Build a mesh; tangents default to the element chord/plane directions."""
    vertices = wrap01(np.asarray(vertices, dtype=float))
    elements = np.asarray(elements, dtype=np.int64).reshape(-1, dim + 1)
    edges = _edges(dim, vertices, elements)
    if dim == 1:
        vols = np.linalg.norm(edges[:, 0], axis=-1)
        lengths = vols
    else:
        if vertices.shape[1] != 3:
            raise InvalidInput("surfaces are supported in T^3 only")
        vols = 0.5 * np.linalg.norm(np.cross(edges[:, 0], edges[:, 1]), axis=-1)
        e3 = wrap_diff(vertices[elements[:, 2]] - vertices[elements[:, 1]])
        lengths = np.maximum(np.linalg.norm(edges, axis=-1).max(axis=1), np.linalg.norm(e3, axis=-1))
    if check and np.any(lengths >= MAX_EDGE):
        raise ResolutionTooCoarse(f"element of size {lengths.max():.3g} exceeds {MAX_EDGE}")
    if tangents is None:
        tangents = orthonormal_frames(edges.transpose(0, 2, 1))
    return DiscreteSubmanifold(dim, vertices, elements, edges, np.asarray(tangents, dtype=float), vols)


def discretize(spec, resolution) -> DiscreteSubmanifold:
    """Polyline / triangle mesh with vertices on the exact submanifold."""
    if isinstance(spec, Disk):
        return _discretize_disk(spec, resolution)
    if spec.dim == 1:
        res = int(resolution)
        if res < 2:
            raise InvalidInput("curve resolution must be >= 2")
        s = np.linspace(0.0, 1.0, res + 1)
        pts = spec.points(s)
        if spec.closed:
            pts = pts[:-1]
            elements = np.column_stack([np.arange(res), (np.arange(res) + 1) % res])
        else:
            elements = np.column_stack([np.arange(res), np.arange(1, res + 1)])
        return from_vertices(1, pts, elements)
    ra, rb = (resolution, resolution) if np.isscalar(resolution) else resolution
    if ra < 2 or rb < 2:
        raise InvalidInput("surface resolution must be >= 2 per axis")
    na, nb = (ra, rb) if spec.closed else (ra + 1, rb + 1)
    a = np.arange(na) / ra
    b = np.arange(nb) / rb
    grid = spec.points(*np.meshgrid(a, b, indexing="ij")).reshape(-1, 3)

    def vid(i, j):
        return (i % na) * nb + (j % nb)

    tris = []
    for i in range(ra):
        for j in range(rb):
            v00, v10, v01, v11 = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return from_vertices(2, grid, np.array(tris))


def _discretize_disk(spec: Disk, resolution) -> DiscreteSubmanifold:
    rings = int(resolution)
    if rings < 2:
        raise InvalidInput("disk resolution must be >= 2")
    nrm = np.asarray(spec.normal, dtype=float)
    nrm = nrm / np.linalg.norm(nrm)
    e1 = np.linalg.svd(nrm[None, :])[2][1]
    e2 = np.cross(nrm, e1)
    c = np.asarray(spec.center, dtype=float)
    verts = [c]
    tris = []
    sectors = 6
    prev = [0]
    for r in range(1, rings + 1):
        m = sectors * r
        ang = 2 * np.pi * np.arange(m) / m
        rad = spec.radius * r / rings
        start = len(verts)
        verts.extend(c + rad * (np.cos(ang)[:, None] * e1 + np.sin(ang)[:, None] * e2))
        cur = list(range(start, start + m))
        # stitch ring r-1 (m - 6 vertices) to ring r (m vertices)
        if r == 1:
            for k in range(m):
                tris.append((0, cur[k], cur[(k + 1) % m]))
        else:
            mp = len(prev)
            for s in range(sectors):
                for k in range(r):
                    i_out = s * r + k
                    i_in = s * (r - 1) + k
                    tris.append((prev[i_in % mp], cur[i_out], cur[(i_out + 1) % m]))
                    if k < r - 1:
                        tris.append((prev[i_in % mp], cur[(i_out + 1) % m], prev[(i_in + 1) % mp]))
        prev = cur
    return from_vertices(2, np.array(verts), np.array(tris))


# pushforward -------------------------------------------------------------

def _split_segments(mesh: DiscreteSubmanifold, mask: np.ndarray) -> DiscreteSubmanifold:
    verts = list(mesh.vertices)
    elems = []
    for e, (a, b) in enumerate(mesh.elements):
        if mask[e]:
            m = len(verts)
            verts.append(mesh.vertices[a] + 0.5 * mesh.edge_vectors[e, 0])
            elems.extend([(a, m), (m, b)])
        else:
            elems.append((a, b))
    return from_vertices(1, np.array(verts), np.array(elems), check=False)


def _split_triangles(mesh: DiscreteSubmanifold) -> DiscreteSubmanifold:
    verts = list(mesh.vertices)
    cache = {}

    def mid(a, b):
        key = (min(a, b), max(a, b))
        if key not in cache:
            cache[key] = len(verts)
            verts.append(mesh.vertices[a] + 0.5 * wrap_diff(mesh.vertices[b] - mesh.vertices[a]))
        return cache[key]

    tris = []
    for a, b, c in mesh.elements:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        tris.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
    return from_vertices(2, np.array(verts), np.array(tris), check=False)


def _refine_curve(mesh: DiscreteSubmanifold, family, w, max_edge: float, max_depth: int,
                  labels=None, strict: bool = True):
    """Split source segments until every image segment is short.

    A segment is split when either its wrapped image chord or the image of the
    source edge under the Jacobian at an endpoint reaches ``max_edge``; the
    Jacobian test catches chords longer than 1/2 that wrapping would hide.
    Only new midpoints are evaluated at each level. ``labels`` (one per
    element) follow their elements through the splits. With ``strict=False``
    the unresolved elements are marked instead of raising.
    Returns (source vertices, elements, image vertices, labels, unresolved
    element mask).
    """
    verts = mesh.vertices
    elems = mesh.elements
    labels = np.zeros(len(elems), dtype=np.int64) if labels is None else np.asarray(labels)
    img, jac = family.apply_with_jacobian(w, verts)
    for level in range(max_depth + 1):
        src_e = wrap_diff(verts[elems[:, 1]] - verts[elems[:, 0]])
        chord = np.linalg.norm(wrap_diff(img[elems[:, 1]] - img[elems[:, 0]]), axis=-1)
        pa = np.linalg.norm(np.einsum("eij,ej->ei", jac[elems[:, 0]], src_e), axis=-1)
        pb = np.linalg.norm(np.einsum("eij,ej->ei", jac[elems[:, 1]], src_e), axis=-1)
        bad = np.maximum(chord, np.maximum(pa, pb)) >= max_edge
        if not bad.any():
            return verts, elems, img, labels, bad
        if level == max_depth:
            break
        idx = np.flatnonzero(bad)
        mids = wrap01(verts[elems[idx, 0]] + 0.5 * src_e[idx])
        mimg, mjac = family.apply_with_jacobian(w, mids)
        new_ids = len(verts) + np.arange(len(idx))
        verts = np.vstack([verts, mids])
        img = np.vstack([img, mimg])
        jac = np.concatenate([jac, mjac])
        # replace each bad element (a, b) by (a, m), (m, b) in place
        reps = np.where(bad, 2, 1)
        out = np.repeat(elems, reps, axis=0)
        starts = np.cumsum(reps) - reps
        first = starts[idx]
        out[first, 1] = new_ids
        out[first + 1, 0] = new_ids
        elems = out
        labels = np.repeat(labels, reps)
    if strict:
        raise SubdivisionDepthExceeded("pushforward still has over-long elements after max_depth splits")
    return verts, elems, img, labels, bad


def pushforward(mesh: DiscreteSubmanifold, family, w, tangents: str = "jacobian",
                max_depth: int = 16, max_edge: float = MAX_EDGE) -> DiscreteSubmanifold:
    """Image mesh under the family member with parameters w.

    Elements whose image reaches ``max_edge`` are split in the source mesh and
    re-mapped (curves locally, triangles uniformly). ``tangents="jacobian"``
    pushes each element plane by dPsi at the element midpoint; ``"chord"``
    uses the image element itself.
    """
    if not 0 < max_edge <= MAX_EDGE:
        raise InvalidInput(f"max_edge must lie in (0, {MAX_EDGE}]")
    if tangents not in ("chord", "jacobian"):
        raise InvalidInput(f"unknown tangent mode {tangents!r}")
    if mesh.dim == 1:
        verts, elems, img, _, _ = _refine_curve(mesh, family, w, max_edge, max_depth)
        src = from_vertices(1, verts, elems, check=False)
    else:
        src = mesh
        for _ in range(max_depth + 1):
            img, jac = family.apply_with_jacobian(w, src.vertices)
            e = src.elements
            size = np.zeros(len(e))
            for i, j in ((0, 1), (1, 2), (2, 0)):
                chord = np.linalg.norm(wrap_diff(img[e[:, j]] - img[e[:, i]]), axis=-1)
                src_e = wrap_diff(src.vertices[e[:, j]] - src.vertices[e[:, i]])
                pred = np.linalg.norm(np.einsum("eij,ej->ei", jac[e[:, i]], src_e), axis=-1)
                size = np.maximum(size, np.maximum(chord, pred))
            if not (size >= max_edge).any():
                break
            src = _split_triangles(src)
        else:
            raise SubdivisionDepthExceeded("pushforward still has over-long elements after max_depth splits")
    if tangents == "chord":
        return from_vertices(src.dim, img, src.elements)
    _, jac = family.apply_with_jacobian(w, src.midpoints())
    tang = orthonormal_frames(np.einsum("eij,ejk->eik", jac, src.element_tangents))
    return from_vertices(src.dim, img, src.elements, tangents=tang, check=False)
