"""Compactly supported diffeomorphism families on flat tori.

The local building block is ``psi(t, v) = tau(t) o L(v)`` on ``R^n``: a
rotation by ``exp(beta(|p|) v)`` cut off outside the ball of radius 3,
followed by the flows of the cut-off coordinate fields ``beta(|p|) e_i``.
Affine charts transplant it onto the torus, and the global family composes
one copy per chart per round.

Parameter layout of ``w`` (length N): round-major, chart-minor; inside a
block the n translation times come first, then the strictly upper
triangular entries of the skew matrix in row-major order.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np
from scipy.special import gammaln

from . import _kernels as K
from .geometry import (
    GrassmannPlane,
    InvalidInput,
    SkewMatrix,
    TorusPoint,
    align_rotation,
    rotation_log,
    skew_from_coefficients,
    subspace_gap,
    torus_distance,
    wrap01,
    wrap_diff,
)

CHART_RADIUS = 4.0


class RadiusTooSmall(RuntimeError):
    def __init__(self, required: float, radius: float):
        super().__init__(f"witness norm {required:.6g} exceeds family radius {radius:.6g}")
        self.required = required


class AtlasError(InvalidInput):
    pass


class BumpProfile:
    """Smooth step: 1 on [0, 2], 0 on [3, inf), strictly decreasing between.

    Built from ``g(x) = exp(-1/x)`` as ``g(3 - r) / (g(3 - r) + g(r - 2))``.
    """

    @staticmethod
    def eval(r):
        return bump_eval(r)

    @staticmethod
    def deriv(r):
        return bump_deriv(r)


def _check_radius(r):
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)) or np.any(r < 0):
        raise InvalidInput("bump profile is defined for finite r >= 0 only")
    return r


def bump_eval(r):
    r = _check_radius(r)
    out = np.vectorize(K.bump, otypes=[float])(r)
    return float(out) if out.ndim == 0 else out


def bump_deriv(r):
    r = _check_radius(r)
    out = np.vectorize(K.bump_deriv, otypes=[float])(r)
    return float(out) if out.ndim == 0 else out


def _coef(v, n):
    if isinstance(v, SkewMatrix):
        return v.coefficients()
    v = np.asarray(v, dtype=float)
    if v.ndim == 2:
        return SkewMatrix(v).coefficients()
    if v.size != n * (n - 1) // 2:
        raise InvalidInput("wrong number of skew coefficients")
    return v


def local_rotation_apply(v, p, jacobian: bool = False):
    """``L(v)(p) = exp(beta(|p|) v) p`` on R^n, optionally with d/dp."""
    p = np.asarray(p, dtype=float)
    n = p.size
    coef = _coef(v, n)
    jy = np.zeros((n, n))
    jc = np.zeros((n, coef.size))
    z = K.rotation_block(p.copy(), coef, n, jy, jc)
    return (z, jy) if jacobian else z


def translation_flow(i: int, t: float, p, flow_step: float = 1e-2, jacobian: bool = False):
    """Time-t flow of ``beta(|p|) e_i`` by fixed-step RK4, optionally with d/dp."""
    p = np.asarray(p, dtype=float).copy()
    n = p.size
    if not 0 <= i < n:
        raise InvalidInput("axis index out of range")
    tang = np.eye(n) if jacobian else np.zeros((n, 0))
    z = K.axis_flow(p, i, float(t), flow_step, tang, -1)
    return (z, tang) if jacobian else z


def local_family_apply(t, v, p, flow_step: float = 1e-2, derivatives: bool = False):
    """``psi(t, v)(p)`` in chart coordinates.

    With ``derivatives`` also returns d/dp (n x n) and d/d(t, coef).
    """
    p = np.asarray(p, dtype=float)
    n = p.size
    params = np.concatenate([np.asarray(t, dtype=float), _coef(v, n)])
    jy = np.zeros((n, n))
    jp = np.zeros((n, params.size))
    z = K.local_block(p.copy(), params, n, flow_step, jy, jp)
    return (z, jy, jp) if derivatives else z


@dataclass(frozen=True)
class ChartAtlas:
    """Affine charts ``phi_i(x) = wrap(x - c_i) / scale`` onto B(0, 4).

    Inner sets are the preimages of the unit ball. Construction validates
    the cover on a dense grid and computes the Cech 1-complex diameter.
    """

    centers: np.ndarray
    scale: float
    check_resolution: int = 0
    adjacency: tuple = field(init=False, repr=False)
    cech_diameter: int = field(init=False)

    def __post_init__(self):
        c = wrap01(np.asarray(self.centers, dtype=float))
        if c.ndim != 2 or c.shape[1] not in (2, 3) or len(c) == 0:
            raise AtlasError("centers must be an (L, n) array with n in {2, 3}")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)
        if not (0 < self.scale and CHART_RADIUS * self.scale <= 0.5):
            raise AtlasError(f"scale {self.scale} does not give embedded charts (need 4*scale <= 1/2)")
        self._check_cover()
        adj = self._cech_graph()
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "cech_diameter", self._diameter(adj))

    @property
    def n(self) -> int:
        return self.centers.shape[1]

    @property
    def num_charts(self) -> int:
        return self.centers.shape[0]

    def chart_coords(self, i: int, x) -> np.ndarray:
        return wrap_diff(np.asarray(x, dtype=float) - self.centers[i]) / self.scale

    def chart_inverse(self, i: int, y) -> np.ndarray:
        return wrap01(self.centers[i] + self.scale * np.asarray(y, dtype=float))

    def inner_charts(self, x) -> np.ndarray:
        d = torus_distance(self.centers, np.asarray(x, dtype=float))
        return np.flatnonzero(d < self.scale)

    def _check_cover(self):
        m = self.check_resolution or (8 * int(math.ceil(1.0 / self.scale)))
        axes = [np.arange(m) / m] * self.n
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)
        best = np.full(len(grid), np.inf)
        for c in self.centers:
            best = np.minimum(best, torus_distance(grid, c))
        if np.any(best >= self.scale):
            bad = grid[np.argmax(best)]
            raise AtlasError(f"inner sets do not cover the torus (point {bad.tolist()} uncovered)")

    def _cech_graph(self):
        dist = torus_distance(self.centers[:, None, :], self.centers[None, :, :])
        adj = dist < 2.0 * self.scale
        np.fill_diagonal(adj, False)
        return tuple(tuple(np.flatnonzero(row).tolist()) for row in adj)

    @staticmethod
    def _diameter(adj) -> int:
        diam = 0
        for s in range(len(adj)):
            dist = _bfs(adj, [s])
            if min(dist) < 0:
                raise AtlasError("Cech 1-complex of the inner sets is disconnected")
            diam = max(diam, max(dist))
        return diam

    def route(self, x, y) -> list[int]:
        """Shortest chart chain from an inner set containing x to one containing y."""
        src = self.inner_charts(x).tolist()
        dst = set(self.inner_charts(y).tolist())
        if not src or not dst:
            raise AtlasError("point not covered by any inner set")
        prev = {s: None for s in src}
        queue = deque(src)
        while queue:
            u = queue.popleft()
            if u in dst:
                path = [u]
                while prev[path[-1]] is not None:
                    path.append(prev[path[-1]])
                return path[::-1]
            for v in self.adjacency[u]:
                if v not in prev:
                    prev[v] = u
                    queue.append(v)
        raise RuntimeError("no Cech path between inner sets")


def _bfs(adj, sources):
    dist = [-1] * len(adj)
    queue = deque(sources)
    for s in sources:
        dist[s] = 0
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def grid_atlas(n: int, per_axis: int | None = None, scale: float | None = None) -> ChartAtlas:
    """Charts centred on a regular grid; defaults cover T^2 and T^3 tightly."""
    defaults = {2: (6, 0.12), 3: (7, 0.124)}
    if n not in defaults:
        raise InvalidInput("only T^2 and T^3 are supported")
    m0, s0 = defaults[n]
    m = per_axis or m0
    s = scale or s0
    centers = np.array(list(product(range(m), repeat=n)), dtype=float) / m
    return ChartAtlas(centers, s)


# 2 x the largest witness norm over 200 random pairs per k (scripts/calibrate_radius.py)
DEFAULT_RADIUS = {2: 8.0, 3: 8.0}


@dataclass(frozen=True)
class FamilySpec:
    """The composed family Psi on the parameter ball of radius R in R^N."""

    atlas: ChartAtlas
    R: float
    flow_step: float = 1e-2
    fd_step: float = 1e-6

    def __post_init__(self):
        if not (np.isfinite(self.R) and self.R > 0):
            raise InvalidInput("R must be a positive real")
        if not self.flow_step > 0 or not self.fd_step > 0:
            raise InvalidInput("flow_step and fd_step must be positive")

    @property
    def n(self) -> int:
        return self.atlas.n

    @property
    def block_dim(self) -> int:
        return self.n + self.n * (self.n - 1) // 2

    @property
    def rounds(self) -> int:
        return self.atlas.cech_diameter + 1

    @property
    def num_blocks(self) -> int:
        return self.rounds * self.atlas.num_charts

    @property
    def N(self) -> int:
        return self.block_dim * self.num_blocks

    @property
    def dim(self) -> int:
        return self.N

    def log_measure(self) -> float:
        """log Lebesgue volume of the closed parameter ball."""
        d = self.N
        return 0.5 * d * math.log(math.pi) + d * math.log(self.R) - gammaln(0.5 * d + 1)

    def reshape(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.N,):
            raise InvalidInput(f"parameter vector must have length {self.N}")
        return np.ascontiguousarray(w.reshape(self.rounds, self.atlas.num_charts, self.block_dim))

    def block_slice(self, round_index: int, chart: int) -> slice:
        start = (round_index * self.atlas.num_charts + chart) * self.block_dim
        return slice(start, start + self.block_dim)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform point of the parameter ball."""
        g = rng.standard_normal(self.N)
        u = rng.random()
        return self.R * u ** (1.0 / self.N) * g / np.linalg.norm(g)

    # evaluation ----------------------------------------------------------
    def apply(self, w, x) -> np.ndarray:
        xs = _points(x, self.n)
        out = K.family_points(xs, self.reshape(w), self.atlas.centers, self.atlas.scale, self.flow_step)
        return out.reshape(np.shape(x)) if np.ndim(x) == 1 else out

    def apply_with_jacobian(self, w, x):
        xs = _points(x, self.n)
        out, jac, _ = K.family_points_derivs(
            xs, self.reshape(w), self.atlas.centers, self.atlas.scale, self.flow_step, False
        )
        return out, jac

    def jacobian(self, w, x) -> np.ndarray:
        _, jac = self.apply_with_jacobian(w, x)
        return jac[0] if np.ndim(x) == 1 else jac

    def param_derivative(self, w, x) -> np.ndarray:
        xs = _points(x, self.n)
        _, _, pd = K.family_points_derivs(
            xs, self.reshape(w), self.atlas.centers, self.atlas.scale, self.flow_step, True
        )
        return pd[0] if np.ndim(x) == 1 else pd

    def evaluate_all(self, w, x):
        """(image, spatial Jacobian, parameter derivative) at a single point."""
        xs = _points(x, self.n)
        out, jac, pd = K.family_points_derivs(
            xs, self.reshape(w), self.atlas.centers, self.atlas.scale, self.flow_step, True
        )
        return out[0], jac[0], pd[0]


class TranslationFamily:
    """T^2 (or T^3) acting on itself by translations: the isometric toy case."""

    def __init__(self, n: int = 2):
        if n not in (2, 3):
            raise InvalidInput("only T^2 and T^3 are supported")
        self._n = n

    @property
    def n(self) -> int:
        return self._n

    @property
    def dim(self) -> int:
        return self._n

    N = dim

    def log_measure(self) -> float:
        return 0.0

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.random(self._n)

    def sample_many(self, rng: np.random.Generator, count: int) -> np.ndarray:
        # same stream as ``count`` successive calls to sample()
        return rng.random((count, self._n))

    def apply(self, w, x) -> np.ndarray:
        return wrap01(np.asarray(x, dtype=float) + np.asarray(w, dtype=float))

    def jacobian(self, w, x) -> np.ndarray:
        xs = np.asarray(x, dtype=float)
        if xs.ndim == 1:
            return np.eye(self._n)
        return np.broadcast_to(np.eye(self._n), (len(xs), self._n, self._n)).copy()

    def apply_with_jacobian(self, w, x):
        xs = _points(x, self._n)
        return self.apply(w, xs), self.jacobian(w, xs)

    def param_derivative(self, w, x) -> np.ndarray:
        return self.jacobian(w, x)

    def evaluate_all(self, w, x):
        return self.apply(w, x), np.eye(self._n), np.eye(self._n)


def _points(x, n) -> np.ndarray:
    if isinstance(x, TorusPoint):
        x = x.coords
    xs = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1, n))
    if not np.all(np.isfinite(xs)):
        raise InvalidInput("non-finite point coordinates")
    return xs


def torus_family(n: int = 2, R: float | None = None, flow_step: float = 1e-2, fd_step: float = 1e-6,
                 atlas: ChartAtlas | None = None) -> FamilySpec:
    atlas = atlas or grid_atlas(n)
    return FamilySpec(atlas, DEFAULT_RADIUS[n] if R is None else R, flow_step, fd_step)


# module-level operations -------------------------------------------------

def chart_local_apply(spec: FamilySpec, i: int, t, v, x, jacobian: bool = False):
    """Single chart-localized map: conjugated psi(t, v) on U_i, identity elsewhere."""
    atlas = spec.atlas
    if not 0 <= i < atlas.num_charts:
        raise InvalidInput("chart index out of range")
    xs = _points(x, spec.n)[0]
    y = atlas.chart_coords(i, xs)
    if np.linalg.norm(y) >= K.SUPPORT_RADIUS:
        out, jac = xs.copy(), np.eye(spec.n)
    else:
        z, jac, _ = local_family_apply(t, v, y, spec.flow_step, derivatives=True)
        out = atlas.chart_inverse(i, z)
    if isinstance(x, TorusPoint):
        out = TorusPoint(out)
    return (out, jac) if jacobian else out


def family_apply(spec, w, x):
    out = spec.apply(w, x.coords if isinstance(x, TorusPoint) else x)
    return TorusPoint(out) if isinstance(x, TorusPoint) else out


def family_jacobian(spec, w, x) -> np.ndarray:
    return spec.jacobian(w, x.coords if isinstance(x, TorusPoint) else x)


def family_param_derivative(spec, w, x, method: str = "forward", richardson: bool = False) -> np.ndarray:
    """n x N derivative of w -> Psi(w)(x).

    ``forward`` differentiates the discrete map exactly; ``fd`` is the
    central-difference cross-check (2N evaluations, optional Richardson).
    """
    x = x.coords if isinstance(x, TorusPoint) else np.asarray(x, dtype=float)
    if method == "forward":
        return spec.param_derivative(w, x)
    if method != "fd":
        raise InvalidInput(f"unknown method {method!r}")
    w = np.asarray(w, dtype=float)
    h = getattr(spec, "fd_step", 1e-6)

    def central(step):
        cols = []
        for j in range(w.size):
            e = np.zeros(w.size)
            e[j] = step
            d = wrap_diff(spec.apply(w + e, x) - spec.apply(w - e, x))
            cols.append(d / (2 * step))
        return np.column_stack(cols)

    d1 = central(h)
    if not richardson:
        return d1
    return (4.0 * central(h / 2) - d1) / 3.0


def family_inverse(spec, w, y, tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
    """Newton solve of Psi(w)(x) = y started from x = y."""
    y = np.asarray(y, dtype=float).reshape(spec.n)
    x = y.copy()
    for _ in range(max_iter):
        fx, jac = spec.apply_with_jacobian(w, x[None, :])
        r = wrap_diff(fx[0] - y)
        if np.linalg.norm(r) < tol:
            break
        x = wrap01(x - np.linalg.solve(jac[0], r))
    return x


# transitivity witnesses --------------------------------------------------

@dataclass(frozen=True)
class Witness:
    w: np.ndarray
    route: tuple
    norm: float


def witness_A2(spec: FamilySpec, sigma_p: GrassmannPlane, sigma_q: GrassmannPlane,
               check_radius: bool = True) -> np.ndarray:
    """Parameters w with Psi(w)(p) = q and dPsi(w)(sigma_p) = sigma_q."""
    return build_witness(spec, sigma_p, sigma_q, check_radius).w


def build_witness(spec: FamilySpec, sigma_p: GrassmannPlane, sigma_q: GrassmannPlane,
                  check_radius: bool = True) -> Witness:
    if sigma_p.k != sigma_q.k or sigma_p.n != spec.n or sigma_q.n != spec.n:
        raise InvalidInput("planes must share dimension and ambient torus")
    atlas = spec.atlas
    p = sigma_p.base.coords
    q = sigma_q.base.coords
    w = np.zeros(spec.N)
    a = align_rotation(sigma_p.basis, sigma_q.basis)
    same_plane = subspace_gap(sigma_p.basis, sigma_q.basis) <= 1e-14
    if torus_distance(p, q) == 0.0 and same_plane:
        return Witness(w, (), 0.0)
    path = atlas.route(p, q)
    if len(path) > spec.rounds:
        raise RuntimeError("Cech route longer than the number of rounds")
    n = spec.n
    cur = p
    for r, (ci, cj) in enumerate(zip(path[:-1], path[1:])):
        # hop into the overlap of consecutive inner sets
        mid = atlas.centers[ci] + 0.5 * wrap_diff(atlas.centers[cj] - atlas.centers[ci])
        t = atlas.chart_coords(ci, mid) - atlas.chart_coords(ci, cur)
        w[spec.block_slice(r, ci)][:n] = t
        cur = wrap01(mid)
    last = path[-1]
    coef = rotation_log(a).skew.coefficients()
    y = atlas.chart_coords(last, cur)
    t = atlas.chart_coords(last, q) - a.mat @ y
    blk = w[spec.block_slice(len(path) - 1, last)]
    blk[:n] = t
    blk[n:] = coef
    norm = float(np.linalg.norm(w))
    if check_radius and norm > spec.R:
        raise RadiusTooSmall(norm, spec.R)
    return Witness(w, tuple(path), norm)


def check_witness(spec: FamilySpec, w, sigma_p: GrassmannPlane, sigma_q: GrassmannPlane):
    """(point error, subspace gap) of a candidate witness."""
    img, jac = spec.apply_with_jacobian(w, sigma_p.base.coords)
    point_err = float(torus_distance(img[0], sigma_q.base.coords))
    if sigma_p.k == 0:
        return point_err, 0.0
    q_basis = np.linalg.qr(jac[0] @ sigma_p.basis)[0]
    return point_err, subspace_gap(q_basis, sigma_q.basis)


def random_plane(rng: np.random.Generator, n: int, k: int, base=None) -> GrassmannPlane:
    base = TorusPoint(rng.random(n) if base is None else base)
    if k == 0:
        return GrassmannPlane(base, np.zeros((n, 0)))
    return GrassmannPlane.from_span(base, rng.standard_normal((n, k)))


def calibrate_radius(spec: FamilySpec, num_pairs: int = 200, seed: int = 0, ks=None) -> float:
    """R = 2 x the largest witness norm over random Grassmannian pairs."""
    rng = np.random.default_rng(seed)
    ks = ks if ks is not None else range(spec.n)
    worst = 0.0
    for k in ks:
        for _ in range(num_pairs):
            sp = random_plane(rng, spec.n, k)
            sq = random_plane(rng, spec.n, k)
            worst = max(worst, build_witness(spec, sp, sq, check_radius=False).norm)
    return 2.0 * worst


def skew_block(coef, n: int) -> np.ndarray:
    return skew_from_coefficients(coef, n)
