"""Flat-torus geometry and the small dense linear algebra used everywhere else.

Points live in the unit cube ``[0, 1)^n`` standing for ``R^n / Z^n`` and
tangent spaces are identified with ``R^n`` through the flat trivialization.
Only ``n in {2, 3}`` is supported.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

ORTHO_TOL = 1e-10
GAP_TOL = 1e-10
BASIS_TOL = 1e-12


class InvalidInput(ValueError):
    """Raised for malformed or non-finite arguments."""


def _as_finite(a, name="argument") -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return arr


def wrap01(x: np.ndarray) -> np.ndarray:
    """Reduce coordinates into [0, 1)."""
    y = np.mod(x, 1.0)
    # np.mod(-1e-18, 1.0) == 1.0 in floating point
    return np.where(y >= 1.0, 0.0, y)


def wrap_diff(d: np.ndarray) -> np.ndarray:
    """Nearest-integer reduction of a displacement into [-1/2, 1/2]."""
    d = np.asarray(d, dtype=float)
    return d - np.round(d)


def torus_distance(x, y) -> np.ndarray:
    return np.linalg.norm(wrap_diff(np.asarray(x) - np.asarray(y)), axis=-1)


@dataclass(frozen=True)
class TorusPoint:
    coords: np.ndarray

    def __post_init__(self):
        c = _as_finite(self.coords, "coords").reshape(-1)
        if c.size not in (2, 3):
            raise InvalidInput(f"torus dimension must be 2 or 3, got {c.size}")
        c = wrap01(c)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return self.coords.size

    def translate(self, v) -> "TorusPoint":
        return TorusPoint(self.coords + np.asarray(v, dtype=float))

    def distance(self, other: "TorusPoint") -> float:
        return float(torus_distance(self.coords, other.coords))


@dataclass(frozen=True)
class GrassmannPlane:
    """A k-plane at a torus point, stored as an orthonormal n x k basis."""

    base: TorusPoint
    basis: np.ndarray

    def __post_init__(self):
        b = _as_finite(self.basis, "basis")
        n = self.base.n
        if b.size == 0:
            b = np.zeros((n, 0))
        if b.ndim == 1:
            b = b.reshape(n, 1)
        if b.shape[0] != n or b.shape[1] > n:
            raise InvalidInput(f"basis shape {b.shape} incompatible with n={n}")
        if not np.allclose(b.T @ b, np.eye(b.shape[1]), atol=BASIS_TOL, rtol=0):
            raise InvalidInput("basis columns are not orthonormal")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @property
    def n(self) -> int:
        return self.base.n

    @classmethod
    def from_span(cls, base, vectors) -> "GrassmannPlane":
        """Orthonormalize the columns of ``vectors`` (n x k) into a plane."""
        if not isinstance(base, TorusPoint):
            base = TorusPoint(base)
        return cls(base, orthonormalize(np.asarray(vectors, dtype=float).reshape(base.n, -1)))

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T


@dataclass(frozen=True)
class SkewMatrix:
    mat: np.ndarray

    def __post_init__(self):
        m = _as_finite(self.mat, "mat")
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidInput("skew matrix must be square")
        if np.max(np.abs(m + m.T), initial=0.0) > 1e-12:
            raise InvalidInput("matrix is not skew-symmetric")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @property
    def n(self) -> int:
        return self.mat.shape[0]

    @classmethod
    def from_coefficients(cls, coef, n: int) -> "SkewMatrix":
        return cls(skew_from_coefficients(coef, n))

    def coefficients(self) -> np.ndarray:
        """Strictly upper triangular entries in row-major order."""
        return self.mat[np.triu_indices(self.n, 1)].copy()


@dataclass(frozen=True)
class Rotation:
    mat: np.ndarray

    def __post_init__(self):
        m = _as_finite(self.mat, "mat")
        n = m.shape[0]
        if m.shape != (n, n):
            raise InvalidInput("rotation must be square")
        if np.max(np.abs(m.T @ m - np.eye(n))) > ORTHO_TOL:
            raise InvalidInput("matrix is not orthogonal")
        if abs(np.linalg.det(m) - 1.0) > ORTHO_TOL:
            raise InvalidInput("matrix has determinant != +1")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @property
    def n(self) -> int:
        return self.mat.shape[0]


@dataclass(frozen=True)
class RotationLog:
    skew: SkewMatrix
    # angle exactly pi: the principal logarithm is not unique
    branch_ambiguous: bool = field(default=False)


def skew_from_coefficients(coef, n: int) -> np.ndarray:
    coef = np.asarray(coef, dtype=float)
    m = np.zeros((n, n))
    m[np.triu_indices(n, 1)] = coef
    return m - m.T


def orthonormalize(vectors: np.ndarray) -> np.ndarray:
    """Orthonormal basis (n x k) of the column span; raises on rank loss."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.shape[1] == 0:
        return vectors.copy()
    q, r = np.linalg.qr(vectors)
    d = np.abs(np.diag(r))
    if d.min() <= 1e-14 * max(1.0, d.max()):
        raise InvalidInput("vectors are linearly dependent")
    return q


def normal_jacobian(a) -> float:
    """``sqrt(det(A A^T))``: zero exactly when A is not surjective."""
    a = _as_finite(a, "A")
    if a.ndim != 2:
        raise InvalidInput("A must be a matrix")
    rows, cols = a.shape
    if rows == 0:
        return 1.0
    if rows > cols:
        return 0.0
    # product of singular values; forming A A^T would square the condition number
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[-1] <= max(rows, cols) * np.finfo(float).eps * sv[0]:
        return 0.0
    return float(np.exp(np.sum(np.log(sv))))


def rotation_exp(v: SkewMatrix | np.ndarray) -> Rotation:
    m = v.mat if isinstance(v, SkewMatrix) else SkewMatrix(v).mat
    return Rotation(_expm_skew(m))


def _expm_skew(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    if n == 2:
        th = m[1, 0]
        c, s = np.cos(th), np.sin(th)
        return np.array([[c, -s], [s, c]])
    if n == 3:
        w = np.array([m[2, 1], m[0, 2], m[1, 0]])
        th = np.linalg.norm(w)
        if th < 1e-8:
            a = 1.0 - th * th / 6.0
            b = 0.5 - th * th / 24.0
        else:
            a = np.sin(th) / th
            b = (1.0 - np.cos(th)) / (th * th)
        return np.eye(3) + a * m + b * (m @ m)
    out = scipy.linalg.expm(m)
    # re-project onto SO(n) to kill drift from the Pade approximant
    u, _, vt = np.linalg.svd(out)
    return u @ vt


def rotation_log(a: Rotation | np.ndarray) -> RotationLog:
    """Principal logarithm with planar angles in (-pi, pi]."""
    m = a.mat if isinstance(a, Rotation) else Rotation(a).mat
    n = m.shape[0]
    if n == 2:
        th = np.arctan2(m[1, 0], m[0, 0])
        return RotationLog(SkewMatrix(np.array([[0.0, -th], [th, 0.0]])), bool(th == np.pi))
    if n == 3:
        return _log_so3(m)
    # generic: real Schur form of an orthogonal matrix is block diagonal
    t, z = scipy.linalg.schur(m, output="real")
    log_t = np.zeros_like(t)
    ambiguous = False
    i = 0
    while i < n:
        if i + 1 < n and abs(t[i + 1, i]) > 1e-14:
            th = np.arctan2(t[i + 1, i], t[i, i])
            log_t[i, i + 1], log_t[i + 1, i] = -th, th
            i += 2
        else:
            if t[i, i] < 0:
                ambiguous = True
            i += 1
    if ambiguous:
        # pair up -1 eigenvalues into rotations by pi
        neg = [j for j in range(n) if abs(t[j, j] + 1) < 1e-9 and (j == 0 or abs(t[j, j - 1]) < 1e-14)]
        for j0, j1 in zip(neg[::2], neg[1::2]):
            log_t[j0, j1], log_t[j1, j0] = -np.pi, np.pi
    lg = z @ log_t @ z.T
    return RotationLog(SkewMatrix(0.5 * (lg - lg.T)), ambiguous)


def _log_so3(m: np.ndarray) -> RotationLog:
    c = np.clip((np.trace(m) - 1.0) / 2.0, -1.0, 1.0)
    th = np.arccos(c)
    skew_part = 0.5 * (m - m.T)
    if th < 1e-6:
        # log(R) = S (1 + th^2/6 + ...) with S the skew part
        lg = skew_part * (1.0 + th * th / 6.0)
        return RotationLog(SkewMatrix(0.5 * (lg - lg.T)))
    if np.pi - th > 1e-6:
        lg = skew_part * (th / np.sin(th))
        return RotationLog(SkewMatrix(0.5 * (lg - lg.T)))
    # near pi: axis from the symmetric part, sign from the skew part
    sym = 0.5 * (m + m.T) - c * np.eye(3)
    # sym = (1 - c) * u u^T
    col = int(np.argmax(np.diag(sym)))
    u = sym[:, col] / np.sqrt(sym[col, col] * (1.0 - c))
    u /= np.linalg.norm(u)
    w = np.array([skew_part[2, 1], skew_part[0, 2], skew_part[1, 0]])
    if w @ u < 0:
        u = -u
    ux = np.array([[0, -u[2], u[1]], [u[2], 0, -u[0]], [-u[1], u[0], 0]])
    lg = th * ux
    return RotationLog(SkewMatrix(0.5 * (lg - lg.T)), bool(th == np.pi))


def _plane_bases(p, q):
    bp = p.basis if isinstance(p, GrassmannPlane) else np.asarray(p, dtype=float)
    bq = q.basis if isinstance(q, GrassmannPlane) else np.asarray(q, dtype=float)
    if isinstance(p, GrassmannPlane) and isinstance(q, GrassmannPlane):
        if p.base.distance(q.base) > 1e-12:
            raise InvalidInput("planes are attached to different base points")
    return bp, bq


def sin_angle(p, q) -> float:
    """|det [basis(P) | basis(Q)]| for complementary planes P, Q."""
    bp, bq = _plane_bases(p, q)
    n = bp.shape[0]
    if bq.shape[0] != n or bp.shape[1] + bq.shape[1] != n:
        raise InvalidInput("planes are not of complementary dimension")
    return float(min(1.0, abs(np.linalg.det(np.hstack([bp, bq])))))


def subspace_gap(b1: np.ndarray, b2: np.ndarray) -> float:
    """Spectral norm distance between the orthogonal projectors."""
    p1 = b1 @ b1.T
    p2 = b2 @ b2.T
    return float(np.linalg.norm(p1 - p2, 2)) if p1.size else 0.0


def align_rotation(s1, s2) -> Rotation:
    """Direct rotation in SO(n) carrying span(s1) onto span(s2).

    Rotates each principal plane by its principal angle and fixes the
    orthogonal complement of those planes, so all angles stay in [0, pi/2].
    """
    b1, b2 = _plane_bases(s1, s2)
    n, k = b1.shape
    if b2.shape != (n, k):
        raise InvalidInput("planes must have equal dimension")
    a = np.eye(n)
    if k == 0 or k == n:
        return Rotation(a)
    u, sv, vt = np.linalg.svd(b1.T @ b2)
    us = b1 @ u
    ws = b2 @ vt.T
    for i in range(k):
        c = float(np.clip(us[:, i] @ ws[:, i], -1.0, 1.0))
        # sin from the residual itself: sqrt(1 - c^2) cancels badly for tiny angles
        y = ws[:, i] - c * us[:, i]
        s = float(np.linalg.norm(y))
        if s < 1e-15:
            continue
        y /= s
        ui = us[:, i]
        a = a + (c - 1.0) * (np.outer(ui, ui) + np.outer(y, y)) + s * (np.outer(y, ui) - np.outer(ui, y))
    # clean up rounding so the Rotation invariants hold tightly
    uu, _, vv = np.linalg.svd(a)
    a = uu @ vv
    if np.linalg.det(a) < 0:
        raise AssertionError("direct rotation left SO(n)")
    return Rotation(a)


def det_J(dh, b_v, b_w) -> float:
    """det [-dh B_V | B_W] for the linearized intersection constraint."""
    dh = _as_finite(dh, "dh")
    b_v = np.asarray(b_v, dtype=float)
    b_w = np.asarray(b_w, dtype=float)
    n = dh.shape[0]
    b_v = b_v.reshape(n, -1)
    b_w = b_w.reshape(n, -1)
    if dh.shape != (n, n) or b_v.shape[1] + b_w.shape[1] != n:
        raise InvalidInput("column counts of B_V and B_W must sum to n")
    return float(np.linalg.det(np.hstack([-dh @ b_v, b_w])))
