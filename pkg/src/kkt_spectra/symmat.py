"""Dense symmetric-matrix core.

Provides the SymMat value type, spectral decomposition by cyclic Jacobi
rotations with a sign partition of the spectrum, projection onto the PSD
cone, the divided-difference Sigma matrix, the directional derivative of
the PSD projection, and the spectral pseudoinverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputDataError, NumericError

_SQRT2 = math.sqrt(2.0)
_JACOBI_OFF_TOL = 1e-14   # off-diagonal Frobenius mass target, relative to ||M||_F
_JACOBI_MAX_SWEEPS = 64


class SymMat:
    """Real symmetric p x p matrix with single storage per (i, j) pair.

    Entries live in a packed upper-triangle vector, so the materialized
    full matrix is symmetric exactly, not merely to round-off.
    """

    __slots__ = ("_p", "_upper", "_cache")

    def __init__(self, entries):
        arr = np.asarray(entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InputDataError(f"expected a square matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InputDataError("matrix entries must be finite")
        arr = 0.5 * (arr + arr.T)
        p = arr.shape[0]
        self._p = p
        self._upper = arr[np.triu_indices(p)]
        self._upper.flags.writeable = False
        self._cache = None

    @classmethod
    def _from_packed(cls, p, upper):
        obj = object.__new__(cls)
        obj._p = p
        obj._upper = np.asarray(upper, dtype=float)
        obj._upper.flags.writeable = False
        obj._cache = None
        return obj

    @classmethod
    def zeros(cls, p):
        return cls._from_packed(p, np.zeros(p * (p + 1) // 2))

    @classmethod
    def eye(cls, p):
        return cls(np.eye(p))

    @classmethod
    def diag(cls, values):
        return cls(np.diag(np.asarray(values, dtype=float)))

    @property
    def p(self) -> int:
        return self._p

    @property
    def shape(self):
        return (self._p, self._p)

    def full(self) -> np.ndarray:
        """Materialized full matrix (read-only view, cached)."""
        if self._cache is None:
            p = self._p
            m = np.zeros((p, p))
            iu = np.triu_indices(p)
            m[iu] = self._upper
            m.T[iu] = self._upper
            m.flags.writeable = False
            self._cache = m
        return self._cache

    def norm(self) -> float:
        return float(np.linalg.norm(self.full(), "fro"))

    def max_abs(self) -> float:
        if self._upper.size == 0:
            return 0.0
        return float(np.max(np.abs(self._upper)))

    def inner(self, other: "SymMat") -> float:
        return float(np.sum(self.full() * as_symmat(other).full()))

    def allclose(self, other, atol=1e-12, rtol=0.0) -> bool:
        return bool(np.allclose(self.full(), as_symmat(other).full(), atol=atol, rtol=rtol))

    def to_rowmajor(self) -> list:
        return [float(v) for v in self.full().ravel()]

    def __add__(self, other):
        return SymMat._from_packed(self._p, self._upper + as_symmat(other)._upper)

    def __sub__(self, other):
        return SymMat._from_packed(self._p, self._upper - as_symmat(other)._upper)

    def __neg__(self):
        return SymMat._from_packed(self._p, -self._upper)

    def __mul__(self, c):
        return SymMat._from_packed(self._p, float(c) * self._upper)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SymMat({self.full().tolist()})"


def as_symmat(obj) -> SymMat:
    """Coerce an array-like into a SymMat (identity on SymMat inputs)."""
    if isinstance(obj, SymMat):
        return obj
    return SymMat(obj)


def svec_indices(p):
    """Row/column index pairs of the packed upper triangle, row-major."""
    return np.triu_indices(p)


def sym_vec(M: SymMat) -> np.ndarray:
    """Isometric vectorization: off-diagonal entries scaled by sqrt(2).

    Satisfies <A, B>_F = sym_vec(A) . sym_vec(B).
    """
    M = as_symmat(M)
    rows, cols = svec_indices(M.p)
    scale = np.where(rows == cols, 1.0, _SQRT2)
    return M.full()[rows, cols] * scale


def sym_mat(v, p) -> SymMat:
    """Inverse of sym_vec."""
    v = np.asarray(v, dtype=float)
    rows, cols = svec_indices(p)
    if v.shape != rows.shape:
        raise InputDataError(f"svec length {v.size} does not match order {p}")
    m = np.zeros((p, p))
    vals = v / np.where(rows == cols, 1.0, _SQRT2)
    m[rows, cols] = vals
    m[cols, rows] = vals
    return SymMat(m)


def _jacobi(A0: np.ndarray):
    """Cyclic Jacobi eigensolver; returns (eigenvalues, eigenvector columns).

    Deterministic row-major sweep order; converges when the off-diagonal
    Frobenius mass drops below 1e-14 * ||A||_F, at most 64 sweeps.
    """
    A = A0.copy()
    p = A.shape[0]
    V = np.eye(p)
    if p == 1:
        return np.array([A[0, 0]]), V
    base = float(np.linalg.norm(A, "fro"))
    if base == 0.0:
        return np.zeros(p), V
    target = _JACOBI_OFF_TOL * base
    rotate_floor = target / (p * p)
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = math.sqrt(2.0 * float(np.sum(np.triu(A, 1) ** 2)))
        if off <= target:
            return np.diag(A).copy(), V
        for i in range(p - 1):
            for j in range(i + 1, p):
                aij = A[i, j]
                if abs(aij) <= rotate_floor:
                    continue
                theta = (A[j, j] - A[i, i]) / (2.0 * aij)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rowi = A[i, :].copy()
                rowj = A[j, :].copy()
                A[i, :] = c * rowi - s * rowj
                A[j, :] = s * rowi + c * rowj
                coli = A[:, i].copy()
                colj = A[:, j].copy()
                A[:, i] = c * coli - s * colj
                A[:, j] = s * coli + c * colj
                A[i, j] = A[j, i] = 0.0
                vi = V[:, i].copy()
                vj = V[:, j].copy()
                V[:, i] = c * vi - s * vj
                V[:, j] = s * vi + c * vj
    off = math.sqrt(2.0 * float(np.sum(np.triu(A, 1) ** 2)))
    if off <= target:
        return np.diag(A).copy(), V
    raise NumericError(
        f"Jacobi iteration did not converge in {_JACOBI_MAX_SWEEPS} sweeps "
        f"(off-diagonal mass {off:.3e}, target {target:.3e})"
    )


def jacobi_eigh(M) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvector columns."""
    M = as_symmat(M)
    lam, V = _jacobi(M.full())
    order = np.argsort(-lam, kind="stable")
    return lam[order], V[:, order]


def default_tol_zero(lam: np.ndarray) -> float:
    """Relative zero-eigenvalue threshold: 1e-8 * max(1, spectral radius)."""
    scale = float(np.max(np.abs(lam))) if lam.size else 0.0
    return 1e-8 * max(1.0, scale)


@dataclass(frozen=True)
class SpectralDecomp:
    """Eigendecomposition of a SymMat with the sign partition of its spectrum.

    P columns are eigenvectors ordered by descending eigenvalue, so the
    alpha (positive), beta (|eigenvalue| <= tol_zero), gamma (negative)
    index blocks are contiguous in that order.
    """

    source: SymMat
    P: np.ndarray
    lam: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    tol_zero: float
    sigma: np.ndarray

    @property
    def p(self) -> int:
        return self.source.p

    def rotate(self, H) -> np.ndarray:
        """Compress a direction into the eigenbasis: P^T H P."""
        return self.P.T @ as_symmat(H).full() @ self.P


def _sigma_from_lam(lam: np.ndarray) -> np.ndarray:
    lp = np.maximum(lam, 0.0)
    num = lp[:, None] - lp[None, :]
    den = lam[:, None] - lam[None, :]
    sig = np.ones_like(den)
    mask = den != 0.0
    sig[mask] = num[mask] / den[mask]
    return sig


def spectral_decompose(M, tol_zero: float | None = None) -> SpectralDecomp:
    """Decompose M = P Diag(lam) P^T with descending lam and sign partition."""
    M = as_symmat(M)
    lam, P = jacobi_eigh(M)
    if tol_zero is None:
        tol_zero = default_tol_zero(lam)
    if tol_zero < 0.0:
        raise InputDataError("tol_zero must be nonnegative")
    ka = int(np.sum(lam > tol_zero))
    kg = int(np.sum(lam < -tol_zero))
    p = M.p
    alpha = np.arange(0, ka)
    beta = np.arange(ka, p - kg)
    gamma = np.arange(p - kg, p)
    sigma = _sigma_from_lam(lam)
    for arr in (P, lam, alpha, beta, gamma, sigma):
        arr.flags.writeable = False
    return SpectralDecomp(M, P, lam, alpha, beta, gamma, float(tol_zero), sigma)


def sigma_matrix(d: SpectralDecomp) -> np.ndarray:
    """Divided-difference matrix of eigenvalue clamps, 0/0 taken as 1."""
    return d.sigma


def project_psd(M) -> SymMat:
    """Metric projection onto the PSD cone (eigenvalue clamping)."""
    M = as_symmat(M)
    lam, P = jacobi_eigh(M)
    return SymMat((P * np.maximum(lam, 0.0)) @ P.T)


def moreau_split(M, tol_zero: float | None = None):
    """Complementary split M = X + Y with X = project_psd(M), Y NSD.

    Returns (X, Y, decomp) sharing one decomposition of M.
    """
    d = spectral_decompose(M, tol_zero)
    X = SymMat((d.P * np.maximum(d.lam, 0.0)) @ d.P.T)
    Y = SymMat((d.P * np.minimum(d.lam, 0.0)) @ d.P.T)
    return X, Y, d


def dir_deriv_from_decomp(d: SpectralDecomp, H) -> SymMat:
    """Directional derivative of project_psd at d.source along H."""
    H = as_symmat(H)
    if H.p != d.p:
        raise InputDataError(f"direction order {H.p} does not match matrix order {d.p}")
    Ht = d.rotate(H)
    ka, kb = d.alpha.size, d.beta.size
    p = d.p
    sa = slice(0, ka)
    sb = slice(ka, ka + kb)
    sg = slice(ka + kb, p)
    R = np.zeros((p, p))
    R[sa, sa] = Ht[sa, sa]
    R[sa, sb] = Ht[sa, sb]
    R[sb, sa] = Ht[sb, sa]
    if ka and p - ka - kb:
        S = d.sigma[sa, sg]
        R[sa, sg] = S * Ht[sa, sg]
        R[sg, sa] = R[sa, sg].T
    if kb:
        lam_b, V_b = _jacobi(np.ascontiguousarray(Ht[sb, sb]))
        R[sb, sb] = (V_b * np.maximum(lam_b, 0.0)) @ V_b.T
    return SymMat(d.P @ R @ d.P.T)


def dir_deriv_projection(A, H, tol_zero: float | None = None) -> SymMat:
    """Directional derivative of the PSD projection at A along H.

    Blockwise in the eigenbasis of A: the alpha rows pass through (with
    the Sigma weights on the alpha x gamma block), the beta block is
    projected onto its small PSD cone, and the gamma rows vanish.
    Positively homogeneous of degree 1 in H.
    """
    A = as_symmat(A)
    H = as_symmat(H)
    if A.p != H.p:
        raise InputDataError(f"matrix orders differ: {A.p} vs {H.p}")
    return dir_deriv_from_decomp(spectral_decompose(A, tol_zero), H)


def pseudoinverse(M, tol_zero: float | None = None) -> SymMat:
    """Spectral pseudoinverse: reciprocal of eigenvalues above tol_zero."""
    M = as_symmat(M)
    lam, P = jacobi_eigh(M)
    if tol_zero is None:
        tol_zero = default_tol_zero(lam)
    inv = np.where(np.abs(lam) > tol_zero, 1.0 / np.where(lam == 0.0, 1.0, lam), 0.0)
    return SymMat((P * inv) @ P.T)
