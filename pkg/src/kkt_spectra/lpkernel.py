"""Shared feasibility kernels for homogeneous cone systems.

Three deciders live here. A dense phase-1 simplex with Bland's rule
settles linear feasibility. On top of it, nontrivial_xi_solution decides
whether a homogeneous system of equalities and inequalities admits a
solution whose designated leading block is nonzero. For semidefinite
blocks, subspace_psd_nontrivial decides whether a linear subspace of
symmetric matrices meets the PSD cone nontrivially, and
cone_kernel_nontrivial lifts that to kernels with one signed block.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import NumericError
from .symmat import _jacobi, sym_mat, sym_vec

FEAS_TOL = 1e-9


def null_space(A, rtol: float = 1e-11) -> np.ndarray:
    """Orthonormal basis (columns) of the null space of A."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    if n == 0:
        return np.zeros((0, 0))
    if m == 0 or not np.any(A):
        return np.eye(n)
    _, s, vt = np.linalg.svd(A)
    r = int(np.sum(s > rtol * s[0]))
    return vt[r:].T.copy()


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]


def _phase1(A: np.ndarray, b: np.ndarray, tol: float = FEAS_TOL):
    """Minimize the artificial-variable sum of {x >= 0 : Ax = b}.

    Returns (x, infeasibility). Bland's rule throughout, so no cycling;
    the iteration cap only guards against numerical stalls.
    """
    A = np.asarray(A, dtype=float).copy()
    b = np.asarray(b, dtype=float).copy()
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = list(range(n, n + m))
    max_iter = 200 * (m + n + 10)
    for _ in range(max_iter):
        obj = T[m, : n + m]
        enter = -1
        for j in range(n + m):
            if obj[j] < -tol:
                enter = j
                break
        if enter < 0:
            break
        col = T[:m, enter]
        pos = col > tol
        if not np.any(pos):
            raise NumericError("phase-1 simplex: unbounded pivot column")
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / col[pos]
        rmin = ratios.min()
        ties = [i for i in range(m) if ratios[i] <= rmin + 1e-12 * (1.0 + rmin)]
        leave = min(ties, key=lambda i: basis[i])
        _pivot(T, leave, enter)
        basis[leave] = enter
    else:
        raise NumericError("phase-1 simplex: iteration limit reached")
    x = np.zeros(n + m)
    for i, bi in enumerate(basis):
        x[bi] = T[i, -1]
    return x[:n], max(-T[m, -1], 0.0)


def linear_feasible(A_eq, b_eq, A_ge=None, b_ge=None, tol: float = FEAS_TOL):
    """Find free x with A_eq x = b_eq and A_ge x >= b_ge.

    Returns (x or None, infeasibility measure). Free variables are split
    into positive parts and inequality rows get slack columns before the
    phase-1 call; rows are normalized so the tolerance is meaningful.
    """
    A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float)) if A_eq is not None else None
    blocks = []
    rhs = []
    n = None
    if A_eq is not None and A_eq.shape[0]:
        n = A_eq.shape[1]
        blocks.append(A_eq)
        rhs.append(np.asarray(b_eq, dtype=float).reshape(-1))
    if A_ge is not None:
        A_ge = np.atleast_2d(np.asarray(A_ge, dtype=float))
        if A_ge.shape[0]:
            n = A_ge.shape[1] if n is None else n
            blocks.append(A_ge)
            rhs.append(np.asarray(b_ge, dtype=float).reshape(-1))
    if n is None:
        raise NumericError("linear_feasible: no constraints given")
    k_ge = blocks[-1].shape[0] if A_ge is not None and blocks[-1] is A_ge else 0
    M = np.vstack(blocks)
    v = np.concatenate(rhs)
    m = M.shape[0]
    # columns: u (n), w (n), slacks (k_ge); x = u - w
    S = np.zeros((m, 2 * n + k_ge))
    S[:, :n] = M
    S[:, n : 2 * n] = -M
    if k_ge:
        S[m - k_ge :, 2 * n :] = -np.eye(k_ge)
    scale = np.maximum(1.0, np.maximum(np.abs(S).max(axis=1), np.abs(v)))
    S /= scale[:, None]
    v = v / scale
    sol, infeas = _phase1(S, v, tol)
    if infeas > tol:
        return None, infeas
    return sol[:n] - sol[n : 2 * n], infeas


def nontrivial_xi_solution(eq_rows, dim: int, xi_dim: int, ineq_rows=()):
    """Solve a homogeneous system asking for a nonzero leading block.

    Seeks z with eq_rows z = 0, a z >= 0 for every inequality row a, and
    z[:xi_dim] != 0; returns (z or None, merit). The merit is 0 when a
    witness exists and otherwise the smallest phase-1 infeasibility seen.

    With at most one inequality the decision is exact by symmetry: the
    null space is computed, the leading-block projection is maximized by
    an SVD, and a sign flip fixes the single inequality. With two or more
    inequalities each leading coordinate is pinned to 1 in turn (both
    signs) and the resulting LP decides, which is exhaustive because any
    solution has some nonzero coordinate that scaling normalizes.
    """
    eq = np.atleast_2d(np.asarray(eq_rows, dtype=float)) if len(np.atleast_1d(eq_rows)) else np.zeros((0, dim))
    if eq.size == 0:
        eq = np.zeros((0, dim))
    Z = null_space(eq)
    if Z.shape[1] == 0:
        return None, np.inf
    Zxi = Z[:xi_dim]
    if np.abs(Zxi).max() <= 1e-12:
        return None, np.inf
    ineq_rows = [np.asarray(a, dtype=float) for a in ineq_rows]
    if len(ineq_rows) <= 1:
        _, _, vt = np.linalg.svd(Zxi)
        c = vt[0]
        if ineq_rows and ineq_rows[0] @ (Z @ c) < 0:
            c = -c
        z = Z @ c
        return z, 0.0
    A_ge = np.stack([a @ Z for a in ineq_rows])
    best = np.inf
    order = np.argsort(-np.linalg.norm(Zxi, axis=1))
    for i in order:
        if np.linalg.norm(Zxi[i]) <= 1e-12:
            continue
        for s in (1.0, -1.0):
            rows = np.vstack([A_ge, s * Zxi[i]])
            rhs = np.zeros(rows.shape[0])
            rhs[-1] = 1.0
            c, infeas = linear_feasible(None, None, rows, rhs)
            best = min(best, infeas)
            if c is None:
                continue
            z = Z @ c
            viol = min((a @ z for a in ineq_rows), default=0.0)
            if viol < -FEAS_TOL * max(1.0, float(np.linalg.norm(z))):
                continue
            if np.linalg.norm(z[:xi_dim]) <= 1e-9 * max(1.0, float(np.linalg.norm(z))):
                continue
            return z, 0.0
    return None, best


def project_simplex(w: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = 1}."""
    w = np.asarray(w, dtype=float)
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, w.size + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    theta = css[rho - 1] / rho
    return np.maximum(w - theta, 0.0)


def _project_spectahedron(S: np.ndarray) -> np.ndarray:
    lam, V = _jacobi(0.5 * (S + S.T))
    w = project_simplex(lam)
    return (V * w) @ V.T


def subspace_psd_nontrivial(constraint_rows, q: int, max_iter: int = 1500) -> Optional[np.ndarray]:
    """Find a nonzero PSD matrix in a subspace of S^q, or certify none.

    The subspace is {W : <R_k, W> = 0} for the given rows (isometric svec
    coordinates). Exact duality drives the trivial certificate: the
    subspace meets the PSD cone only at 0 iff its orthogonal complement
    contains a positive definite matrix, because the trace-one spectahedron
    slice is compact and strictly separable from the subspace. The search
    runs a diagonal fast path, a least-squares-plus-supergradient dual
    ascent, and an accelerated projected-gradient primal pass; if none of
    them produces a verdict the call raises rather than guess.
    """
    if q == 0:
        return None
    nfull = q * (q + 1) // 2
    rows = np.atleast_2d(np.asarray(constraint_rows, dtype=float)) if np.size(constraint_rows) else np.zeros((0, nfull))
    if rows.size == 0:
        rows = np.zeros((0, nfull))
    U, s, _ = np.linalg.svd(rows.T, full_matrices=False) if rows.shape[0] else (np.zeros((nfull, 0)), np.zeros(0), None)
    r = int(np.sum(s > 1e-11 * s[0])) if s.size else 0
    if r == 0:
        return np.eye(q) / np.sqrt(q)
    if r == nfull:
        return None
    basis = U[:, :r]  # orthonormal basis of the complement (row space)
    N = null_space(rows)

    # diagonal fast path: if every null-space matrix is diagonal the PSD
    # condition is componentwise and an LP sweep is exact
    mats = [sym_mat(N[:, j], q).full() for j in range(N.shape[1])]
    if all(np.abs(M - np.diag(np.diag(M))).max() <= 1e-12 * max(1.0, np.abs(M).max()) for M in mats):
        D = np.stack([np.diag(M) for M in mats]).T  # q x dimV
        for j in range(q):
            rows_ge = np.vstack([D, D[j]])
            rhs = np.zeros(q + 1)
            rhs[-1] = 1.0
            c, _ = linear_feasible(None, None, rows_ge, rhs)
            if c is not None:
                W = np.diag(D @ c)
                return W / np.linalg.norm(W)
        return None

    # dual certificate: least-squares fit of the identity, then ascent
    t = basis.T @ sym_vec(np.eye(q))
    best_margin = -np.inf
    if np.linalg.norm(t) > 0:
        t = t / np.linalg.norm(t)
    else:
        t = np.zeros(r)
        t[0] = 1.0
    for it in range(400):
        M = sym_mat(basis @ t, q).full()
        lam, V = _jacobi(M)
        lo = int(np.argmin(lam))
        best_margin = max(best_margin, lam[lo])
        if lam[lo] >= 1e-7:
            return None
        v = V[:, lo]
        g = basis.T @ sym_vec(np.outer(v, v))
        t = t + (0.3 / np.sqrt(it + 1.0)) * g
        nt = np.linalg.norm(t)
        if nt > 0:
            t /= nt

    # primal pass: minimize the distance to the subspace over the
    # trace-one spectahedron (convex, optimum zero iff nontrivial point)
    W = np.eye(q) / q
    Wp = W.copy()
    tk = 1.0
    dist = np.inf
    for _ in range(max_iter):
        coef = basis.T @ sym_vec(W)
        dist = float(np.linalg.norm(coef))
        if dist <= 1e-10:
            break
        grad = sym_mat(basis @ coef, q).full()
        Wn = _project_spectahedron(W - grad)
        tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        W = Wn + ((tk - 1.0) / tn) * (Wn - Wp)
        Wp = Wn
        tk = tn
    coef = basis.T @ sym_vec(Wp)
    dist = float(np.linalg.norm(coef))
    if dist <= 1e-7:
        Wstar = Wp - sym_mat(basis @ coef, q).full()
        lam, _ = _jacobi(0.5 * (Wstar + Wstar.T))
        if lam.min() >= -1e-8 and np.linalg.norm(Wstar) >= 1e-6:
            return Wstar / np.linalg.norm(Wstar)
    if best_margin >= 1e-9:
        return None
    raise NumericError(
        "subspace PSD feasibility undecided: "
        f"q={q}, dual margin={best_margin:.3e}, primal distance={dist:.3e}"
    )


def cone_kernel_nontrivial(eq_rows, dim: int, block_rows, q: int, sign: float = 1.0) -> Optional[np.ndarray]:
    """Find v != 0 with eq_rows v = 0 and sign * mat(block_rows v) PSD.

    block_rows maps v to the svec of a symmetric q-block. Returns a
    witness v or None when only v = 0 qualifies. The kernel of the block
    map inside the equality null space settles the easy case (block zero
    is PSD); otherwise the block map is injective there and the decision
    reduces to subspace_psd_nontrivial on its image.
    """
    eq = np.atleast_2d(np.asarray(eq_rows, dtype=float)) if np.size(eq_rows) else np.zeros((0, dim))
    if eq.size == 0:
        eq = np.zeros((0, dim))
    Z = null_space(eq)
    if Z.shape[1] == 0:
        return None
    if q == 0 or block_rows is None:
        return Z[:, 0]
    B = (float(sign) * np.atleast_2d(np.asarray(block_rows, dtype=float))) @ Z
    K = null_space(B)
    if K.shape[1] > 0:
        return Z @ K[:, 0]
    U, s, _ = np.linalg.svd(B, full_matrices=True)
    r = int(np.sum(s > 1e-11 * s[0]))
    comp = U[:, r:].T
    W = subspace_psd_nontrivial(comp, q)
    if W is None:
        return None
    c, *_ = np.linalg.lstsq(B, sym_vec(W), rcond=None)
    if np.linalg.norm(B @ c - sym_vec(W)) > 1e-7:
        raise NumericError("cone kernel: PSD witness fell outside the block image")
    v = Z @ c
    return v / np.linalg.norm(v)
