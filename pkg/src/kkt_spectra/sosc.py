"""Second-order analysis at a KKT pair: curvature term, sufficient and
necessary conditions over the critical cone, the directional-derivative
equivalence check, and the closedness/orthogonality conditions used by
the multiplier error bound."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cones import (
    ConeContext,
    cone_context,
    cone_context_from_matrix,
    critical_cone_psd_membership,
    project_critical_cone_polar,
)
from .errors import InputDataError
from .lpkernel import null_space
from .problem import (
    ProblemData,
    eval_G,
    eval_G_jacobian,
    jacobian_apply,
    kkt_point,
    lagrangian_hessian,
    multiplier_set_residual,
)
from .symmat import SymMat, _jacobi, as_symmat, dir_deriv_from_decomp, sym_mat, sym_vec

TOL_POS = 1e-8

SOSCY_HOLDS = "SOSCy_holds"
SOSCY_FAILS = "SOSCy_fails"
UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class SecondOrderReport:
    min_value: float
    minimizer: Optional[np.ndarray]
    verdict: str
    sonc_verdict: str
    search_stats: dict


def sigma_term(ctx: ConeContext, H, tol: float = 1e-7) -> float:
    """Curvature correction 2<Y, H X^+ H> for H in the critical cone.

    In the eigenbasis of X + Y the value is a weighted sum of squared
    alpha-gamma couplings, so it is always nonpositive.
    """
    H = as_symmat(H)
    mem = critical_cone_psd_membership(ctx, H, tol)
    if not mem.member:
        raise InputDataError(
            f"direction lies outside the critical cone (violation {mem.violation:.3e})"
        )
    d = ctx.decomp
    Ht = d.rotate(H)
    total = 0.0
    for j in d.gamma:
        acc = 0.0
        for i in d.alpha:
            acc += Ht[j, i] ** 2 / d.lam[i]
        total += d.lam[j] * acc
    return 2.0 * total


def critical_cone_x_membership(pd: ProblemData, xbar, ybar, d) -> dict:
    """Check G'(xbar) d against the matrix critical cone at (G(xbar), ybar)."""
    ctx = cone_context(eval_G(pd, xbar), ybar, tol=1e-6)
    H = jacobian_apply(pd, xbar, d)
    mem = critical_cone_psd_membership(ctx, H)
    return {"member": mem.member, "violation": mem.violation}


def _sigma_quadratic(ctx: ConeContext, Ds) -> np.ndarray:
    """Matrix S with d^T S d = sigma_term(G'(x)d), no membership gate."""
    d = ctx.decomp
    n = len(Ds)
    Dt = [d.rotate(Dk) for Dk in Ds]
    S = np.zeros((n, n))
    for j in d.gamma:
        for i in d.alpha:
            v = np.array([Dt[k][j, i] for k in range(n)])
            S += (2.0 * d.lam[j] / d.lam[i]) * np.outer(v, v)
    return S


def evaluate_second_order_form(pd: ProblemData, xbar, ybar, d) -> float:
    """q(d) = <d, hessL d> - sigma_term along G'(xbar)d."""
    d = np.asarray(d, dtype=float)
    ctx = cone_context(eval_G(pd, xbar), ybar, tol=1e-6)
    hessL = lagrangian_hessian(pd, xbar, ybar)
    H = jacobian_apply(pd, xbar, d)
    return float(d @ hessL @ d) - sigma_term(ctx, H)


def _sphere_sequence(count: int, dim: int, offset: int = 0) -> np.ndarray:
    """Deterministic low-discrepancy points on the unit sphere.

    Kronecker lattice in [0,1)^dim driven through a Box-Muller map; the
    resulting directions are equidistributed without any RNG state.
    """
    primes = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43]
    k = 2 * ((dim + 1) // 2)
    alphas = np.sqrt(primes[: k])
    pts = np.zeros((count, dim))
    for i in range(count):
        u = np.modf((offset + i + 1) * alphas)[0]
        u = np.where(u <= 1e-12, 0.5, u)
        g = np.zeros(k)
        for j in range(0, k, 2):
            r = math.sqrt(-2.0 * math.log(u[j]))
            g[j] = r * math.cos(2.0 * math.pi * u[j + 1])
            g[j + 1] = r * math.sin(2.0 * math.pi * u[j + 1])
        v = g[:dim]
        nv = np.linalg.norm(v)
        pts[i] = v / nv if nv > 0 else np.eye(dim)[0]
    return pts


def _beta_block_map(ctx: ConeContext, Ds, Z: np.ndarray):
    """Per-column beta blocks of the pushed-forward direction map."""
    d = ctx.decomp
    beta = d.beta
    blocks = []
    for c in range(Z.shape[1]):
        M = sum(Z[k, c] * d.rotate(Ds[k]) for k in range(len(Ds)))
        blocks.append(M[np.ix_(beta, beta)])
    return blocks


def check_soscy(pd: ProblemData, xbar, ybar, options: Optional[dict] = None) -> SecondOrderReport:
    """Minimize the second-order form over the unit sphere in C(xbar).

    Exact when the cone is a subspace (empty or inactive beta block) or a
    halfspace section (singleton beta block, settled by evenness of the
    form). Otherwise multistart projected gradient with an exterior
    penalty; only endpoints that certify exact cone membership count, so
    a failure verdict always carries a certified direction.
    """
    opts = {"starts": 64, "iters": 500, "step": 0.1, "seed": 42}
    if options:
        opts.update(options)
    kkt = kkt_point(pd, xbar, ybar)
    if not kkt.certified:
        raise InputDataError(f"KKT residuals {kkt.residuals} exceed certification tolerance")
    ctx = cone_context(eval_G(pd, xbar), ybar, tol=1e-6)
    d = ctx.decomp
    n = pd.n
    Ds = eval_G_jacobian(pd, xbar)
    Dt = [d.rotate(Dk) for Dk in Ds]
    hessL = lagrangian_hessian(pd, xbar, ybar)
    Q = hessL - _sigma_quadratic(ctx, Ds)
    Q = 0.5 * (Q + Q.T)

    tail = np.concatenate([d.beta, d.gamma])
    eq_rows = []
    for i in d.gamma:
        for j in tail:
            if j <= i:
                eq_rows.append(np.array([Dt[k][i, j] for k in range(n)]))
    Z = null_space(np.stack(eq_rows)) if eq_rows else np.eye(n)
    stats = {"starts": 0, "certified": 0, "best_uncertified": None}

    if Z.shape[1] == 0:
        stats["path"] = "trivial cone"
        return SecondOrderReport(math.inf, None, SOSCY_HOLDS, "holds", stats)

    Qh = Z.T @ Q @ Z
    Qh = 0.5 * (Qh + Qh.T)
    blocks = _beta_block_map(ctx, Ds, Z) if d.beta.size else []
    block_scale = max((np.abs(B).max() for B in blocks), default=0.0)

    def beta_block(c):
        M = np.zeros((d.beta.size, d.beta.size))
        for k, B in enumerate(blocks):
            M += c[k] * B
        return M

    exact_subspace = d.beta.size == 0 or block_scale <= 1e-12
    if exact_subspace or d.beta.size == 1:
        lam, V = _jacobi(Qh.copy())
        lo = int(np.argmin(lam))
        min_value = float(lam[lo])
        c = V[:, lo]
        if not exact_subspace:
            # singleton block: the form is even, so the halfspace section
            # attains the same minimum; flip the sign to land inside
            if beta_block(c)[0, 0] < 0.0:
                c = -c
        minimizer = Z @ c
        stats["path"] = "exact subspace" if exact_subspace else "exact halfspace"
        stats["certified"] = 1
        verdict = SOSCY_HOLDS if min_value > TOL_POS else SOSCY_FAILS
        sonc = "holds" if min_value >= -TOL_POS else "fails"
        return SecondOrderReport(min_value, minimizer, verdict, sonc, stats)

    # beta block of size >= 2: multistart projected gradient with an
    # exterior penalty on the smallest block eigenvalue
    m = Z.shape[1]
    mu = 1e3 * max(1.0, float(np.abs(Qh).max())) / max(block_scale, 1e-12) ** 2
    starts = list(_sphere_sequence(int(opts["starts"]), m, offset=0))
    lam0, V0 = _jacobi(Qh.copy())
    for idx in range(m):
        starts.append(V0[:, idx])
        starts.append(-V0[:, idx])

    def penalty_and_grad(c):
        M = beta_block(c)
        lam, V = _jacobi(M.copy())
        neg = np.minimum(lam, 0.0)
        pen = float(np.sum(neg**2))
        g = np.zeros(m)
        for i, nv in enumerate(neg):
            if nv < 0.0:
                vi = V[:, i]
                for k, B in enumerate(blocks):
                    g[k] += 2.0 * nv * float(vi @ B @ vi)
        return pen, g

    def merit(c):
        pen, _ = penalty_and_grad(c)
        return float(c @ Qh @ c) + mu * pen

    def restore(c, iters=50):
        # descend the penalty alone until the block is PSD to 1e-11
        for _ in range(iters):
            pen, gp = penalty_and_grad(c)
            if pen <= 1e-22:
                break
            g = gp - float(gp @ c) * c
            gn = float(np.linalg.norm(g))
            if gn <= 1e-14:
                break
            step = min(1.0, 4.0 * pen / gn**2)
            moved = False
            for _ in range(15):
                cn = c - step * g
                cn /= np.linalg.norm(cn)
                pn, _ = penalty_and_grad(cn)
                if pn <= 1e-22 or pn < pen * (1.0 - 1e-3):
                    c = cn
                    moved = True
                    break
                step *= 0.5
            if not moved:
                break
        return c

    def slide(c):
        # feasible-direction descent: step on the form, restore, accept on decrease
        c = restore(c)
        pen, _ = penalty_and_grad(c)
        if pen > 1e-22:
            return c
        val = float(c @ Qh @ c)
        step = float(opts["step"])
        for _ in range(100):
            g = 2.0 * (Qh @ c)
            g = g - float(g @ c) * c
            if float(np.linalg.norm(g)) <= 1e-12:
                break
            moved = False
            s = step
            for _ in range(12):
                cn = c - s * g
                cn /= np.linalg.norm(cn)
                cn = restore(cn)
                pn, _ = penalty_and_grad(cn)
                vn = float(cn @ Qh @ cn)
                if pn <= 1e-22 and vn < val - 1e-14:
                    c, val = cn, vn
                    step = min(2.0 * s, 1.0)
                    moved = True
                    break
                s *= 0.5
            if not moved:
                break
        return c

    cands = []
    for c0 in starts:
        c = c0.copy()
        f = merit(c)
        for _ in range(int(opts["iters"])):
            pen, gp = penalty_and_grad(c)
            grad = 2.0 * (Qh @ c) + mu * gp
            grad = grad - float(grad @ c) * c  # tangent component on the sphere
            gn = float(np.linalg.norm(grad))
            if gn <= 1e-12:
                break
            step = float(opts["step"])
            moved = False
            for _ in range(20):
                cn = c - step * grad
                cn /= np.linalg.norm(cn)
                fn = merit(cn)
                if fn < f - 1e-12:
                    c, f = cn, fn
                    moved = True
                    break
                step *= 0.5
            if not moved:
                break
        cands.append(slide(c))
    stats["starts"] = len(starts)

    best_cert = None
    best_cert_val = math.inf
    best_uncert = math.inf
    for c in cands:
        M = beta_block(c)
        lam, _ = _jacobi(M.copy())
        viol = max(0.0, -float(lam.min()))
        val = float(c @ Qh @ c)
        if viol <= 1e-9:
            stats["certified"] += 1
            if val < best_cert_val:
                best_cert_val = val
                best_cert = c
        elif viol <= 1e-5:
            best_uncert = min(best_uncert, val)
    stats["best_uncertified"] = None if best_uncert is math.inf else best_uncert
    stats["path"] = "projected gradient"

    if best_cert is None:
        return SecondOrderReport(math.nan, None, UNDETERMINED, "holds", stats)
    minimizer = Z @ best_cert
    sonc = "holds" if best_cert_val >= -TOL_POS else "fails"
    if best_cert_val > TOL_POS:
        if best_uncert < -TOL_POS:
            return SecondOrderReport(best_cert_val, minimizer, UNDETERMINED, sonc, stats)
        return SecondOrderReport(best_cert_val, minimizer, SOSCY_HOLDS, sonc, stats)
    return SecondOrderReport(best_cert_val, minimizer, SOSCY_FAILS, sonc, stats)


def lemma4_check(C, dA, dB, tol: float = 1e-7) -> dict:
    """Equivalence of the projection-derivative equation with its three
    blockwise characterizing conditions at the split of C."""
    C = as_symmat(C)
    dA = as_symmat(dA)
    dB = as_symmat(dB)
    ctx = cone_context_from_matrix(C)
    d = ctx.decomp
    scale = max(1.0, dA.norm(), dB.norm())

    lhs_res = (dA - dir_deriv_from_decomp(d, dA + dB)).norm()
    lhs = bool(lhs_res <= tol * scale)

    mem = critical_cone_psd_membership(ctx, dA, tol * scale)
    rhs = mem.member
    if rhs:
        # displacement that absorbs the alpha-gamma coupling of dA
        At = d.rotate(dA)
        Ut = np.zeros((d.p, d.p))
        for i in d.alpha:
            for j in d.gamma:
                Ut[i, j] = Ut[j, i] = -(d.lam[j] / d.lam[i]) * At[i, j]
        U = SymMat(d.P @ Ut @ d.P.T)
        W = dB - U
        Wt = d.rotate(W)
        sa = d.alpha
        sb = d.beta
        viol = 0.0
        if sa.size:
            viol = max(viol, float(np.linalg.norm(Wt[np.ix_(sa, sa)])))
            if sb.size:
                viol = max(viol, float(np.linalg.norm(Wt[np.ix_(sa, sb)])))
        if sb.size:
            lam_b, _ = _jacobi(np.ascontiguousarray(Wt[np.ix_(sb, sb)]))
            viol = max(viol, max(0.0, float(lam_b.max())))
        rhs = viol <= tol * scale
        if rhs:
            st = 0.0
            for j in d.gamma:
                for i in d.alpha:
                    st += d.lam[j] * At[j, i] ** 2 / d.lam[i]
            rhs = abs(dA.inner(dB) + 2.0 * st) <= tol * scale
    return {"lhs": lhs, "rhs": bool(rhs)}


def theorem3_conditions(pd: ProblemData, xbar, ybar, options: Optional[dict] = None) -> dict:
    """Closedness of the adjoint image of K and the orthogonality of
    projected pairs, with exact special cases and sampled evidence."""
    opts = {"samples": 64, "seed": 42}
    if options:
        opts.update(options)
    kkt = kkt_point(pd, xbar, ybar)
    if not kkt.certified:
        raise InputDataError(f"KKT residuals {kkt.residuals} exceed certification tolerance")
    ctx = cone_context(eval_G(pd, xbar), ybar, tol=1e-6)
    d = ctx.decomp
    n = pd.n
    p = pd.p
    Ds = eval_G_jacobian(pd, xbar)
    Dt = [d.rotate(Dk) for Dk in Ds]
    jac_scale = max((Dk.max_abs() for Dk in Ds), default=0.0)

    nsv = p * (p + 1) // 2
    A = np.stack([sym_vec(Dk) for Dk in Ds]) if n else np.zeros((0, nsv))

    cond_i: dict
    if d.alpha.size == p:
        cond_i = {"verdict": "holds", "evidence": "polar cone trivial (strict interior point)"}
    elif jac_scale <= 1e-14:
        cond_i = {"verdict": "holds", "evidence": "zero Jacobian: adjoint image is {0}"}
    elif d.beta.size <= 1:
        cond_i = {"verdict": "holds", "evidence": "polyhedral polar cone (beta block <= 1)"}
    elif np.linalg.matrix_rank(A, tol=1e-11) == nsv:
        cond_i = {"verdict": "holds", "evidence": "injective adjoint on symmetric matrices"}
    else:
        rng = np.random.default_rng(int(opts["seed"]))
        imgs = []
        for _ in range(int(opts["samples"])):
            Wt = rng.standard_normal((p, p))
            Wt = 0.5 * (Wt + Wt.T)
            for i in d.alpha:
                Wt[i, list(d.alpha) + list(d.beta)] = 0.0
                Wt[list(d.alpha) + list(d.beta), i] = 0.0
            if d.beta.size:
                bb = Wt[np.ix_(d.beta, d.beta)]
                lam, V = _jacobi(bb.copy())
                Wt[np.ix_(d.beta, d.beta)] = (V * np.minimum(lam, 0.0)) @ V.T
            W = SymMat(d.P @ Wt @ d.P.T)
            imgs.append(np.array([Dk.inner(W) for Dk in Ds]))
        rank = int(np.linalg.matrix_rank(np.stack(imgs), tol=1e-9)) if imgs else 0
        cond_i = {
            "verdict": "Undetermined",
            "evidence": f"sampled adjoint image of the polar cone spans rank {rank} of {n}",
        }

    # cond_ii: sample primal directions in C(xbar), solve the adjoint
    # equation for a multiplier direction, test projected orthogonality
    tail = np.concatenate([d.beta, d.gamma])
    eq_rows = []
    for i in d.gamma:
        for j in tail:
            if j <= i:
                eq_rows.append(np.array([Dt[k][i, j] for k in range(n)]))
    Z = null_space(np.stack(eq_rows)) if eq_rows else np.eye(n)
    hessL = lagrangian_hessian(pd, xbar, ybar)
    rng = np.random.default_rng(int(opts["seed"]) + 1)
    accepted = 0
    rejected = 0
    max_violation = 0.0
    for _ in range(int(opts["samples"])):
        if Z.shape[1] == 0:
            rejected += 1
            continue
        xi = Z @ rng.standard_normal(Z.shape[1])
        nx = float(np.linalg.norm(xi))
        if nx <= 1e-12:
            rejected += 1
            continue
        xi /= nx
        H = jacobian_apply(pd, xbar, xi)
        if not critical_cone_psd_membership(ctx, H).member:
            if critical_cone_psd_membership(ctx, -H).member:
                xi, H = -xi, -H
            else:
                rejected += 1
                continue
        rhs = -(hessL @ xi)
        if A.size:
            eta_v, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            if np.linalg.norm(A @ eta_v - rhs) > 1e-9 * max(1.0, float(np.linalg.norm(rhs))):
                rejected += 1
                continue
            eta = sym_mat(eta_v, p)
        else:
            if np.linalg.norm(rhs) > 1e-12:
                rejected += 1
                continue
            eta = SymMat.zeros(p)
        pk_h = project_critical_cone_polar(ctx, H)
        pk_e = project_critical_cone_polar(ctx, eta)
        max_violation = max(max_violation, abs(pk_h.inner(pk_e)))
        accepted += 1
    total = accepted + rejected
    cond_ii = {
        "verdict": "holds" if max_violation <= 1e-7 else "fails",
        "max_violation": max_violation,
        "accepted": accepted,
        "rejection_rate": (rejected / total) if total else 0.0,
    }
    return {"cond_i": cond_i, "cond_ii": cond_ii}


def multiplier_distance_estimate(pd: ProblemData, xbar, samples) -> list:
    """Ratio table dist(y, multiplier set) / perturbation size.

    Each sample is a (Y, p1, p2) triple; the distance surrogate adds the
    stationarity-correction norm and the normal-cone projection gap. A
    zero perturbation with an exact multiplier reports ratio 0.
    """
    table = []
    for Y, p1, p2 in samples:
        d1, d2 = multiplier_set_residual(pd, xbar, Y)
        dist = d1 + d2
        denom = float(np.linalg.norm(np.asarray(p1, dtype=float))) + as_symmat(p2).norm()
        if denom == 0.0:
            ratio = 0.0 if dist <= 1e-12 else math.inf
        else:
            ratio = dist / denom
        table.append({"p_norm": denom, "distance": dist, "ratio": ratio})
    return table
