"""Shared fixtures and generators for the test suite."""

import numpy as np
import pytest

from kkt_spectra.cones import cone_context_from_matrix
from kkt_spectra.problem import builtin_family, eval_G_jacobian, make_problem
from kkt_spectra.symmat import SymMat


@pytest.fixture(scope="session")
def fam2():
    return builtin_family("example2")


@pytest.fixture(scope="session")
def fam3():
    return builtin_family("example3")


def random_symmetric(rng, p, scale=1.0):
    M = rng.standard_normal((p, p)) * scale
    return SymMat(0.5 * (M + M.T))


def random_cone_context(rng, p):
    """Random PSD/NSD split with a decent chance of zero eigenvalues."""
    kind = rng.integers(0, 3)
    if kind == 0:
        lamv = rng.normal(size=p) * 2
    elif kind == 1:
        lamv = np.concatenate([rng.normal(size=p - p // 2) * 2, np.zeros(p // 2)])
    else:
        lamv = np.concatenate([[1.5], np.zeros(p - 2), [-2.0]]) if p >= 2 else np.array([0.0])
    Q = np.linalg.qr(rng.normal(size=(p, p)))[0]
    return cone_context_from_matrix(SymMat((Q * lamv) @ Q.T))


def sample_diag_problem(rng, n, p, pd_quad=False):
    """Certified KKT pair on a random diagonal-constraint problem.

    Each diagonal entry is strictly active (d > 0), strictly multiplied
    (w > 0), or degenerate (both zero). The linear objective term is
    back-solved so (xbar, diag(-w)) is stationary. pd_quad shifts the
    objective Hessian to be positive definite.
    """
    glin = rng.integers(-2, 3, size=(p, n)).astype(float)
    gquad = rng.integers(-1, 2, size=(p, n, n)).astype(float)
    gquad = 0.5 * (gquad + gquad.transpose(0, 2, 1))
    xbar = rng.integers(-1, 2, size=n).astype(float)
    kind = rng.integers(0, 3, size=p)
    d = np.where(kind == 0, rng.uniform(0.5, 2.0, size=p), 0.0)
    w = np.where(kind == 1, rng.uniform(0.5, 2.0, size=p), 0.0)
    gconst = d - (glin @ xbar + 0.5 * np.einsum("jab,a,b->j", gquad, xbar, xbar))
    fq = rng.integers(-2, 3, size=(n, n)).astype(float)
    fq = 0.5 * (fq + fq.T)
    if pd_quad:
        fq = fq + (np.abs(np.linalg.eigvalsh(fq)).max() + 1.0) * np.eye(n)
    G_lin = [SymMat.diag(glin[:, i]) for i in range(n)]
    G_quad = [[SymMat.diag(gquad[:, i, j]) for j in range(n)] for i in range(n)]
    pd = make_problem(np.zeros(n), fq, SymMat.diag(gconst), G_lin, G_quad)
    Y = SymMat.diag(-w)
    Ds = eval_G_jacobian(pd, xbar)
    flin = -(fq @ xbar + np.array([Dk.inner(Y) for Dk in Ds]))
    pd = make_problem(flin, fq, SymMat.diag(gconst), G_lin, G_quad)
    return pd, xbar, Y, -w
