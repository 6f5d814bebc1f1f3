"""Linear-algebra kernels: null spaces, LP feasibility, cone witnesses."""

import numpy as np

from kkt_spectra.lpkernel import (
    cone_kernel_nontrivial,
    linear_feasible,
    nontrivial_xi_solution,
    null_space,
    project_simplex,
    subspace_psd_nontrivial,
)
from kkt_spectra.symmat import sym_vec


def test_null_space():
    A = np.array([[1.0, 1.0, 0.0]])
    Z = null_space(A)
    assert Z.shape == (3, 2) and np.allclose(A @ Z, 0)
    assert null_space(np.zeros((0, 4))).shape == (4, 4)
    assert null_space(np.eye(3)).shape[1] == 0


def test_linear_feasible_hand_cases():
    x, infeas = linear_feasible([[1, 1], [1, -1]], [1, 0])
    assert infeas <= 1e-9 and np.allclose(x, [0.5, 0.5])
    x, infeas = linear_feasible([[1.0], [1.0]], [1.0, 2.0])
    assert x is None and infeas > 1e-3
    x, _ = linear_feasible(None, None, [[1.0]], [3.0])
    assert x is not None and x[0] >= 3 - 1e-9
    x, _ = linear_feasible([[1, 1]], [0], [[1, 0]], [1])
    assert x is not None and abs(x[0] + x[1]) <= 1e-9 and x[0] >= 1 - 1e-9


def test_linear_feasible_random_consistency():
    rng = np.random.default_rng(11)
    for _ in range(200):
        m, n = int(rng.integers(1, 5)), int(rng.integers(1, 6))
        Aeq = rng.standard_normal((m, n))
        x0 = rng.standard_normal(n)
        Age = rng.standard_normal((int(rng.integers(0, 4)), n))
        x, _ = linear_feasible(
            Aeq,
            Aeq @ x0,
            Age if Age.size else None,
            Age @ x0 if Age.size else None,
        )
        assert x is not None
        assert np.linalg.norm(Aeq @ x - Aeq @ x0) <= 1e-7 * max(1, np.linalg.norm(Aeq @ x0))
        if Age.size:
            assert np.min(Age @ x - Age @ x0) >= -1e-7


def test_nontrivial_xi_solution_hand_cases():
    z, _ = nontrivial_xi_solution(np.zeros((0, 3)), 3, 2)
    assert z is not None and np.linalg.norm(z[:2]) > 1e-9
    z, _ = nontrivial_xi_solution(np.array([[1.0, 0, 0], [0, 1.0, 0]]), 3, 2)
    assert z is None
    z, _ = nontrivial_xi_solution(
        np.array([[1.0, 1.0, 0.0]]), 3, 2, [np.array([1.0, -1.0, 0.0])]
    )
    assert z is not None and z[0] - z[1] >= -1e-12 and abs(z[0] + z[1]) < 1e-12
    # conflicting inequalities force the xi coordinate to zero
    z, merit = nontrivial_xi_solution(
        np.zeros((0, 2)), 2, 1, [np.array([1.0, 0.0]), np.array([-1.0, 0.0])]
    )
    assert z is None and merit > 1e-3
    z, _ = nontrivial_xi_solution(
        np.zeros((0, 2)), 2, 1, [np.array([1.0, 1.0]), np.array([1.0, -1.0])]
    )
    assert z is not None and abs(z[0]) > 1e-9
    assert z[0] + z[1] >= -1e-9 and z[0] - z[1] >= -1e-9


def test_nontrivial_xi_solution_random():
    rng = np.random.default_rng(11)
    found = 0
    for _ in range(100):
        dim = int(rng.integers(2, 6))
        xi_dim = int(rng.integers(1, dim + 1))
        eq = (
            rng.standard_normal((int(rng.integers(0, dim - 1)), dim))
            if dim > 1
            else np.zeros((0, dim))
        )
        ineqs = [rng.standard_normal(dim) for _ in range(int(rng.integers(2, 5)))]
        z, _ = nontrivial_xi_solution(eq, dim, xi_dim, ineqs)
        if z is None:
            continue
        found += 1
        if eq.size:
            assert np.linalg.norm(eq @ z) <= 1e-7 * max(1, np.linalg.norm(z))
        assert min(a @ z for a in ineqs) >= -1e-7 * max(1, np.linalg.norm(z))
        assert np.linalg.norm(z[:xi_dim]) > 1e-9
    assert found > 0


def test_project_simplex():
    w = project_simplex(np.array([0.2, 0.9, -0.4]))
    assert abs(w.sum() - 1) < 1e-12 and np.all(w >= 0)
    assert np.allclose(project_simplex(np.array([2.0, 0.0])), [1.0, 0.0])


def test_subspace_psd_nontrivial_hand_cases():
    W = subspace_psd_nontrivial(np.zeros((0, 3)), 2)
    assert W is not None and np.linalg.eigvalsh(W).min() >= -1e-12
    # off-diagonal-only subspace of S^2 meets the PSD cone only at 0
    rows = np.stack([sym_vec(np.diag([1.0, 0.0])), sym_vec(np.diag([0.0, 1.0]))])
    assert subspace_psd_nontrivial(rows, 2) is None
    # trace-zero diagonal subspace likewise
    rows = np.stack(
        [
            sym_vec(np.array([[0, 1.0], [1.0, 0]]) / np.sqrt(2)),
            sym_vec(np.diag([1.0, 1.0])) / np.sqrt(2),
        ]
    )
    assert subspace_psd_nontrivial(rows, 2) is None
    # full diagonal subspace contains PSD elements
    rows = np.stack([sym_vec(np.array([[0.0, 1.0], [1.0, 0.0]]) / np.sqrt(2))])
    W = subspace_psd_nontrivial(rows, 2)
    assert W is not None and np.linalg.eigvalsh(W).min() >= -1e-8
    assert abs(W[0, 1]) <= 1e-9


def test_subspace_psd_constructed_witnesses():
    rng = np.random.default_rng(11)
    for _ in range(120):
        q = int(rng.integers(2, 5))
        nfull = q * (q + 1) // 2
        Q, _ = np.linalg.qr(rng.standard_normal((q, q)))
        d = np.abs(rng.standard_normal(q))
        v = sym_vec((Q * d) @ Q.T)
        v = v / np.linalg.norm(v)
        k = int(rng.integers(1, 3))
        basis = [v]
        for _ in range(k - 1):
            u = rng.standard_normal(nfull)
            u -= sum((u @ b) * b for b in basis)
            basis.append(u / np.linalg.norm(u))
        Vb = np.stack(basis, axis=1)
        U, _, _ = np.linalg.svd(Vb, full_matrices=True)
        comp = U[:, k:].T
        W = subspace_psd_nontrivial(comp, q)
        assert W is not None, "known PSD element missed"
        assert np.linalg.norm(comp @ sym_vec(W)) <= 1e-6
        assert np.linalg.eigvalsh(W).min() >= -1e-7


def test_subspace_psd_certified_trivial():
    rng = np.random.default_rng(11)
    for _ in range(120):
        q = int(rng.integers(2, 5))
        nfull = q * (q + 1) // 2
        Q, _ = np.linalg.qr(rng.standard_normal((q, q)))
        d = rng.uniform(0.5, 2.0, q)
        rows = [sym_vec((Q * d) @ Q.T)]  # PD certificate row
        for _ in range(int(rng.integers(0, 3))):
            rows.append(rng.standard_normal(nfull))
        assert subspace_psd_nontrivial(np.stack(rows), q) is None


def test_cone_kernel_nontrivial():
    eq = np.array([[1.0, 1.0, 0.0]])
    blk = np.array([[1.0, 0.0, 0.0]])
    v = cone_kernel_nontrivial(eq, 3, blk, 1, 1.0)
    assert v is not None and abs(v[0] + v[1]) < 1e-9
    v = cone_kernel_nontrivial(np.zeros((0, 1)), 1, np.array([[1.0]]), 1, 1.0)
    assert v is not None and v[0] > 0
    v = cone_kernel_nontrivial(np.zeros((0, 1)), 1, np.array([[1.0]]), 1, -1.0)
    assert v is not None and v[0] < 0
    assert cone_kernel_nontrivial(np.array([[1.0]]), 1, np.array([[1.0]]), 1, 1.0) is None
    # zero diagonal forced: remaining off-diagonal block is PSD only at 0
    rows_eq = np.stack([sym_vec(np.diag([1.0, 0.0])), sym_vec(np.diag([0.0, 1.0]))])
    assert cone_kernel_nontrivial(rows_eq, 3, np.eye(3), 2, 1.0) is None
