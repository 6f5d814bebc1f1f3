"""Multiplier classification, qualification checks, diagonal reduction."""

import math

import numpy as np
import pytest

from conftest import sample_diag_problem
from kkt_spectra.criticality import (
    CRITICAL,
    NONCRITICAL,
    UNDETERMINED,
    _Rows,
    build_system,
    check_rcq,
    check_srcq,
    classify_multiplier,
    classify_nlp,
    diagonal_reduction,
    witness_residual,
    xpart_condition,
)
from kkt_spectra.errors import InputDataError
from kkt_spectra.lpkernel import null_space
from kkt_spectra.problem import kkt_point, make_problem
from kkt_spectra.symmat import SymMat, sym_mat


@pytest.fixture
def scalar_system():
    """f = 0, G(x) = [x], reference (0, [0]): every direction is a witness."""
    pd = make_problem([0.0], [[0.0]], SymMat.zeros(1), [SymMat.eye(1)])
    return pd, build_system(pd, kkt_point(pd, [0.0], SymMat.zeros(1)))


def test_witness_residual_fixtures(scalar_system, fam3):
    _, sys1 = scalar_system
    assert witness_residual(sys1, [0.0], SymMat.zeros(1)) == 0.0
    assert witness_residual(sys1, [1.0], SymMat.zeros(1)) <= 1e-15
    sys3 = build_system(fam3.problem, kkt_point(fam3.problem, fam3.xbar, fam3.ybar))
    r = witness_residual(sys3, [1.0, 0.0], SymMat.zeros(2))
    assert abs(r - math.sqrt(5.0)) <= 1e-12


def test_build_system_partitions(fam2, fam3):
    d2 = build_system(fam2.problem, kkt_point(fam2.problem, fam2.xbar, fam2.ybar)).ctx.decomp
    assert list(d2.beta) == [0] and list(d2.gamma) == [1] and d2.alpha.size == 0
    d3 = build_system(fam3.problem, kkt_point(fam3.problem, fam3.xbar, fam3.ybar)).ctx.decomp
    assert d3.beta.size == 2 and d3.alpha.size == 0 and d3.gamma.size == 0


def test_uncertified_point_rejected():
    pd = make_problem([0.0], [[0.0]], SymMat.zeros(1), [SymMat.eye(1)])
    bad = kkt_point(pd, [1.0], SymMat.diag([5.0]))
    assert not bad.certified
    with pytest.raises(InputDataError):
        build_system(pd, bad)


def test_classify_scalar_critical(scalar_system):
    _, sys1 = scalar_system
    v = classify_multiplier(sys1)
    assert v.tag == CRITICAL
    xi, _ = v.witness
    assert abs(abs(xi[0]) - 1.0) <= 1e-12 and v.residual <= 1e-7


def test_classify_reference_examples(fam2, fam3):
    sys3 = build_system(fam3.problem, kkt_point(fam3.problem, fam3.xbar, fam3.ybar))
    assert classify_multiplier(sys3).tag == NONCRITICAL
    sys2 = build_system(fam2.problem, kkt_point(fam2.problem, fam2.xbar, fam2.ybar))
    assert classify_multiplier(sys2).tag == NONCRITICAL


def test_classify_linear_forcing_tier():
    pd = make_problem([0.0], [[1.0]], SymMat.zeros(2), [SymMat.zeros(2)])
    v = classify_multiplier(build_system(pd, kkt_point(pd, [0.0], SymMat.zeros(2))))
    assert v.tag == NONCRITICAL and "linear rows alone" in v.certificate


def test_classify_common_eigenframe_tier():
    pd = make_problem([0.0], [[0.0]], SymMat.zeros(2), [SymMat([[1.0, 1.0], [1.0, 1.0]])])
    v = classify_multiplier(build_system(pd, kkt_point(pd, [0.0], SymMat.zeros(2))))
    assert v.tag == CRITICAL and "common-eigenframe" in v.certificate
    assert v.residual <= 1e-7


def test_classify_rotation_grid_tier():
    pd = make_problem(
        [0.0, 0.0],
        [[0.0, 2.0], [2.0, 0.0]],
        SymMat.zeros(2),
        [SymMat.diag([1.0, 0.0]), SymMat([[0.0, 1.0], [1.0, 2.0]])],
    )
    v = classify_multiplier(build_system(pd, kkt_point(pd, [0.0, 0.0], SymMat.zeros(2))))
    assert v.tag == CRITICAL and v.residual <= 1e-7


def test_classify_undetermined_semidecision():
    pd = make_problem(
        [0.0, 0.0],
        [[0.0, 0.0], [0.0, 0.0]],
        SymMat.zeros(2),
        [SymMat.diag([1.0, -0.5]), SymMat([[0.0, 1.0], [1.0, 0.0]])],
    )
    v = classify_multiplier(build_system(pd, kkt_point(pd, [0.0, 0.0], SymMat.zeros(2))))
    assert v.tag == UNDETERMINED


def test_classify_beta3_and_determinism():
    pd = make_problem(
        [0.0, 0.0],
        [[0.0, 1.0], [1.0, 0.0]],
        SymMat.zeros(3),
        [
            SymMat.diag([1.0, 0.0, 0.0]),
            SymMat([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
        ],
    )
    sysm = build_system(pd, kkt_point(pd, [0.0, 0.0], SymMat.zeros(3)))
    v = classify_multiplier(sysm)
    assert v.tag == CRITICAL and v.residual <= 1e-7
    v2 = classify_multiplier(sysm)
    assert v2.certificate == v.certificate
    assert np.array_equal(v2.witness[0], v.witness[0])


def test_xpart_condition(scalar_system, fam3):
    _, sys1 = scalar_system
    sys3 = build_system(fam3.problem, kkt_point(fam3.problem, fam3.xbar, fam3.ybar))
    assert xpart_condition(sys3)["holds"] is True
    xp1 = xpart_condition(sys1)
    assert xp1["holds"] is False
    assert abs(abs(xp1["witness"][0]) - 1.0) <= 1e-12
    pd_lf = make_problem([0.0], [[1.0]], SymMat.zeros(2), [SymMat.zeros(2)])
    sys_lf = build_system(pd_lf, kkt_point(pd_lf, [0.0], SymMat.zeros(2)))
    assert xpart_condition(sys_lf)["holds"] is True


def test_check_rcq(fam2):
    assert check_rcq(fam2.problem, fam2.xbar) is True
    pd_flat = make_problem([0.0], [[1.0]], SymMat.diag([1.0, 0.0, 0.0]), [SymMat.zeros(3)])
    assert check_rcq(pd_flat, [0.0]) is False
    pd1 = make_problem([0.0], [[0.0]], SymMat.zeros(1), [SymMat.eye(1)])
    assert check_rcq(pd1, [0.0]) is True
    with pytest.raises(InputDataError):
        check_rcq(pd_flat, [float("nan")])
    pd_infeas = make_problem([0.0], [[1.0]], SymMat.diag([-1.0]), [SymMat.zeros(1)])
    with pytest.raises(InputDataError):
        check_rcq(pd_infeas, [0.0])


def test_check_srcq(fam2, fam3):
    assert check_srcq(fam2.problem, fam2.xbar, fam2.ybar) is False
    assert check_srcq(fam3.problem, fam3.xbar, fam3.ybar) is False
    pd_s = make_problem([1.0], [[0.0]], SymMat.zeros(1), [SymMat.eye(1)])
    assert check_srcq(pd_s, [0.0], SymMat.diag([-1.0])) is True


def test_diagonal_reduction_detection(fam2, fam3):
    assert diagonal_reduction(fam2.problem) is not None
    assert diagonal_reduction(fam3.problem) is not None
    pd_off = make_problem(
        [0.0], [[0.0]], SymMat([[0.0, 1.0], [1.0, 0.0]]), [SymMat.zeros(2)]
    )
    assert diagonal_reduction(pd_off) is None


def test_classify_nlp_fixtures(fam2, fam3):
    pd1 = make_problem([0.0], [[0.0]], SymMat.zeros(1), [SymMat.eye(1)])
    v1 = classify_nlp(diagonal_reduction(pd1), [0.0], [0.0])
    assert v1.tag == CRITICAL and abs(abs(v1.witness[0][0]) - 1.0) <= 1e-12
    assert classify_nlp(diagonal_reduction(fam2.problem), fam2.xbar, [-1.0, 0.0]).tag == NONCRITICAL
    assert classify_nlp(diagonal_reduction(fam3.problem), fam3.xbar, [0.0, 0.0]).tag == NONCRITICAL
    with pytest.raises(InputDataError):
        classify_nlp(diagonal_reduction(fam2.problem), fam2.xbar, [1.0, 0.0])
    with pytest.raises(InputDataError):
        classify_nlp(diagonal_reduction(fam2.problem), [1.0, 1.0], [-1.0, 0.0])


def test_diagonal_oracle_agreement():
    rng = np.random.default_rng(7)
    tags = {CRITICAL: 0, NONCRITICAL: 0}
    for trial in range(60):
        n = int(rng.integers(1, 5))
        p = int(rng.integers(1, 5))
        pd, xbar, Y, mu = sample_diag_problem(rng, n, p)
        kkt = kkt_point(pd, xbar, Y)
        assert kkt.certified, (trial, kkt.residuals)
        v_sdp = classify_multiplier(build_system(pd, kkt))
        v_nlp = classify_nlp(diagonal_reduction(pd), xbar, mu)
        assert v_sdp.tag == v_nlp.tag, (trial, v_sdp, v_nlp)
        tags[v_sdp.tag] += 1
        if v_sdp.tag == CRITICAL:
            assert v_sdp.residual <= 1e-7
            assert abs(np.linalg.norm(v_sdp.witness[0]) - 1.0) <= 1e-9
    assert min(tags.values()) > 0, tags


def test_classification_scale_invariance():
    rng = np.random.default_rng(77)
    for trial in range(20):
        n = int(rng.integers(1, 4))
        p = int(rng.integers(1, 4))
        pd, xbar, Y, _ = sample_diag_problem(rng, n, p)
        c = float(rng.uniform(0.2, 5.0))
        pd_s = make_problem(
            c * pd.f_lin,
            c * pd.f_quad,
            pd.G_const,
            list(pd.G_lin),
            [list(r) for r in pd.G_quad],
        )
        v_a = classify_multiplier(build_system(pd, kkt_point(pd, xbar, Y)))
        v_b = classify_multiplier(build_system(pd_s, kkt_point(pd_s, xbar, c * Y)))
        assert v_a.tag == v_b.tag, (trial, v_a.tag, v_b.tag)


def test_noncritical_claims_survive_sampling():
    # on small noncritical cases, random directions in the linear-rows null
    # space never certify a witness
    rng = np.random.default_rng(7)
    checked = 0
    for trial in range(20):
        n = int(rng.integers(1, 4))
        p = int(rng.integers(1, 4))
        pd, xbar, Y, _ = sample_diag_problem(rng, n, p)
        sysm = build_system(pd, kkt_point(pd, xbar, Y))
        if sysm.ctx.decomp.beta.size > 1:
            continue
        if classify_multiplier(sysm).tag != NONCRITICAL:
            continue
        rows = _Rows(sysm)
        Z = null_space(np.stack(rows.common_rows()))
        for _ in range(800):
            if Z.shape[1] == 0:
                break
            z = Z @ rng.standard_normal(Z.shape[1])
            nx = np.linalg.norm(z[: sysm.n])
            if nx <= 1e-9:
                continue
            z = z / nx
            assert witness_residual(sysm, z[: sysm.n], sym_mat(z[sysm.n :], sysm.p)) > 1e-7
        checked += 1
    assert checked > 0
