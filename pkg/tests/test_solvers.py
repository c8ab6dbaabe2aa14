import numpy as np
import pytest
import scipy.sparse as sp
from conftest import cavity_system
from hypothesis import given, settings
from hypothesis import strategies as st

from insfem.errors import ConfigurationError, InvalidArgument, SingularMatrix, ZeroPivot
from insfem.solvers import (
    FieldSplitOptions,
    FieldSplitSchur,
    ILU0,
    Jacobi,
    KrylovOptions,
    LUFactor,
    NewtonOptions,
    SparseMatrixCSR,
    fieldsplit_schur_apply,
    gmres,
    ilu0,
    jfnk_matvec,
    line_search_basic,
    lu_direct,
    newton_solve,
    read_matrix_market,
    schur_approximation,
    spmv,
    write_matrix_market,
)
from insfem.timeloop import steady_solve
from insfem.verify.cases import ins_mms_problem


def stokes_rhs(s):
    y0 = s.impose_constraints(np.zeros(s.n_dofs))
    return s.jacobian(y0), -s.residual(y0), y0


# sparse storage


def test_csr_canonical_form():
    A = SparseMatrixCSR(sp.coo_matrix(([1.0, 2.0, 3.0], ([0, 0, 1], [1, 1, 0])), shape=(2, 2)))
    assert A.nnz == 2
    np.testing.assert_array_equal(A.toarray(), [[0, 3], [3, 0]])
    with pytest.raises(InvalidArgument):
        SparseMatrixCSR(np.eye(3), blocks={"u": [0, 1], "p": [1]})


def test_spmv_examples(rng):
    np.testing.assert_array_equal(spmv(np.eye(3), [1, 2, 3]), [1, 2, 3])
    np.testing.assert_array_equal(spmv(SparseMatrixCSR.from_dense([[2, 0], [0, 3]]), [1, 1]), [2, 3])
    D = rng.normal(size=(10, 10)) * (rng.random((10, 10)) < 0.4)
    x = rng.normal(size=10)
    np.testing.assert_allclose(spmv(SparseMatrixCSR.from_dense(D), x), D @ x, atol=1e-13)
    with pytest.raises(InvalidArgument):
        spmv(np.eye(3), np.ones(2))


def test_matrix_market_round_trip(tmp_path, rng):
    A = SparseMatrixCSR(sp.random(7, 5, density=0.4, random_state=3))
    path = tmp_path / "a.mtx"
    write_matrix_market(A, path)
    assert path.read_text().splitlines()[0] == "%%MatrixMarket matrix coordinate real general"
    np.testing.assert_array_equal(read_matrix_market(path).toarray(), A.toarray())


def test_lu_direct_examples():
    np.testing.assert_allclose(lu_direct(np.diag([2.0, 3.0]), [2.0, 3.0]), [1.0, 1.0])
    A, b, _ = stokes_rhs(cavity_system(2))
    x = lu_direct(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)
    with pytest.raises(SingularMatrix):
        lu_direct(np.array([[1.0, 2.0], [1.0, 2.0]]), [1.0, 1.0])


# Krylov


def test_gmres_identity_and_diagonal(rng):
    b = rng.normal(size=6)
    r = gmres(np.eye(6), b)
    assert r.converged and r.iterations == 1
    r = gmres(np.diag(np.arange(1.0, 6.0)), rng.normal(size=5), opts=KrylovOptions(l_tol=1e-12))
    assert r.converged and r.iterations <= 5


def test_gmres_with_exact_preconditioner(rng):
    A, b, _ = stokes_rhs(cavity_system(3))
    r = gmres(A.to_scipy(), b, LUFactor(A), KrylovOptions(l_tol=1e-12))
    assert r.converged and r.iterations == 1
    assert np.linalg.norm(A @ r.x - b) <= 1e-12 * np.linalg.norm(b) * 10


def test_gmres_residuals_nonincreasing_within_cycle(rng):
    n = 40
    A = sp.diags([-1.0, 2.5, -1.2], [-1, 0, 1], shape=(n, n)).tocsr()
    r = gmres(A, rng.normal(size=n), opts=KrylovOptions(l_tol=1e-10, restart=50))
    inner = r.residuals[1:-1]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(inner, inner[1:]))


def test_gmres_max_iterations_returns_best(rng):
    n = 50
    A = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n)).tocsr()
    b = rng.normal(size=n)
    r = gmres(A, b, opts=KrylovOptions(l_tol=1e-14, l_max_its=5, restart=5))
    assert not r.converged
    assert np.linalg.norm(b - A @ r.x) < np.linalg.norm(b)


# ILU / Jacobi


def test_ilu0_exact_on_diagonal_and_tridiagonal(rng):
    D = np.diag([2.0, 4.0, 5.0])
    np.testing.assert_allclose(ilu0(D)(np.array([2.0, 4.0, 5.0])), 1.0)
    n = 12
    T = sp.diags([rng.random(n - 1), 4 + rng.random(n), rng.random(n - 1)], [-1, 0, 1]).tocsr()
    b = rng.normal(size=n)
    np.testing.assert_allclose(ILU0(T)(b), np.linalg.solve(T.toarray(), b), rtol=1e-12)


def test_ilu0_zero_pivot():
    with pytest.raises(ZeroPivot):
        ilu0(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ZeroPivot):
        Jacobi(np.array([[0.0, 1.0], [1.0, 1.0]]))


def test_ilu_reduces_gmres_iterations_on_cavity():
    s = cavity_system(8, order=1, convective=True, supg=True, mu=0.01)
    y = s.impose_constraints(np.zeros(s.n_dofs))
    J = s.jacobian(y).to_scipy()
    b = -s.residual(y)
    opts = KrylovOptions(l_tol=1e-8, l_max_its=2000, restart=30)
    plain = gmres(J, b, None, opts)
    pre = gmres(J, b, ILU0(J), opts)
    assert pre.converged
    assert pre.iterations < plain.iterations


# field split


def test_selfp_hand_example():
    S = schur_approximation(sp.csr_matrix(np.diag([2.0, 4.0])), sp.csr_matrix([[1.0], [1.0]]),
                            sp.csr_matrix([[1.0, 1.0]]), sp.csr_matrix([[0.1]]), "selfp")
    assert S.toarray()[0, 0] == pytest.approx(-0.65, abs=1e-15)


def test_a11_without_pspg_raises():
    A, _, _ = stokes_rhs(cavity_system(3, order=2, pspg=False))
    with pytest.raises(ConfigurationError):
        FieldSplitSchur(A, opts=FieldSplitOptions("a11", "full"))


def test_full_full_one_gmres_iteration():
    A, b, _ = stokes_rhs(cavity_system(4))
    M = FieldSplitSchur(A, opts=FieldSplitOptions("full", "full"))
    r = gmres(A.to_scipy(), b, M, KrylovOptions(l_tol=1e-10))
    assert r.converged and r.iterations == 1
    np.testing.assert_allclose(r.x, lu_direct(A, b), atol=1e-8 * np.abs(r.x).max())


@pytest.mark.parametrize("fact", ["lower", "upper"])
def test_triangular_factorizations_with_exact_schur(fact):
    A, b, _ = stokes_rhs(cavity_system(4))
    r = gmres(A.to_scipy(), b, FieldSplitSchur(A, opts=FieldSplitOptions("full", fact)), KrylovOptions(l_tol=1e-10))
    assert r.converged and r.iterations <= 3


@pytest.mark.parametrize("schur", ["selfp", "a11"])
@pytest.mark.parametrize("fact", ["diag", "lower", "upper", "full"])
def test_fieldsplit_variants_converge_q1q1(schur, fact):
    A, b, _ = stokes_rhs(cavity_system(4, order=1, pspg=True))
    r = gmres(A.to_scipy(), b, FieldSplitSchur(A, opts=FieldSplitOptions(schur, fact)),
              KrylovOptions(l_tol=1e-10, l_max_its=500))
    assert r.converged


def test_diag_factorization_ignores_coupling():
    A, _, _ = stokes_rhs(cavity_system(3))
    rhs = np.zeros(A.shape[0])
    u = np.concatenate([A.blocks["vel_x"], A.blocks["vel_y"]])
    rhs[u] = 1.0
    out = fieldsplit_schur_apply(A, rhs, FieldSplitOptions("full", "diag"))
    np.testing.assert_array_equal(out[A.blocks["p"]], 0.0)


def test_fieldsplit_options_validation():
    with pytest.raises(ConfigurationError):
        FieldSplitOptions("user")
    with pytest.raises(ConfigurationError):
        FieldSplitOptions("selfp", "symmetric")


# Newton


def _scalar(y):
    return np.array([y[0] ** 2 - 4.0])


def _scalar_jac(y):
    return np.array([[2.0 * y[0]]])


def test_newton_scalar_example():
    its = []
    res = newton_solve(_scalar, _scalar_jac, [3.0], NewtonOptions(nl_rel_tol=1e-14, nl_abs_tol=1e-12),
                       callback=lambda k, y, f: its.append(y[0]))
    assert res.converged and res.iterations <= 7
    assert res.y[0] == pytest.approx(2.0, abs=1e-12)
    assert its[0] == pytest.approx(3.0 - 5.0 / 6.0)
    err = [abs(v - 2.0) for v in [3.0] + its if abs(v - 2.0) > 1e-15]
    assert all(b / a**2 < 1.0 for a, b in zip(err, err[1:]))


def test_newton_linear_one_iteration(rng):
    A = rng.normal(size=(5, 5)) + 5 * np.eye(5)
    b = rng.normal(size=5)
    res = newton_solve(lambda y: A @ y - b, lambda y: A, np.zeros(5), NewtonOptions(nl_rel_tol=1e-12))
    assert res.converged and res.iterations == 1


def test_newton_max_iterations_reports_divergence():
    res = newton_solve(_scalar, _scalar_jac, [3.0], NewtonOptions(nl_rel_tol=1e-14, nl_abs_tol=1e-14, nl_max_its=2))
    assert not res.converged and res.status == "diverged" and len(res.history) == 3


def test_newton_options_validation():
    for bad in (dict(nl_rel_tol=0.0), dict(nl_max_its=0), dict(line_search="bt"), dict(solve_type="JFNK")):
        with pytest.raises((InvalidArgument, ConfigurationError)):
            NewtonOptions(**bad)


def test_jfnk_matvec_examples(rng):
    A = rng.normal(size=(4, 4))
    b = rng.normal(size=4)
    v = rng.normal(size=4)
    np.testing.assert_allclose(jfnk_matvec(lambda y: A @ y - b, rng.normal(size=4), v), A @ v, rtol=1e-6)
    assert jfnk_matvec(lambda y: y**2, np.array([1.0]), np.array([1.0]))[0] == pytest.approx(2.0, rel=1e-6)
    np.testing.assert_array_equal(jfnk_matvec(lambda y: y**2, np.ones(3), np.zeros(3)), 0.0)


def test_jfnk_matches_assembled_jacobian_on_cavity(rng):
    s = cavity_system(4, order=1, convective=True, supg=True, mu=0.05)
    y = rng.normal(size=s.n_dofs)
    v = rng.normal(size=s.n_dofs)
    Jv = s.jacobian(y, tau_state=y) @ v
    fd = jfnk_matvec(lambda z: s.residual(z, tau_state=y), y, v)
    assert np.linalg.norm(fd - Jv) <= 1e-5 * np.linalg.norm(Jv)


def test_line_search_basic():
    F = lambda y: np.array([y[0] ** 2 - 4.0])  # noqa: E731
    alpha, _, ok = line_search_basic(F, np.array([3.0]), np.array([-5.0 / 6.0]))
    assert alpha == 1.0 and ok
    alpha, _, ok = line_search_basic(F, np.array([3.0]), np.array([1.0]))
    assert 0.0 < alpha < 1.0 and not ok


@settings(max_examples=30, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10))
def test_line_search_alpha_positive(y0, dy):
    alpha, _, _ = line_search_basic(lambda y: np.array([np.sin(y[0]) + y[0] ** 2]), np.array([y0]), np.array([dy]))
    assert alpha > 0.0


def test_newton_with_basic_line_search_converges():
    F = lambda y: np.array([np.arctan(y[0])])  # noqa: E731
    J = lambda y: np.array([[1.0 / (1.0 + y[0] ** 2)]])  # noqa: E731
    with np.errstate(over="ignore"):
        assert not newton_solve(F, J, [3.0], NewtonOptions(nl_max_its=20)).converged
    res = newton_solve(F, J, [3.0], NewtonOptions(nl_max_its=50, nl_rel_tol=1e-14, nl_abs_tol=1e-12,
                                                  line_search="basic"))
    assert res.converged and abs(res.y[0]) < 1e-10


def test_pjfnk_and_newton_agree_on_mms():
    s, _, _ = ins_mms_problem(8, "q1q1", "diffusion")
    tight = dict(nl_rel_tol=1e-12, nl_abs_tol=1e-11)
    direct = steady_solve(s, nopts=NewtonOptions(**tight))
    jf = steady_solve(s, nopts=NewtonOptions(solve_type="PJFNK", **tight),
                      kopts=KrylovOptions(l_tol=1e-10, preconditioner="ilu", l_max_its=500))
    assert direct.converged and jf.converged
    assert np.abs(direct.y - jf.y).max() <= 1e-8


@pytest.mark.parametrize("pc", ["ilu", "jacobi", "fieldsplit", "none"])
def test_gmres_preconditioners_agree_with_direct(pc):
    s, _, _ = ins_mms_problem(4, "q1q1", "diffusion")
    ref = steady_solve(s, nopts=NewtonOptions(nl_rel_tol=1e-12))
    got = steady_solve(s, nopts=NewtonOptions(nl_rel_tol=1e-12),
                       kopts=KrylovOptions(l_tol=1e-12, preconditioner=pc, l_max_its=2000, restart=100),
                       fieldsplit=FieldSplitOptions("selfp", "full"))
    assert got.converged
    assert np.abs(ref.y - got.y).max() <= 1e-8
