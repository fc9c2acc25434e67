import numpy as np
import pytest
from hypothesis import given, strategies as st

from pdfp.diagnostics import grid_oracle, reference_solution
from pdfp.operators import make_dense, make_identity
from pdfp.problems import (FusedLassoSpec, TvRestorationSpec, build_fused_lasso,
                           build_tv_restoration, checkerboard, dual_from_primal, kkt_residual,
                           make_kernel, objective, read_pgm, read_vector_csv, relative_error,
                           synthesize_fused_lasso, synthesize_tv_restoration, write_pgm,
                           write_vector_csv)
from pdfp.prox import project_nonneg
from pdfp.solvers import PrimalDualState, SolverConfig, solve

N2_A = [[1.0, 0.5], [0.2, 1.0], [0.3, -0.4]]
N2_a = [1.0, 3.0, 0.5]
# exhaustive grid argmin (step 1e-4 on [-10, 10]^2), scripts/derive_oracles.py
N2_ARGMIN = np.array([0.9018, 1.2603])
N2_MIN = 2.88662582725


def n2_problem():
    return build_fused_lasso(make_dense(N2_A), N2_a, 0.5, 0.5)


def test_synthesis_zero_signal_zero_noise():
    A, a, x_true = synthesize_fused_lasso(FusedLassoSpec(r=5, n=8, sparsity=0, noise_sigma=0.0))
    assert np.all(x_true == 0) and np.all(a == 0)


def test_synthesis_deterministic():
    s = FusedLassoSpec(r=7, n=30, sparsity=2, block_length=3, seed=11)
    A1, a1, x1 = synthesize_fused_lasso(s)
    A2, a2, x2 = synthesize_fused_lasso(s)
    assert np.array_equal(A1.matrix, A2.matrix) and np.array_equal(a1, a2)
    assert np.array_equal(x1, x2)
    _, a3, _ = synthesize_fused_lasso(FusedLassoSpec(r=7, n=30, sparsity=2, block_length=3,
                                                     seed=12))
    assert not np.array_equal(a1, a3)


def test_synthesis_block_structure():
    s = FusedLassoSpec(r=10, n=100, sparsity=3, block_length=7, noise_sigma=0.0, seed=4)
    A, a, x = synthesize_fused_lasso(s)
    nz = np.flatnonzero(x)
    assert nz.size == 21
    # three runs of equal values
    runs = np.split(x[nz], np.flatnonzero(np.diff(nz) > 1) + 1)
    assert len(runs) == 3 and all(np.all(r == r[0]) and np.abs(r[0]) >= 1 for r in runs)
    np.testing.assert_allclose(a, A.matrix @ x, atol=1e-12)


def test_synthesis_generation_protocol_moments():
    A, _, _ = synthesize_fused_lasso(FusedLassoSpec(r=200, n=300, seed=1))
    M = A.matrix
    assert abs(M.mean()) < 0.01 and abs(M.var() - 1) < 0.01


@pytest.mark.parametrize("kw", [dict(r=0), dict(n=1), dict(mu1=-1.0), dict(sparsity=30)])
def test_fused_spec_invariants(kw):
    with pytest.raises(ValueError):
        FusedLassoSpec(**kw)


@pytest.mark.parametrize("kw", [dict(height=1), dict(mu=-0.1), dict(kernel="disk")])
def test_tv_spec_invariants(kw):
    with pytest.raises(ValueError):
        TvRestorationSpec(**kw)


def test_build_fused_lasso_shapes_and_beta():
    g = np.random.default_rng(0)
    M = g.normal(size=(10, 20))
    p = build_fused_lasso(make_dense(M), g.normal(size=10), 1.0, 0.5)
    assert p.B.kind == "first_difference" and p.n == 20 and p.m == 19
    exact = np.linalg.eigvalsh(M.T @ M)[-1]
    assert abs(1 / p.beta - exact) <= 1e-6 * exact
    with pytest.raises(ValueError):
        build_fused_lasso(make_dense(M), np.zeros(9), 1.0, 0.5)


def test_zero_weights_pure_least_squares():
    g = np.random.default_rng(1)
    M = g.normal(size=(12, 6))
    a = g.normal(size=12)
    p = build_fused_lasso(make_dense(M), a, 0.0, 0.0)
    assert p.f2.is_zero and p.f3.is_zero
    cfg = SolverConfig("pdfp", 1.5 * p.beta, 0.25, max_iter=20000, fp_tol=1e-12)
    u, h = solve(p, cfg)
    assert kkt_residual(p, u.x, u.v, cfg.gamma, cfg.lam) <= 1e-8
    np.testing.assert_allclose(u.x, np.linalg.lstsq(M, a, rcond=None)[0], atol=1e-8)


def test_tv_identity_no_penalty_is_projection():
    g = np.random.default_rng(2)
    a = g.normal(size=16)
    p = build_tv_restoration(make_identity(16), a, 0.0, True, 4, 4)
    u, h = solve(p, SolverConfig("pdfp", 1.0, 0.1, max_iter=50, fp_tol=1e-14))
    np.testing.assert_allclose(u.x, project_nonneg(a), atol=1e-14)


def test_tv_denoising_improves_on_data():
    g = np.random.default_rng(3)
    a = checkerboard(6, 6, 2).ravel() + 0.3 * g.normal(size=36)
    p = build_tv_restoration(make_identity(36), a, 0.2, False, 6, 6)
    L = p.opnorm.value
    u, h = solve(p, SolverConfig("pdfp", 1.0, 0.99 / L, max_iter=5000, fp_tol=1e-10))
    assert h.converged and objective(p, u.x) <= objective(p, a)


def test_tv_builder_errors():
    with pytest.raises(ValueError):
        build_tv_restoration(make_identity(16), np.zeros(16), 0.1, True, 4, 5)


def test_tv_synthesis():
    s = TvRestorationSpec(height=8, width=8, noise_sigma=0.0, kernel="box", tile=2)
    A, a, x = synthesize_tv_restoration(s)
    np.testing.assert_allclose(a, A.apply(x), atol=0)
    assert set(np.unique(x)) == {0.0, 1.0}
    for kind in ("box", "gaussian", "identity"):
        k = make_kernel(TvRestorationSpec(kernel=kind))
        assert abs(k.sum() - 1) < 1e-15 and np.all(k >= 0)


def test_objective_examples():
    g = np.random.default_rng(4)
    a = g.normal(size=5)
    p = build_fused_lasso(make_dense(g.normal(size=(5, 3))), a, 0.3, 0.3)
    assert objective(p, np.zeros(3)) == pytest.approx(0.5 * a @ a, rel=1e-15)
    q = build_tv_restoration(make_identity(4), np.ones(4), 0.1, True, 2, 2)
    assert objective(q, [1.0, -1e-9, 0.0, 0.0]) == np.inf


def test_objective_matches_grid_oracle_value():
    x, val = grid_oracle(n2_problem(), -10.0, 10.0, 1e-4)
    np.testing.assert_allclose(x, N2_ARGMIN, atol=1e-12)
    assert val == pytest.approx(N2_MIN, abs=1e-9)
    assert objective(n2_problem(), N2_ARGMIN) == pytest.approx(N2_MIN, abs=1e-9)


def test_kkt_zero_at_exact_solution():
    a = np.array([2.0, -1.0, 0.5])
    p = build_fused_lasso(make_identity(3), a, 0.0, 0.0, lipschitz=1.0)
    u, _ = solve(p, SolverConfig("pdfp", 1.0, 0.25, max_iter=1))
    assert kkt_residual(p, u.x, u.v, 1.0, 0.25) <= 1e-14


def test_kkt_positive_away_from_solution():
    assert kkt_residual(n2_problem(), np.zeros(2), np.zeros(1)) > 0


def test_kkt_at_grid_minimizer():
    p = n2_problem()
    gam, lam = p.beta, 0.5 / p.opnorm.value
    v = dual_from_primal(p, N2_ARGMIN, gam, lam)
    assert kkt_residual(p, N2_ARGMIN, v, gam, lam) <= 1e-3


def test_kkt_independent_of_solver_steps():
    p = n2_problem()
    L = p.opnorm.value
    vals = []
    for gam, lam in ((p.beta, 0.9 / L), (0.3 * p.beta, 0.2 / L)):
        u, _ = solve(p, SolverConfig("pdfp", gam, lam, max_iter=100000, fp_tol=1e-13))
        vals.append(kkt_residual(p, u.x, u.v, gam, lam))
    assert max(vals) <= 1e-9


def test_objective_lower_bound_against_grid():
    p = n2_problem()
    ref = reference_solution(p, SolverConfig("pdfp", 1.5 * p.beta, 0.9 / p.opnorm.value))
    assert objective(p, ref.x) <= N2_MIN + 1e-12
    assert objective(p, ref.x) >= N2_MIN - 1e-6


@given(seed=st.integers(0, 1000))
def test_beta_consistency_property(seed):
    A, a, _ = synthesize_fused_lasso(FusedLassoSpec(r=6, n=9, sparsity=1, block_length=2,
                                                    seed=seed))
    p = build_fused_lasso(A, a, 1.0, 0.1)
    g = np.random.default_rng(seed)
    for x, y in zip(g.normal(size=(50, 9)), g.normal(size=(50, 9))):
        dg = p.f1.grad(x) - p.f1.grad(y)
        assert np.linalg.norm(dg) <= np.linalg.norm(x - y) / p.beta * (1 + 1e-8)


def test_beta_consistency_1000_pairs():
    A, a, _ = synthesize_fused_lasso(FusedLassoSpec(r=20, n=40, seed=3))
    p = build_fused_lasso(A, a, 1.0, 0.1)
    g = np.random.default_rng(5)
    X, Y = g.normal(size=(1000, 40)), g.normal(size=(1000, 40))
    dG = (X - Y) @ (A.matrix.T @ A.matrix)
    assert np.all(np.linalg.norm(dG, axis=1) <= np.linalg.norm(X - Y, axis=1) / p.beta
                  * (1 + 1e-8))


def test_pgm_round_trip(tmp_path):
    img = checkerboard(5, 7, 2) * 0.8
    write_pgm(tmp_path / "x.pgm", img)
    back = read_pgm(tmp_path / "x.pgm")
    assert back.shape == (5, 7)
    np.testing.assert_allclose(back, img, atol=0.5 / 255)
    (tmp_path / "bad.pgm").write_text("P5\n1 1\n255\n0\n")
    with pytest.raises(ValueError):
        read_pgm(tmp_path / "bad.pgm")


def test_vector_csv_round_trip(tmp_path):
    g = np.random.default_rng(6)
    cols = {"x": g.normal(size=9), "x_true": g.normal(size=9) * 1e-17}
    write_vector_csv(tmp_path / "v.csv", cols)
    back = read_vector_csv(tmp_path / "v.csv")
    assert list(back) == ["x", "x_true"]
    for k in cols:
        assert np.array_equal(back[k], cols[k])
    with pytest.raises(ValueError):
        write_vector_csv(tmp_path / "w.csv", {"a": [1.0], "b": [1.0, 2.0]})


def test_relative_error():
    assert relative_error([1.0, 1.0], [1.0, 1.0]) == 0.0
    assert relative_error([0.0, 2.0], [0.0, 1.0]) == 1.0
    assert relative_error([3.0, 4.0], [0.0, 0.0]) == 5.0
