"""End-to-end acceptance checks, one test per criterion.

Each test records its criterion number; the terminal summary prints one
PASS/FAIL line per criterion.
"""

import time

import numpy as np
import pytest

from pdfp.diagnostics import (collect_states, eta2_least_squares, grid_oracle,
                              monotonicity_check, rate_report, reference_solution,
                              support_metrics, weighted_distances)
from pdfp.operators import (make_dense, make_first_difference, make_grad2d,
                            op_norm_sq_estimate)
from pdfp.problems import (FusedLassoSpec, TvRestorationSpec, build_fused_lasso,
                           build_tv_restoration, kkt_residual, synthesize_fused_lasso,
                           synthesize_tv_restoration)
from pdfp.prox import (ProxFn, SmoothFn, conjugate_prox_via_moreau, residual_shrink)
from pdfp.solvers import (PrimalDualState, ProblemSpec, SolverConfig, StepSizeError, iterate,
                          solve, validate_config)
from pdfp import rng


@pytest.fixture
def criterion(record_property):
    def mark(n, title):
        record_property("criterion", n)
        record_property("title", title)
        print(f"\ncriterion {n}: {title}")
    return mark


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


@pytest.fixture(scope="module")
def fused_desk():
    A, a, x_true = synthesize_fused_lasso(FusedLassoSpec(r=50, n=200, seed=7))
    p = build_fused_lasso(A, a, 1.0, 0.1)
    cfg = SolverConfig("pdfp", 1.99 * p.beta, 0.99 / p.opnorm.value)
    return p, cfg


@pytest.fixture(scope="module")
def tv_desk():
    spec = TvRestorationSpec(height=16, width=16, mu=0.05, nonneg=True, seed=0)
    A, a, _ = synthesize_tv_restoration(spec)
    return build_tv_restoration(A, a, spec.mu, True, 16, 16)


def test_c01_reduction_equivalence(criterion):
    criterion(1, "PDFP and PDFP2O iterates agree within 1e-13 on a fused-ridge instance")
    with Timer() as t:
        A, a, _ = synthesize_fused_lasso(FusedLassoSpec(r=20, n=50, sparsity=2, mu2=0.0,
                                                        seed=3))
        f1 = SmoothFn.least_squares(A, a, ridge=0.1)
        p = ProblemSpec(f1, ProxFn.l1(1.0), make_first_difference(50), ProxFn.zero())
        cfg = SolverConfig("pdfp", 1.99 * p.beta, 0.99 / p.opnorm.value)
        cfg2 = SolverConfig("pdfp2o", cfg.gamma, cfg.lam)
        worst = 0.0
        for _, u, w in zip(range(100), iterate(p, cfg), iterate(p, cfg2)):
            worst = max(worst, np.max(np.abs(u.x - w.x)), np.max(np.abs(u.v - w.v)))
    assert worst <= 1e-13
    assert t.seconds < 1.0


def test_c02_iterate_feasibility(criterion, tv_desk):
    criterion(2, "every PDFP iterate is nonnegative on 16x16 TV restoration (500 iterations)")
    p = tv_desk
    cfg = SolverConfig("pdfp", 1.99 * p.beta, 0.99 / p.opnorm.value)
    mins = [u.x.min() for _, u in zip(range(500), iterate(p, cfg))]
    assert len(mins) == 500 and min(mins) >= 0.0


def test_c03_monotone_lambda_distance(criterion, fused_desk):
    criterion(3, "||u^k - u*||_lambda nonincreasing within 1e-9 over 2000 iterations")
    p, cfg = fused_desk
    with Timer() as t:
        u_star = reference_solution(p, cfg, big_iter=10**6)
        states = collect_states(p, cfg, 2000)
        violation = monotonicity_check(states, u_star, cfg.lam)
    print(f"max violation {violation:.3g}, {t.seconds:.2f} s")
    assert violation <= 1e-9
    assert t.seconds < 30.0


def test_c04_kkt_at_convergence(criterion, fused_desk):
    criterion(4, "fp_tol 1e-10 gives KKT residual <= 1e-6")
    p, cfg = fused_desk
    u, hist = solve(p, SolverConfig("pdfp", cfg.gamma, cfg.lam, max_iter=10**6, fp_tol=1e-10,
                                    record_every=10**6))
    kkt = kkt_residual(p, u.x, u.v, cfg.gamma, cfg.lam)
    print(f"{hist.iterations} iterations, KKT {kkt:.3g}")
    assert hist.converged and kkt <= 1e-6


def test_c05_oracle_agreement(criterion):
    criterion(5, "n=2 fused LASSO solver output within 1e-3 of the step-1e-4 grid argmin")
    with Timer() as t:
        p = build_fused_lasso(make_dense([[1.0, 0.5], [0.2, 1.0], [0.3, -0.4]]),
                              [1.0, 3.0, 0.5], 0.5, 0.5)
        x_grid, _ = grid_oracle(p, -10.0, 10.0, 1e-4)
        u, hist = solve(p, SolverConfig("pdfp", 1.99 * p.beta, 0.99 / p.opnorm.value,
                                        max_iter=100000, fp_tol=1e-12))
    print(f"oracle {x_grid}, solver {u.x}, {t.seconds:.2f} s")
    assert hist.converged
    assert np.max(np.abs(u.x - x_grid)) <= 1e-3
    assert t.seconds < 10.0


def test_c06_cross_solver_agreement(criterion, tv_desk):
    criterion(6, "PDFP, Condat and PDFP2O_C objectives within 1e-6 relative on 16x16 TV")
    p = tv_desk
    L, beta = p.opnorm.value, p.beta
    cfgs = [SolverConfig("pdfp", 1.99 * beta, 0.99 / L),
            SolverConfig("pdfp2oc", 1.99 * beta, 1.0 / (L + 1.0)),
            SolverConfig("condat", beta, 0.49 / L)]
    objs = []
    with Timer() as t:
        for c in cfgs:
            run = SolverConfig(c.algorithm, c.gamma, c.lam, max_iter=200000, fp_tol=1e-10,
                               record_every=200000)
            u, hist = solve(p, run, kkt=False)
            assert hist.converged, c.algorithm
            objs.append(p.objective(u.x))
    spread = (max(objs) - min(objs)) / abs(min(objs))
    print(f"objectives {objs}, relative spread {spread:.3g}, {t.seconds:.2f} s")
    assert spread <= 1e-6
    assert t.seconds < 60.0


def test_c07_linear_rate_bound(criterion):
    criterion(7, "observed contraction <= max(eta1, eta2) + 0.02 on a strongly convex instance")
    with Timer() as t:
        n, r, ridge, w = 20, 30, 1.0, 0.5
        M = 0.3 * rng.normal(3, r * n).reshape(r, n)
        a = rng.normal(4, r)
        B = make_first_difference(n)
        p = ProblemSpec(SmoothFn.least_squares(make_dense(M), a, ridge=ridge),
                        ProxFn.quadratic(w), B, ProxFn.zero())
        H = M.T @ M + ridge * np.eye(n)
        ev = np.linalg.eigvalsh(H)
        gamma = 2.0 / (ev[0] + ev[-1])
        lam = 0.99 / p.opnorm.value
        cfg = SolverConfig("pdfp", gamma, lam)
        validate_config(p, cfg)
        # exact solution of the quadratic problem; v* = (gamma/lam) grad f2(Bx*)
        Bd = B.todense()
        x_star = np.linalg.solve(H + w * Bd.T @ Bd, M.T @ a)
        u_star = PrimalDualState((gamma / lam) * w * (Bd @ x_star), x_star)
        delta = 1.0 / w  # f2* = ||.||^2 / (2w)
        states = collect_states(p, cfg, 60)
        d = weighted_distances(states, u_star, lam, gamma, delta)
        rep = rate_report(states, u_star, lam, gamma, delta,
                          eta2_least_squares(gamma, ev[0], ev[-1]), window=(10, 61))
    print(f"eta1 {rep.eta1:.4f}, eta2 {rep.eta2:.4f}, observed {rep.eta_observed:.4f}, "
          f"final distance {d[-1]:.2e}")
    assert rep.valid and d[-1] > 1e-13  # window stays above the rounding floor
    assert rep.eta_observed <= rep.eta_theoretical + 0.02
    assert t.seconds < 5.0


def test_c08_operator_norm_ground_truth(criterion):
    criterion(8, "power method matches 2-2cos(99pi/100); grad2d estimates stay below 8")
    est = op_norm_sq_estimate(make_first_difference(100))
    assert abs(est.value - (2 - 2 * np.cos(99 * np.pi / 100))) <= 1e-6
    for h, w in [(2, 2), (3, 5), (8, 8), (16, 16), (32, 32), (64, 48)]:
        assert op_norm_sq_estimate(make_grad2d(h, w)).value < 8.0


def test_c09_step_size_gate(criterion):
    criterion(9, "validate enforces each scheme's step-size inequality")
    A, a, _ = synthesize_fused_lasso(FusedLassoSpec(r=20, n=40, seed=1))
    p = build_fused_lasso(A, a, 1.0, 0.0)
    pc = ProblemSpec(p.f1, p.f2, p.B, ProxFn.nonneg())
    est = p.opnorm
    L, beta = est.value, p.beta
    with pytest.raises(StepSizeError):
        validate_config(p, SolverConfig("pdfp", beta, 1.0 / L), est)
    validate_config(p, SolverConfig("pdfp2o", beta, 1.0 / L), est)
    validate_config(pc, SolverConfig("pdfp2oc", beta, 1.0 / (L + 1.0)), est)
    with pytest.raises(StepSizeError):
        validate_config(pc, SolverConfig("pdfp2oc", beta, 1.01 / (L + 1.0)), est)
    # condat: sigma tau L + tau / (2 beta) <= 1 with sigma tau = lam, tau = gamma
    validate_config(p, SolverConfig("condat", beta, 0.5 / L), est)
    validate_config(p, SolverConfig("condat", 1.6 * beta, 0.2 / L), est)
    for gam, lam in [(beta, 0.51 / L), (1.6 * beta, 0.21 / L), (1.9 * beta, 0.19 / L)]:
        with pytest.raises(StepSizeError):
            validate_config(p, SolverConfig("condat", gam, lam), est)


def test_c10_scaled_fused_lasso_support(criterion):
    criterion(10, "r=100, n=1000 fused LASSO: support F1 >= 0.9 within 1500 iterations")
    with Timer() as t:
        scale = 100 / 500
        spec = FusedLassoSpec(r=100, n=1000, mu1=200 * scale, mu2=20 * scale,
                              noise_sigma=0.01, sparsity=3, block_length=50, seed=0)
        A, a, x_true = synthesize_fused_lasso(spec)
        p = build_fused_lasso(A, a, spec.mu1, spec.mu2)
        u, hist = solve(p, SolverConfig("pdfp", 1.99 * p.beta, 0.99 / p.opnorm.value,
                                        max_iter=1500, fp_tol=0.0, record_every=1500),
                        kkt=False)
        precision, recall, f1 = support_metrics(u.x, x_true, 1e-3)
    print(f"precision {precision:.3f}, recall {recall:.3f}, F1 {f1:.3f}, {t.seconds:.2f} s")
    assert hist.iterations <= 1500
    assert f1 >= 0.9
    assert t.seconds < 60.0


def test_c11_prox_property_suite(criterion):
    criterion(11, "firm nonexpansiveness and Moreau identity for every prox kind")
    gen = np.random.default_rng(11)
    dim = 6
    funcs = [ProxFn.l1(0.7), ProxFn.group_l1_pairs(1.3), ProxFn.nonneg(),
             ProxFn.box(-np.ones(dim), np.linspace(0, 2, dim)), ProxFn.zero(),
             ProxFn.quadratic(2.5)]
    with Timer() as t:
        for f in funcs:
            for tstep in (0.1, 1.0, 10.0):
                X, Y = 3 * gen.normal(size=(2, 1000, dim))
                for x, y in zip(X, Y):
                    dp = f.prox(x, tstep) - f.prox(y, tstep)
                    assert dp @ dp <= dp @ (x - y) + 1e-10
                    dr = residual_shrink(f, x, tstep) - residual_shrink(f, y, tstep)
                    assert dr @ dr <= dr @ (x - y) + 1e-10
            for gamma in (0.1, 1.0, 10.0):
                for x in 3 * gen.normal(size=(100, dim)):
                    recon = f.prox(x, gamma) + gamma * conjugate_prox_via_moreau(
                        f, x / gamma, 1.0 / gamma)
                    assert np.linalg.norm(recon - x) <= 1e-10 * (1 + np.linalg.norm(x))
    assert t.seconds < 5.0
