"""Fused LASSO support recovery: PDFP vs Condat at a fixed iteration budget.

Default is the desk-scale instance (r=100, n=1000) with the penalty weights
scaled by r/500 relative to the full-size setting (r=500, n=10000,
mu1=200, mu2=20).  ``--full`` runs the full size (slow: dense 500 x 10000).

Writes recovered signals and histories as CSV into ``--out``.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from pdfp.diagnostics import emit_history_csv, reference_solution, support_metrics
from pdfp.problems import (FusedLassoSpec, build_fused_lasso, relative_error,
                           synthesize_fused_lasso, write_vector_csv)
from pdfp.solvers import SolverConfig, solve


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--iters", type=int, default=1500)
    ap.add_argument("--threshold", type=float, default=1e-3)
    ap.add_argument("--out", type=Path, default=Path("out/fused_lasso_experiment"))
    args = ap.parse_args()

    r, n = (500, 10000) if args.full else (100, 1000)
    scale = r / 500
    spec = FusedLassoSpec(r=r, n=n, mu1=200 * scale, mu2=20 * scale, noise_sigma=0.01,
                          sparsity=3, block_length=50, seed=args.seed)
    A, a, x_true = synthesize_fused_lasso(spec)
    problem = build_fused_lasso(A, a, spec.mu1, spec.mu2)
    L, beta = problem.opnorm.value, problem.beta
    print(f"r={r} n={n} mu1={spec.mu1:g} mu2={spec.mu2:g} beta={beta:.4g} "
          f"lambda_max(BB^T)={L:.6f}")

    configs = {
        "pdfp": SolverConfig("pdfp", 1.99 * beta, 0.99 / L, max_iter=args.iters, fp_tol=0.0),
        # the widest Condat pair with gamma = beta under sigma tau L + tau/(2 beta) <= 1
        "condat": SolverConfig("condat", beta, 0.5 / L, max_iter=args.iters, fp_tol=0.0),
    }
    ref_cfg = SolverConfig("pdfp", 1.99 * beta, 0.99 / L)
    t0 = time.perf_counter()
    x_ref = reference_solution(problem, ref_cfg, big_iter=200_000, fp_tol=1e-11).x
    print(f"reference solution in {time.perf_counter() - t0:.1f} s")

    args.out.mkdir(parents=True, exist_ok=True)
    cols = {"x_true": x_true, "x_ref": x_ref}
    for name, cfg in configs.items():
        t0 = time.perf_counter()
        state, hist = solve(problem, cfg, kkt=False)
        secs = time.perf_counter() - t0
        p, rc, f1 = support_metrics(state.x, x_true, args.threshold)
        print(f"{name:7s} {secs:6.2f} s  objective {problem.objective(state.x):.8g}  "
              f"rel.err(x_true) {relative_error(state.x, x_true):.3e}  "
              f"rel.err(ref) {relative_error(state.x, x_ref):.3e}  "
              f"support P/R/F1 {p:.3f}/{rc:.3f}/{f1:.3f}")
        emit_history_csv(hist, args.out / f"history_{name}.csv")
        cols[name] = state.x
    write_vector_csv(args.out / "signals.csv", cols)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
