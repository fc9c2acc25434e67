"""Observed vs predicted linear rate on strongly convex quadratic instances.

``f1 = 1/2||Ax - a||^2 + (rho/2)||x||^2``, ``f2 = (w/2)||.||^2`` on first
differences, ``f3 = 0``.  The exact solution comes from one linear solve, so
the distances are exact.  The dual modulus is ``delta = 1/w``; the bound is
``max(eta1, eta2)`` with ``eta1 = 1/sqrt(1 + lam delta/gamma)`` and
``eta2 = max |1 - gamma s|`` over the Hessian spectrum.
"""

import argparse
import itertools

import numpy as np

from pdfp import rng
from pdfp.diagnostics import collect_states, eta2_least_squares, rate_report
from pdfp.operators import make_dense, make_first_difference
from pdfp.prox import ProxFn, SmoothFn
from pdfp.solvers import PrimalDualState, ProblemSpec, SolverConfig


def instance(n, r, rho, w, seed):
    M = 0.3 * rng.normal(seed, r * n).reshape(r, n)
    a = rng.normal(seed + 1, r)
    B = make_first_difference(n)
    p = ProblemSpec(SmoothFn.least_squares(make_dense(M), a, ridge=rho), ProxFn.quadratic(w),
                    B, ProxFn.zero())
    H = M.T @ M + rho * np.eye(n)
    Bd = B.todense()
    x_star = np.linalg.solve(H + w * Bd.T @ Bd, M.T @ a)
    return p, np.linalg.eigvalsh(H), x_star, w * Bd @ x_star


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--iters", type=int, default=60)
    args = ap.parse_args()

    print(f"{'rho':>5} {'w':>5} {'g*beta':>7} {'lam*L':>6} {'eta1':>7} {'eta2':>7} "
          f"{'bound':>7} {'observed':>8}")
    for rho, w, gs, ls in itertools.product((0.5, 2.0), (0.25, 2.0), (0.5, 1.0), (0.5, 0.99)):
        p, ev, x_star, grad2 = instance(args.n, args.n + 10, rho, w, seed=3)
        gamma = gs * p.beta
        lam = ls / p.opnorm.value
        u_star = PrimalDualState((gamma / lam) * grad2, x_star)
        states = collect_states(p, SolverConfig("pdfp", gamma, lam), args.iters)
        rep = rate_report(states, u_star, lam, gamma, 1.0 / w,
                          eta2_least_squares(gamma, ev[0], ev[-1]),
                          window=(args.iters - 50, args.iters + 1))
        print(f"{rho:5.2f} {w:5.2f} {gs:7.2f} {ls:6.2f} {rep.eta1:7.4f} {rep.eta2:7.4f} "
              f"{rep.eta_theoretical:7.4f} {rep.eta_observed:8.4f}")


if __name__ == "__main__":
    main()
