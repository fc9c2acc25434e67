"""Convergence diagnostics: reference solutions, brute-force oracle, distance
monotonicity, linear-rate checks, support recovery and CSV histories."""

from __future__ import annotations

import csv
import itertools
import math
import os
import warnings
from dataclasses import dataclass, fields, replace
from typing import Optional, Sequence

import numpy as np

from .problems import kkt_residual
from .solvers import (History, IterationRecord, PrimalDualState, ProblemSpec, SolverConfig,
                      lambda_norm, solve)

HISTORY_HEADER = ("iter", "objective", "fp_residual_lambda", "kkt_residual",
                  "feasibility_violation", "elapsed_ms")


class NonConvergenceWarning(RuntimeWarning):
    pass


def reference_solution(problem: ProblemSpec, cfg: SolverConfig, big_iter: int = 1_000_000,
                       fp_tol: float = 1e-13) -> PrimalDualState:
    """High-accuracy solution: run ``cfg`` for up to ``big_iter`` iterations or
    until the fixed-point residual drops to ``fp_tol``.

    Warns with :class:`NonConvergenceWarning` if the KKT residual of the result
    exceeds 1e-6.
    """
    run = replace(cfg, max_iter=big_iter, fp_tol=fp_tol, record_every=big_iter)
    state, _ = solve(problem, run, kkt=False, timing=False)
    kkt = kkt_residual(problem, state.x, state.v, cfg.gamma, cfg.lam)
    if kkt > 1e-6:
        warnings.warn(f"reference solution not converged: KKT residual {kkt:.3g}",
                      NonConvergenceWarning, stacklevel=2)
    return state


def _convex_argmin_last_axis(f, lo_idx: int, hi_idx: int):
    """First minimizing index of a convex sequence ``f(j)``, vectorized.

    ``f`` maps an integer index array to values, one per independent line.
    For convex sequences the forward difference is nondecreasing, so the first
    ``j`` with ``f(j+1) >= f(j)`` is the first minimizer.
    """
    a = np.full(f.lines, lo_idx, dtype=np.int64)
    b = np.full(f.lines, hi_idx, dtype=np.int64)
    while True:
        open_ = a < b
        if not open_.any():
            return a
        mid = (a + b) // 2
        rising = f(mid + 1) >= f(mid)
        b = np.where(open_ & rising, mid, b)
        a = np.where(open_ & ~rising, mid + 1, a)


def grid_oracle(problem: ProblemSpec, lo: float, hi: float, step: float):
    """Minimize the objective over the grid ``{lo, lo + step, ..} ^ n``, n <= 3.

    Returns ``(x_star, value)``; ties go to the first point in lexicographic
    order.  All leading coordinates are enumerated exhaustively; the last one is
    resolved exactly by bisection on forward differences, which is valid
    because the objective restricted to a grid line is a convex sequence.  Box
    constraints in ``f3`` are applied by trimming the grid.
    """
    n = problem.n
    if n > 3:
        raise ValueError(f"grid oracle is limited to n <= 3, got n={n}")
    if not (lo < hi and step > 0):
        raise ValueError(f"need lo < hi and step > 0, got lo={lo}, hi={hi}, step={step}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1

    lo_i = np.zeros(n, dtype=np.int64)
    hi_i = np.full(n, count - 1, dtype=np.int64)
    f3 = problem.f3
    if f3.kind in ("indicator_nonneg", "indicator_box"):
        blo = np.zeros(n) if f3.kind == "indicator_nonneg" else np.broadcast_to(f3.lo, n)
        bhi = np.full(n, np.inf) if f3.kind == "indicator_nonneg" else np.broadcast_to(f3.hi, n)
        with np.errstate(invalid="ignore", over="ignore"):
            lo_i = np.maximum(lo_i, np.ceil((blo - lo) / step - 1e-9)).astype(np.int64)
            hi_i = np.minimum(hi_i, np.where(np.isinf(bhi), count - 1,
                                             np.floor((np.minimum(bhi, hi) - lo) / step + 1e-9))
                              ).astype(np.int64)
        if np.any(lo_i > hi_i):
            raise ValueError("constraint set does not meet the grid")

    lead = [np.arange(lo_i[d], hi_i[d] + 1) for d in range(n - 1)]
    if lead:
        mesh = np.stack([g.ravel() for g in np.meshgrid(*lead, indexing="ij")], axis=1)
    else:
        mesh = np.zeros((1, 0), dtype=np.int64)
    coords_lead = lo + step * mesh

    obj = _batched_objective(problem)

    def line(idx):
        pts = np.column_stack([coords_lead, lo + step * idx])
        return obj(pts)

    line.lines = mesh.shape[0]
    best_last = _convex_argmin_last_axis(line, int(lo_i[-1]), int(hi_i[-1]))
    vals = line(best_last)
    k = int(np.argmin(vals))
    x_star = np.append(coords_lead[k], lo + step * best_last[k])
    return x_star, float(problem.objective(x_star))


def _batched_objective(problem: ProblemSpec):
    """Objective over the rows of a ``(N, n)`` array (small n)."""
    B = problem.B.todense()
    f1 = problem.f1
    if not f1.is_zero:
        A = f1.A.todense()
        a = f1.a

    def value(X):
        out = np.zeros(X.shape[0])
        if not f1.is_zero:
            R = X @ A.T - a
            out += 0.5 * np.einsum("ij,ij->i", R, R)
            if f1.ridge:
                out += 0.5 * f1.ridge * np.einsum("ij,ij->i", X, X)
        out += _rowwise(problem.f2, X @ B.T)
        out += _rowwise(problem.f3, X)
        return out

    return value


def _rowwise(f, Y):
    if f.is_zero:
        return 0.0
    if f.kind == "l1":
        return f.weight * np.abs(Y).sum(axis=1)
    if f.kind == "quadratic":
        return 0.5 * f.weight * np.einsum("ij,ij->i", Y, Y)
    if f.kind == "group_l1_pairs":
        m = Y.shape[1] // 2
        return f.weight * np.hypot(Y[:, :m], Y[:, m:]).sum(axis=1)
    return np.array([f.value(y) for y in Y])


def monotonicity_check(states: Sequence[PrimalDualState], u_star: PrimalDualState,
                       lam: float) -> float:
    """Largest increase ``max_k ||u^{k+1} - u*||_lam - ||u^k - u*||_lam``, floored at 0."""
    d = [_dist(u, u_star, lam) for u in states]
    if len(d) < 2:
        return 0.0
    return max(0.0, float(np.max(np.diff(d))))


def _dist(u, u_star, lam):
    return lambda_norm(u.dual() - u_star.dual(), u.x - u_star.x, lam)


def weighted_distances(states, u_star, lam: float, gamma: float = 1.0,
                       delta: float = 0.0) -> np.ndarray:
    """``||u^k - u*||`` in the norm with dual weight ``(1 + lam delta / gamma) lam``."""
    w = (1.0 + lam * delta / gamma) * lam
    return np.array([_dist(u, u_star, w) for u in states])


def rate_estimate(states: Sequence[PrimalDualState], u_star: PrimalDualState, lam: float,
                  window: Optional[tuple[int, int]] = None, gamma: float = 1.0,
                  delta: float = 0.0) -> float:
    """Geometric-mean contraction ratio of successive weighted distances.

    ``window = (start, end)`` indexes ``states`` (end exclusive); by default the
    first 20% is skipped.  The window is cut before the first zero distance.
    """
    d = weighted_distances(states, u_star, lam, gamma, delta)
    start, end = window if window is not None else (len(d) // 5, len(d))
    d = d[start:end]
    zero = np.flatnonzero(d == 0.0)
    if zero.size:
        if zero[0] <= 1:
            # exact convergence at the start of the window
            return 0.0
        d = d[:zero[0]]
    if d.size < 2:
        raise ValueError("rate window needs at least two nonzero distances")
    return float(np.exp(np.mean(np.log(d[1:] / d[:-1]))))


@dataclass(frozen=True)
class RateReport:
    eta_theoretical: float
    eta1: float
    eta2: float
    delta: float
    valid: bool
    eta_observed: Optional[float] = None
    window: Optional[tuple[int, int]] = None


def theoretical_rate(lam: float, gamma: float, delta: float, eta2: float) -> RateReport:
    """Linear-rate bound ``eta = max(eta1, eta2)`` with ``eta1 = 1/sqrt(1 + lam delta/gamma)``.

    ``delta`` is the strong-monotonicity modulus of the subdifferential of
    ``f2*`` (for ``f2 = (w/2)||.||^2`` it is ``1/w``); ``eta2`` is a Lipschitz
    bound of ``x -> x - gamma grad f1(x)``.  ``valid`` is False when
    ``eta2 >= 1``.
    """
    if not (lam > 0 and gamma > 0 and delta >= 0):
        raise ValueError("need lam > 0, gamma > 0 and delta >= 0")
    eta1 = 1.0 / math.sqrt(1.0 + lam * delta / gamma)
    valid = 0.0 <= eta2 < 1.0
    return RateReport(max(eta1, eta2), eta1, eta2, delta, valid)


def eta2_least_squares(gamma: float, lmin: float, lmax: float) -> float:
    """``max |1 - gamma s|`` over Hessian eigenvalues ``s in [lmin, lmax]``."""
    return max(abs(1.0 - gamma * lmin), abs(1.0 - gamma * lmax))


def rate_report(states, u_star, lam: float, gamma: float, delta: float, eta2: float,
                window: Optional[tuple[int, int]] = None) -> RateReport:
    rep = theoretical_rate(lam, gamma, delta, eta2)
    if window is None:
        window = (len(states) // 5, len(states))
    obs = rate_estimate(states, u_star, lam, window, gamma, delta)
    return replace(rep, eta_observed=obs, window=window)


def support_metrics(x_est, x_true, threshold: float = 1e-3):
    """Precision, recall and F1 of ``{i : |x_i| > threshold}``.

    Empty predicted support gives precision 1 (nothing claimed), empty true
    support gives recall 1; F1 is 0 when both are 0.
    """
    est = np.abs(np.asarray(x_est, dtype=float)) > threshold
    true = np.abs(np.asarray(x_true, dtype=float)) > threshold
    if est.shape != true.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {true.shape}")
    tp = int(np.sum(est & true))
    precision = tp / est.sum() if est.any() else 1.0
    recall = tp / true.sum() if true.any() else 1.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return float(precision), float(recall), float(f1)


def emit_history_csv(history, destination) -> None:
    """Write records with the fixed header; floats use shortest round-trip repr."""
    records = history.records if isinstance(history, History) else history
    try:
        with open(destination, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(HISTORY_HEADER)
            for r in records:
                w.writerow([str(r.iter)] + [repr(float(getattr(r, k)))
                                            for k in HISTORY_HEADER[1:]])
    except OSError as exc:
        raise OSError(f"cannot write history to {os.fspath(destination)}: {exc}") from exc


def read_history_csv(source) -> list[IterationRecord]:
    with open(source, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != HISTORY_HEADER:
        raise ValueError(f"{os.fspath(source)}: unexpected header {rows[0]}")
    names = [f.name for f in fields(IterationRecord)]
    return [IterationRecord(**{k: (int(v) if k == "iter" else float(v))
                               for k, v in zip(names, row)}) for row in rows[1:]]


def collect_states(problem: ProblemSpec, cfg: SolverConfig, n_iter: int,
                   state: Optional[PrimalDualState] = None) -> list[PrimalDualState]:
    """``[u^0, u^1, ..., u^n_iter]`` for the configured scheme (no stopping)."""
    from .solvers import iterate

    u0 = state.copy() if state is not None else PrimalDualState.zeros(problem, cfg.algorithm)
    if cfg.algorithm == "pdfp2oc" and u0.v2 is None:
        u0.v2 = np.zeros(problem.n)
    return [u0] + list(itertools.islice(iterate(problem, cfg, u0), n_iter))
