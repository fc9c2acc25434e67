"""PDFP and its sibling primal-dual schemes.

Problem: ``min_x f1(x) + f2(Bx) + f3(x)`` with ``f1`` smooth (gradient
``1/beta``-Lipschitz) and ``f2``, ``f3`` proximable.

Every scheme stores its dual in the PDFP scaling, ``v in d((gamma/lam) f2)(Bx)``
at a solution, so residuals and diagnostics are comparable across schemes.
Condat's dual ``vbar`` is recovered as ``(lam/gamma) v``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Iterator, Optional

import numpy as np

from .operators import LinearMap, OpNormEstimate, op_norm_sq_estimate
from .prox import ProxFn, SmoothFn, conjugate_prox_via_moreau, residual_shrink

ALGORITHMS = ("pdfp", "pdfp2o", "pdfp2oc", "condat")

# slack on non-strict step-size inequalities, absorbs rounding in e.g. 1/(L+1)
_LE_SLACK = 1e-12


class StepSizeError(ValueError):
    """The (gamma, lambda) pair violates the scheme's convergence condition."""


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    f1: SmoothFn
    f2: ProxFn
    B: LinearMap
    f3: ProxFn

    @property
    def n(self) -> int:
        return self.B.in_dim

    @property
    def m(self) -> int:
        return self.B.out_dim

    @cached_property
    def opnorm(self) -> OpNormEstimate:
        """Power-method estimate of ``lambda_max(B B^T)``, computed once."""
        return op_norm_sq_estimate(self.B)

    @property
    def beta(self) -> float:
        return self.f1.beta

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        f3 = self.f3.value(x)
        if f3 == np.inf:
            return np.inf
        return self.f1.value(x) + self.f2.value(self.B.apply(x)) + f3


@dataclass
class PrimalDualState:
    """Dual ``v`` (length m), primal ``x`` (length n), and for PDFP2O_C the
    second dual ``v2`` (length n)."""

    v: np.ndarray
    x: np.ndarray
    v2: Optional[np.ndarray] = None

    @classmethod
    def zeros(cls, problem: ProblemSpec, algorithm: str = "pdfp") -> "PrimalDualState":
        v2 = np.zeros(problem.n) if algorithm == "pdfp2oc" else None
        return cls(np.zeros(problem.m), np.zeros(problem.n), v2)

    def copy(self) -> "PrimalDualState":
        return PrimalDualState(self.v.copy(), self.x.copy(),
                               None if self.v2 is None else self.v2.copy())

    def dual(self) -> np.ndarray:
        """All dual components stacked."""
        return self.v if self.v2 is None else np.concatenate([self.v, self.v2])


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str = "pdfp"
    gamma: float = 1.0
    lam: float = 0.25
    max_iter: int = 1000
    fp_tol: float = 1e-8
    record_every: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.max_iter < 1 or self.record_every < 1:
            raise ValueError("max_iter and record_every must be positive")
        if self.fp_tol < 0:
            raise ValueError(f"fp_tol must be nonnegative, got {self.fp_tol}")

    @property
    def sigma(self) -> float:
        """Condat's dual step ``lam / gamma``."""
        return self.lam / self.gamma

    @property
    def tau(self) -> float:
        """Condat's primal step ``gamma``."""
        return self.gamma


def condat_config(sigma: float, tau: float, **kwargs) -> SolverConfig:
    """SolverConfig for Condat's scheme given its native ``(sigma, tau)``."""
    return SolverConfig(algorithm="condat", gamma=tau, lam=sigma * tau, **kwargs)


@dataclass(frozen=True)
class StepBounds:
    """Admissible step-size region for one scheme."""

    algorithm: str
    gamma_max: float  # exclusive; inf when f1 = 0
    lam_max: float
    lam_strict: bool
    condat_sum: bool = False  # mixed inequality lam*L + gamma/(2 beta) <= 1

    def describe(self) -> str:
        g = "(0, inf)" if math.isinf(self.gamma_max) else f"(0, {self.gamma_max:.6g})"
        if self.condat_sum:
            return (f"{self.algorithm}: sigma*tau*lambda_max(BB^T) + tau/(2 beta) <= 1 "
                    f"with sigma=lambda/gamma, tau=gamma; gamma in {g}, "
                    f"lambda <= {self.lam_max:.6g} * (1 - gamma/(2 beta))")
        close = ")" if self.lam_strict else "]"
        return f"{self.algorithm}: gamma in {g}, lambda in (0, {self.lam_max:.6g}{close}"


def step_bounds(problem: ProblemSpec, algorithm: str,
                opnorm: Optional[OpNormEstimate] = None) -> StepBounds:
    L = (opnorm or problem.opnorm).value
    inv = np.inf if L == 0 else 1.0 / L
    gamma_max = 2.0 * problem.beta
    if algorithm == "pdfp":
        return StepBounds(algorithm, gamma_max, inv, True)
    if algorithm == "pdfp2o":
        return StepBounds(algorithm, gamma_max, inv, False)
    if algorithm == "pdfp2oc":
        return StepBounds(algorithm, gamma_max, 1.0 / (L + 1.0), False)
    if algorithm == "condat":
        return StepBounds(algorithm, gamma_max, inv, False, condat_sum=True)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def validate_config(problem: ProblemSpec, cfg: SolverConfig,
                    opnorm: Optional[OpNormEstimate] = None) -> SolverConfig:
    """Return ``cfg`` if its steps satisfy the scheme's condition, else raise.

    * pdfp:    0 < lam < 1/L,        0 < gamma < 2 beta
    * pdfp2o:  0 < lam <= 1/L,       0 < gamma < 2 beta   (f3 must be zero)
    * pdfp2oc: 0 < lam <= 1/(L + 1), 0 < gamma < 2 beta   (f3 an indicator)
    * condat:  lam L + gamma / (2 beta) <= 1   (sigma = lam/gamma, tau = gamma)

    with ``L = lambda_max(B B^T)``.  The gamma bound is void when f1 = 0.
    """
    opnorm = opnorm or problem.opnorm
    L = opnorm.value
    g, lam = cfg.gamma, cfg.lam
    if not (g > 0 and lam > 0):
        raise StepSizeError(f"gamma and lambda must be positive, got gamma={g}, lambda={lam}")
    if cfg.algorithm == "pdfp2o" and not problem.f3.is_zero:
        raise StepSizeError(f"pdfp2o requires f3 = 0, got f3 of kind {problem.f3.kind}")
    if cfg.algorithm == "pdfp2oc" and not problem.f3.is_indicator:
        raise StepSizeError(f"pdfp2oc requires f3 to be an indicator, got {problem.f3.kind}")

    b = step_bounds(problem, cfg.algorithm, opnorm)
    if b.condat_sum:
        lhs = lam * L + (0.0 if math.isinf(problem.beta) else g / (2.0 * problem.beta))
        if lhs > 1.0 + _LE_SLACK:
            raise StepSizeError(
                f"condat: sigma*tau*lambda_max(BB^T) + tau/(2 beta) = {lhs:.6g} > 1 "
                f"(sigma={cfg.sigma:.6g}, tau={cfg.tau:.6g}, lambda_max={L:.6g}, "
                f"beta={problem.beta:.6g})")
        return cfg
    if not g < b.gamma_max:
        raise StepSizeError(
            f"{cfg.algorithm}: gamma={g:.6g} violates 0 < gamma < 2 beta = {b.gamma_max:.6g}")
    if b.lam_strict:
        ok = lam < b.lam_max
        rel = "<"
    else:
        ok = lam <= b.lam_max * (1.0 + _LE_SLACK)
        rel = "<="
    if not ok:
        what = "1/(lambda_max(BB^T) + 1)" if cfg.algorithm == "pdfp2oc" else "1/lambda_max(BB^T)"
        raise StepSizeError(
            f"{cfg.algorithm}: lambda={lam:.6g} violates 0 < lambda {rel} {what} = "
            f"{b.lam_max:.10g} (lambda_max(BB^T)={L:.10g})")
    return cfg


def _gradient_step(problem: ProblemSpec, cfg: SolverConfig, x: np.ndarray) -> np.ndarray:
    if problem.f1.is_zero:
        return x
    return x - cfg.gamma * problem.f1.grad(x)


def pdfp_step(problem: ProblemSpec, cfg: SolverConfig, state: PrimalDualState):
    """One PDFP iteration; returns ``(next_state, y)``.

    ``y   = prox_{gamma f3}(x - gamma grad f1(x) - lam B^T v)``
    ``v+  = (I - prox_{(gamma/lam) f2})(B y + v)``
    ``x+  = prox_{gamma f3}(x - gamma grad f1(x) - lam B^T v+)``
    """
    gamma, lam, B = cfg.gamma, cfg.lam, problem.B
    g = _gradient_step(problem, cfg, state.x)
    y = problem.f3.prox(g - lam * B.adjoint(state.v), gamma)
    v = residual_shrink(problem.f2, B.apply(y) + state.v, gamma / lam)
    x = problem.f3.prox(g - lam * B.adjoint(v), gamma)
    return PrimalDualState(v, x), y


def pdfp2o_step(problem: ProblemSpec, cfg: SolverConfig, state: PrimalDualState):
    """PDFP with ``f3 = 0`` (the prox of f3 becomes the identity)."""
    if not problem.f3.is_zero:
        raise ValueError(f"pdfp2o requires f3 = 0, got f3 of kind {problem.f3.kind}")
    gamma, lam, B = cfg.gamma, cfg.lam, problem.B
    g = _gradient_step(problem, cfg, state.x)
    y = g - lam * B.adjoint(state.v)
    v = residual_shrink(problem.f2, B.apply(y) + state.v, gamma / lam)
    x = g - lam * B.adjoint(v)
    return PrimalDualState(v, x), y


def pdfp2oc_step(problem: ProblemSpec, cfg: SolverConfig, state: PrimalDualState):
    """PDFP2O_C for ``f3 = indicator of C``: an extra dual ``v2`` handles C.

    Iterates are not necessarily feasible.
    """
    f3 = problem.f3
    if not f3.is_indicator:
        raise ValueError(f"pdfp2oc requires f3 to be an indicator, got {f3.kind}")
    gamma, lam, B = cfg.gamma, cfg.lam, problem.B
    v2 = state.v2 if state.v2 is not None else np.zeros(problem.n)
    g = _gradient_step(problem, cfg, state.x)
    y = g - lam * B.adjoint(state.v) - lam * v2
    v1_new = residual_shrink(problem.f2, B.apply(y) + state.v, gamma / lam)
    t = y + v2
    v2_new = t - f3.project(t)
    x = g - lam * B.adjoint(v1_new) - lam * v2_new
    return PrimalDualState(v1_new, x, v2_new), y


def condat_step(problem: ProblemSpec, cfg: SolverConfig, state: PrimalDualState):
    """Condat's scheme (no overrelaxation) with ``sigma = lam/gamma``, ``tau = gamma``.

    ``vbar+ = prox_{sigma f2*}(sigma B x + vbar)``
    ``x+    = prox_{tau f3}(x - tau grad f1(x) - tau B^T (2 vbar+ - vbar))``
    """
    sigma, tau, B = cfg.sigma, cfg.tau, problem.B
    vbar = sigma * state.v
    vbar_new = conjugate_prox_via_moreau(problem.f2, sigma * B.apply(state.x) + vbar, sigma)
    g = _gradient_step(problem, cfg, state.x)
    x = problem.f3.prox(g - tau * B.adjoint(2.0 * vbar_new - vbar), tau)
    return PrimalDualState(vbar_new / sigma, x), None


STEPS = {
    "pdfp": pdfp_step,
    "pdfp2o": pdfp2o_step,
    "pdfp2oc": pdfp2oc_step,
    "condat": condat_step,
}


def lambda_norm(dv, dx, lam: float) -> float:
    """``sqrt(lam ||dv||^2 + ||dx||^2)``."""
    dv = np.asarray(dv, dtype=float)
    dx = np.asarray(dx, dtype=float)
    return math.sqrt(lam * float(dv @ dv) + float(dx @ dx))


def state_distance(a: PrimalDualState, b: PrimalDualState, lam: float) -> float:
    """lambda-norm of ``a - b`` over all dual blocks and the primal."""
    return lambda_norm(a.dual() - b.dual(), a.x - b.x, lam)


def m_norm(v, B: LinearMap, lam: float) -> float:
    """``sqrt(<v, (I - lam B B^T) v>)``; raises if the form is not PSD at v."""
    v = np.asarray(v, dtype=float)
    inner = float(v @ (v - lam * B.apply(B.adjoint(v))))
    if inner < -1e-12:
        raise ValueError(f"I - lam B B^T is not positive at v (<v, Mv> = {inner:.3g}); "
                         f"lam={lam} exceeds 1/lambda_max(BB^T)")
    return math.sqrt(max(inner, 0.0))


def feasibility_violation(problem: ProblemSpec, x: np.ndarray) -> float:
    """Max-norm distance of ``x`` to the constraint set (0 without constraints)."""
    if problem.f3.is_indicator and not problem.f3.is_zero:
        return float(np.max(np.abs(x - problem.f3.project(x)), initial=0.0))
    return 0.0


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    objective: float
    fp_residual_lambda: float
    kkt_residual: float
    feasibility_violation: float
    elapsed_ms: float


@dataclass
class History:
    """Recorded diagnostics of one solver run."""

    records: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    fp_residual: float = math.inf

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]


def iterate(problem: ProblemSpec, cfg: SolverConfig,
            state: Optional[PrimalDualState] = None) -> Iterator[PrimalDualState]:
    """Yield ``u^1, u^2, ...`` forever (the Picard iteration of the scheme)."""
    step = STEPS[cfg.algorithm]
    u = state.copy() if state is not None else PrimalDualState.zeros(problem, cfg.algorithm)
    if cfg.algorithm == "pdfp2oc" and u.v2 is None:
        u.v2 = np.zeros(problem.n)
    while True:
        u, _ = step(problem, cfg, u)
        yield u


def solve(problem: ProblemSpec, cfg: SolverConfig,
          state: Optional[PrimalDualState] = None, *,
          validate: bool = True,
          callback: Optional[Callable[[int, PrimalDualState], None]] = None,
          kkt: bool = True, timing: bool = True):
    """Run the configured scheme until ``||u^{k+1} - u^k||_lam <= fp_tol`` or
    ``max_iter``.

    Parameters
    ----------
    problem, cfg
        Problem and solver configuration.
    state : PrimalDualState, optional
        Starting point; zeros by default.
    validate : bool
        Check the step sizes with :func:`validate_config` first.
    callback : callable, optional
        Called as ``callback(k, state)`` after every iteration ``k >= 1``.
    kkt : bool
        Compute the KKT residual for recorded iterations.
    timing : bool
        Fill ``elapsed_ms``; when False it is recorded as 0 so histories are
        bit-reproducible.

    Returns
    -------
    (PrimalDualState, History)
        Records are taken every ``record_every`` iterations and at the final
        iteration.
    """
    from .problems import kkt_residual

    if validate:
        validate_config(problem, cfg)
    hist = History()
    t0 = time.perf_counter()
    prev = state.copy() if state is not None else PrimalDualState.zeros(problem, cfg.algorithm)
    if cfg.algorithm == "pdfp2oc" and prev.v2 is None:
        prev.v2 = np.zeros(problem.n)
    u = prev
    res = math.inf
    for k, u in enumerate(iterate(problem, cfg, prev), start=1):
        res = state_distance(u, prev, cfg.lam)
        if callback is not None:
            callback(k, u)
        done = res <= cfg.fp_tol
        last = done or k == cfg.max_iter
        if k % cfg.record_every == 0 or last:
            hist.records.append(IterationRecord(
                iter=k,
                objective=problem.objective(u.x),
                fp_residual_lambda=res,
                kkt_residual=(kkt_residual(problem, u.x, u.v, cfg.gamma, cfg.lam)
                              if kkt else math.nan),
                feasibility_violation=feasibility_violation(problem, u.x),
                elapsed_ms=(time.perf_counter() - t0) * 1e3 if timing else 0.0,
            ))
        if last:
            hist.converged = done
            hist.iterations = k
            break
        prev = u
    hist.fp_residual = res
    return u, hist


def with_steps(cfg: SolverConfig, gamma: float, lam: float) -> SolverConfig:
    return replace(cfg, gamma=gamma, lam=lam)
