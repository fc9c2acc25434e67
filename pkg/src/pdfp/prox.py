"""Proximity operators and smooth data-fidelity terms.

``ProxFn.prox(x, t)`` always means ``prox_{t f}(x)``: the minimizer of
``f(y) + ||x - y||^2 / (2 t)``.  The ``weight`` of a ProxFn is folded into
``f`` itself, so ``ProxFn.l1(mu).prox(x, t)`` soft-thresholds at ``mu * t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .operators import LinearMap, op_norm_sq_estimate

PROX_KINDS = ("l1", "group_l1_pairs", "indicator_nonneg", "indicator_box", "zero",
              "quadratic", "custom")
INDICATOR_KINDS = ("indicator_nonneg", "indicator_box", "zero")


def _check_step(t: float) -> None:
    if not t > 0:
        raise ValueError(f"prox step must be positive, got {t}")


def prox_l1(x, t: float) -> np.ndarray:
    """Soft thresholding ``sign(x) * max(|x| - t, 0)``; ``|x| == t`` maps to 0."""
    _check_step(t)
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def prox_group_l1_pairs(p, q, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Shrink each pair ``(p_i, q_i)`` toward zero by Euclidean length ``t``."""
    _check_step(t)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"pair channels differ in length: {p.shape} vs {q.shape}")
    norm = np.hypot(p, q)
    scale = np.zeros_like(norm)
    big = norm > t
    scale[big] = 1.0 - t / norm[big]
    return scale * p, scale * q


def project_nonneg(x) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=float), 0.0)


def project_box(x, lo, hi) -> np.ndarray:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("box bounds are inverted (lo > hi)")
    return np.clip(np.asarray(x, dtype=float), lo, hi)


def prox_quadratic(x, t: float, w: float) -> np.ndarray:
    """Prox of ``(w/2) ||.||^2``: ``x / (1 + t w)``."""
    _check_step(t)
    if w < 0:
        raise ValueError(f"quadratic weight must be nonnegative, got {w}")
    return np.asarray(x, dtype=float) / (1.0 + t * w)


@dataclass(frozen=True, eq=False)
class ProxFn:
    """A proper closed convex function with an inexpensive prox.

    Build instances with the classmethods (``ProxFn.l1(mu)``, ...).  A
    ``custom`` function takes ``prox(x, t)`` and ``value(x)`` callables.
    """

    kind: str
    weight: float = 1.0
    lo: object = None
    hi: object = None
    custom_prox: Optional[Callable] = field(default=None, repr=False)
    custom_value: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in PROX_KINDS:
            raise ValueError(f"unknown prox kind {self.kind!r}")
        if self.weight < 0:
            raise ValueError(f"weight must be nonnegative, got {self.weight}")
        if self.kind == "indicator_box" and np.any(np.asarray(self.lo) > np.asarray(self.hi)):
            raise ValueError("box bounds are inverted (lo > hi)")
        if self.kind == "custom" and (self.custom_prox is None or self.custom_value is None):
            raise ValueError("custom ProxFn needs both prox and value callables")

    @classmethod
    def l1(cls, weight: float = 1.0) -> "ProxFn":
        return cls("l1", weight)

    @classmethod
    def group_l1_pairs(cls, weight: float = 1.0) -> "ProxFn":
        """Isotropic ``weight * sum_i ||(p_i, q_i)||`` on a vector ``[p, q]``."""
        return cls("group_l1_pairs", weight)

    @classmethod
    def nonneg(cls) -> "ProxFn":
        return cls("indicator_nonneg")

    @classmethod
    def box(cls, lo, hi) -> "ProxFn":
        return cls("indicator_box", lo=lo, hi=hi)

    @classmethod
    def zero(cls) -> "ProxFn":
        return cls("zero")

    @classmethod
    def quadratic(cls, weight: float) -> "ProxFn":
        return cls("quadratic", weight)

    @classmethod
    def custom(cls, prox: Callable, value: Callable) -> "ProxFn":
        return cls("custom", custom_prox=prox, custom_value=value)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind in ("l1", "group_l1_pairs", "quadratic")
                                       and self.weight == 0)

    @property
    def is_indicator(self) -> bool:
        return self.kind in INDICATOR_KINDS

    def prox(self, x, t: float) -> np.ndarray:
        """``prox_{t f}(x)``."""
        _check_step(t)
        x = np.asarray(x, dtype=float)
        k = self.kind
        if self.is_zero:
            return x.copy()
        if k == "l1":
            return prox_l1(x, t * self.weight)
        if k == "group_l1_pairs":
            p, q = _split_pairs(x)
            p, q = prox_group_l1_pairs(p, q, t * self.weight)
            return np.concatenate([p, q])
        if k == "indicator_nonneg":
            return project_nonneg(x)
        if k == "indicator_box":
            return project_box(x, self.lo, self.hi)
        if k == "quadratic":
            return prox_quadratic(x, t, self.weight)
        return np.asarray(self.custom_prox(x, t), dtype=float)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        k = self.kind
        if self.is_zero:
            return 0.0
        if k == "l1":
            return self.weight * float(np.abs(x).sum())
        if k == "group_l1_pairs":
            p, q = _split_pairs(x)
            return self.weight * float(np.hypot(p, q).sum())
        if k == "indicator_nonneg":
            return 0.0 if np.all(x >= 0) else np.inf
        if k == "indicator_box":
            return 0.0 if np.all((x >= self.lo) & (x <= self.hi)) else np.inf
        if k == "quadratic":
            return 0.5 * self.weight * float(x @ x)
        return float(self.custom_value(x))

    def project(self, x) -> np.ndarray:
        """Projection onto the set this indicator encodes."""
        if not self.is_indicator:
            raise ValueError(f"{self.kind} is not an indicator function")
        return self.prox(x, 1.0)

    def __call__(self, x) -> float:
        return self.value(x)


def _split_pairs(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if x.shape[0] % 2:
        raise ValueError(f"pair vector must have even length, got {x.shape[0]}")
    m = x.shape[0] // 2
    return x[:m], x[m:]


def conjugate_prox_via_moreau(f: ProxFn, x, t: float) -> np.ndarray:
    """``prox_{t f*}(x) = x - t prox_{f/t}(x/t)``."""
    _check_step(t)
    x = np.asarray(x, dtype=float)
    if f.is_zero:
        # f* is the indicator of {0}
        return np.zeros_like(x)
    return x - t * f.prox(x / t, 1.0 / t)


def residual_shrink(f: ProxFn, x, t: float) -> np.ndarray:
    """``(I - prox_{t f})(x)``."""
    x = np.asarray(x, dtype=float)
    return x - f.prox(x, t)


@dataclass(frozen=True, eq=False)
class SmoothFn:
    """Smooth term ``f1``: ``1/2 ||Ax - a||^2 + (ridge/2) ||x||^2`` or zero.

    ``beta`` is the inverse Lipschitz constant of the gradient; it is
    ``+inf`` for the zero function and ``1 / (lambda_max(A^T A) + ridge)``
    otherwise, with the spectral value estimated by power iteration unless
    given explicitly.
    """

    kind: str
    A: Optional[LinearMap] = None
    a: Optional[np.ndarray] = field(default=None, repr=False)
    ridge: float = 0.0
    lipschitz: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("least_squares", "zero"):
            raise ValueError(f"unknown smooth kind {self.kind!r}")
        if self.kind == "least_squares":
            if self.A is None or self.a is None:
                raise ValueError("least_squares needs A and a")
            a = np.asarray(self.a, dtype=float)
            if a.shape != (self.A.out_dim,):
                raise ValueError(f"a has shape {a.shape}, expected ({self.A.out_dim},)")
            object.__setattr__(self, "a", a)
        if self.ridge < 0:
            raise ValueError(f"ridge must be nonnegative, got {self.ridge}")

    @classmethod
    def least_squares(cls, A: LinearMap, a, ridge: float = 0.0,
                      lipschitz: Optional[float] = None) -> "SmoothFn":
        return cls("least_squares", A, a, ridge, lipschitz)

    @classmethod
    def zero(cls) -> "SmoothFn":
        return cls("zero")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    @cached_property
    def beta(self) -> float:
        if self.is_zero:
            return np.inf
        L = self.lipschitz
        if L is None:
            L = op_norm_sq_estimate(self.A).value + self.ridge
        return np.inf if L == 0 else 1.0 / L

    def value(self, x) -> float:
        if self.is_zero:
            return 0.0
        x = np.asarray(x, dtype=float)
        r = self.A.apply(x) - self.a
        return 0.5 * float(r @ r) + 0.5 * self.ridge * float(x @ x)

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_zero:
            return np.zeros_like(x)
        g = self.A.adjoint(self.A.apply(x) - self.a)
        if self.ridge:
            g = g + self.ridge * x
        return g

    def __call__(self, x) -> float:
        return self.value(x)
