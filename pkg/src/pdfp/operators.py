"""Linear operators and spectral-norm estimation.

All operators act on flat 1-D float arrays.  Images are flattened row-major,
and the 2-D gradient returns the horizontal channel followed by the vertical
channel, each of length ``h * w``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import rng

KINDS = ("dense", "first_difference", "grad2d", "conv2d_periodic", "identity", "zero")


class DimensionError(ValueError):
    """Raised when a vector does not conform to an operator."""


@dataclass(frozen=True, eq=False)
class LinearMap:
    """A linear map ``R^in_dim -> R^out_dim`` with an explicit adjoint.

    Use the ``make_*`` constructors rather than instantiating directly.
    """

    kind: str
    in_dim: int
    out_dim: int
    matrix: Optional[np.ndarray] = field(default=None, repr=False)
    kernel: Optional[np.ndarray] = field(default=None, repr=False)
    shape: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(
                f"operator dimensions must be positive, got {self.out_dim}x{self.in_dim}"
            )

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = _check(x, self.in_dim, f"{self.kind}.apply")
        k = self.kind
        if k == "dense":
            return self.matrix @ x
        if k == "first_difference":
            return np.diff(x)
        if k == "identity":
            return x.copy()
        if k == "zero":
            return np.zeros(self.out_dim)
        h, w = self.shape
        img = x.reshape(h, w)
        if k == "grad2d":
            out = np.zeros((2, h, w))
            out[0, :, :-1] = img[:, 1:] - img[:, :-1]
            out[1, :-1, :] = img[1:, :] - img[:-1, :]
            return out.ravel()
        return _periodic_conv(img, self.kernel, adjoint=False).ravel()

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        y = _check(y, self.out_dim, f"{self.kind}.adjoint")
        k = self.kind
        if k == "dense":
            return self.matrix.T @ y
        if k == "first_difference":
            out = np.zeros(self.in_dim)
            out[:-1] -= y
            out[1:] += y
            return out
        if k == "identity":
            return y.copy()
        if k == "zero":
            return np.zeros(self.in_dim)
        h, w = self.shape
        if k == "grad2d":
            g = y.reshape(2, h, w)
            out = np.zeros((h, w))
            px, py = g[0, :, :-1], g[1, :-1, :]
            out[:, :-1] -= px
            out[:, 1:] += px
            out[:-1, :] -= py
            out[1:, :] += py
            return out.ravel()
        return _periodic_conv(y.reshape(h, w), self.kernel, adjoint=True).ravel()

    __call__ = apply

    def todense(self) -> np.ndarray:
        """Materialize the matrix column by column (desk-scale use only)."""
        if self.kind == "dense":
            return self.matrix.copy()
        eye = np.eye(self.in_dim)
        return np.column_stack([self.apply(eye[:, j]) for j in range(self.in_dim)])


def _check(x, dim: int, where: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != dim:
        raise DimensionError(f"{where}: expected vector of length {dim}, got shape {x.shape}")
    return x


def _periodic_conv(img: np.ndarray, kernel: np.ndarray, adjoint: bool) -> np.ndarray:
    # y[i, j] = sum k[a, b] x[i - a + ca, j - b + cb] (indices mod h, w), kernel
    # centered at (kh // 2, kw // 2).  The adjoint is the matching correlation.
    kh, kw = kernel.shape
    h, w = img.shape
    rows, cols = _wrap_index(h, w, kh, kw, adjoint)
    win = sliding_window_view(img[rows[:, None], cols], (kh, kw))
    taps = kernel if adjoint else kernel[::-1, ::-1]
    return np.tensordot(win, taps, axes=([2, 3], [0, 1]))


@lru_cache(maxsize=64)
def _wrap_index(h: int, w: int, kh: int, kw: int, adjoint: bool):
    ch, cw = kh // 2, kw // 2
    top, left = (ch, cw) if adjoint else (kh - 1 - ch, kw - 1 - cw)
    rows = np.arange(-top, h + kh - 1 - top) % h
    cols = np.arange(-left, w + kw - 1 - left) % w
    return rows, cols


def _positive(*dims: int) -> None:
    for d in dims:
        if int(d) != d or d < 1:
            raise ValueError(f"operator dimensions must be positive integers, got {dims}")


def make_dense(rows) -> LinearMap:
    """Dense matrix operator from a 2-D array (rows x columns)."""
    m = np.array(rows, dtype=float, order="C")
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"dense operator needs a nonempty 2-D array, got shape {m.shape}")
    m.setflags(write=False)
    return LinearMap("dense", in_dim=m.shape[1], out_dim=m.shape[0], matrix=m)


def make_first_difference(n: int) -> LinearMap:
    """``(Bx)_i = x_{i+1} - x_i`` for ``i = 0..n-2``."""
    _positive(n)
    if n < 2:
        raise ValueError(f"first difference needs n >= 2, got {n}")
    return LinearMap("first_difference", in_dim=n, out_dim=n - 1)


def make_grad2d(h: int, w: int) -> LinearMap:
    """Forward-difference image gradient, zero at the last column/row."""
    _positive(h, w)
    return LinearMap("grad2d", in_dim=h * w, out_dim=2 * h * w, shape=(h, w))


def make_conv2d_periodic(kernel, h: int, w: int) -> LinearMap:
    """Direct 2-D convolution with periodic boundary on an ``h x w`` image."""
    _positive(h, w)
    k = np.array(kernel, dtype=float)
    if k.ndim != 2 or k.size == 0:
        raise ValueError(f"kernel must be a nonempty 2-D array, got shape {k.shape}")
    if k.shape[0] > h or k.shape[1] > w:
        raise ValueError(f"kernel {k.shape} larger than image {(h, w)}")
    k.setflags(write=False)
    return LinearMap("conv2d_periodic", in_dim=h * w, out_dim=h * w, kernel=k, shape=(h, w))


def make_identity(n: int) -> LinearMap:
    _positive(n)
    return LinearMap("identity", in_dim=n, out_dim=n)


def make_zero(n: int, m: int) -> LinearMap:
    """Zero map ``R^n -> R^m``."""
    _positive(n, m)
    return LinearMap("zero", in_dim=n, out_dim=m)


def apply(op: LinearMap, x) -> np.ndarray:
    return op.apply(x)


def adjoint(op: LinearMap, y) -> np.ndarray:
    return op.adjoint(y)


@dataclass(frozen=True)
class OpNormEstimate:
    """Power-method estimate of ``lambda_max(B B^T)``."""

    value: float
    iterations_used: int
    converged: bool


def op_norm_sq_estimate(op: LinearMap, tol: float = 1e-9, max_iter: int = 10_000,
                        seed: int = 0) -> OpNormEstimate:
    """Estimate ``lambda_max(B B^T)`` by power iteration on ``v -> B(B^T v)``.

    The iteration stops once the predicted remaining increase of the Rayleigh
    quotient falls below ``tol`` relative to its value.  The prediction
    extrapolates the successive changes geometrically,
    ``d_k * q / (1 - q)`` with ``q = d_k / d_{k-1}``, which avoids stopping
    early when the two leading eigenvalues are close.

    Parameters
    ----------
    op : LinearMap
    tol : float
        Relative tolerance on the Rayleigh quotient.
    max_iter : int
        Iteration budget; on exhaustion the current estimate is returned with
        ``converged=False``.
    seed : int
        Seed for the pseudo-random unit start vector.

    Returns
    -------
    OpNormEstimate
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if op.kind == "zero":
        return OpNormEstimate(0.0, 1, True)

    v = rng.normal(seed, op.out_dim, stream=rng.STREAM_POWER)
    v /= np.linalg.norm(v)
    rho_prev = None
    change_prev = None
    rho = 0.0
    for k in range(1, max_iter + 1):
        w = op.apply(op.adjoint(v))
        rho = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # a random start lies in null(B^T) with probability zero unless B = 0
            return OpNormEstimate(0.0, k, True)
        if rho_prev is not None:
            change = rho - rho_prev
            if change <= tol * abs(rho) * 1e-3:
                return OpNormEstimate(rho, k, True)
            if change_prev is not None and change_prev > 0:
                q = change / change_prev
                remaining = change * q / (1.0 - q) if 0.0 < q < 1.0 else change
                if q < 1.0 and remaining <= tol * abs(rho):
                    return OpNormEstimate(rho, k, True)
            change_prev = change
        rho_prev = rho
        v = w / nw
    return OpNormEstimate(rho, max_iter, False)
