"""Benchmark problems: fused LASSO and constrained TV restoration.

Also holds the solver-independent KKT residual and plain-text IO (ASCII PGM
images, one-column CSV vectors).
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng
from .operators import (LinearMap, make_conv2d_periodic, make_dense, make_first_difference,
                        make_grad2d)
from .prox import ProxFn, SmoothFn, residual_shrink
from .solvers import ProblemSpec


@dataclass(frozen=True)
class FusedLassoSpec:
    """Synthetic fused LASSO instance ``1/2||Ax - a||^2 + mu1 ||Bx||_1 + mu2 ||x||_1``.

    ``x_true`` has ``sparsity`` constant blocks of ``block_length`` entries.
    """

    r: int = 50
    n: int = 200
    mu1: float = 1.0
    mu2: float = 0.1
    noise_sigma: float = 0.01
    sparsity: int = 4
    seed: int = 0
    block_length: int = 10

    def __post_init__(self):
        if self.r < 1 or self.n < 2:
            raise ValueError(f"need r >= 1 and n >= 2, got r={self.r}, n={self.n}")
        if self.mu1 < 0 or self.mu2 < 0 or self.noise_sigma < 0:
            raise ValueError("mu1, mu2 and noise_sigma must be nonnegative")
        if self.sparsity < 0 or self.block_length < 1:
            raise ValueError("sparsity must be >= 0 and block_length >= 1")
        if self.sparsity * self.block_length > self.n:
            raise ValueError(f"{self.sparsity} blocks of length {self.block_length} "
                             f"do not fit in n={self.n}")


@dataclass(frozen=True)
class TvRestorationSpec:
    """Synthetic deblurring instance ``min_{x in C} 1/2||Ax - a||^2 + mu TV(x)``.

    ``kernel`` is ``"box"`` (uniform ``kernel_size`` square), ``"gaussian"``
    (``kernel_size`` square, std ``kernel_sigma``) or ``"identity"`` (pure
    denoising).  ``x_true`` is a checkerboard with ``tile``-pixel squares
    unless an image is supplied to :func:`synthesize_tv_restoration`.
    """

    height: int = 16
    width: int = 16
    kernel: str = "gaussian"
    kernel_size: int = 3
    kernel_sigma: float = 1.0
    mu: float = 0.05
    noise_sigma: float = 0.05
    nonneg: bool = True
    seed: int = 0
    tile: int = 4

    def __post_init__(self):
        if self.height < 2 or self.width < 2:
            raise ValueError(f"image must be at least 2x2, got {self.height}x{self.width}")
        if self.mu < 0 or self.noise_sigma < 0:
            raise ValueError("mu and noise_sigma must be nonnegative")
        if self.kernel not in ("box", "gaussian", "identity"):
            raise ValueError(f"unknown kernel {self.kernel!r}")


def synthesize_fused_lasso(spec: FusedLassoSpec):
    """Draw ``(A, a, x_true)`` with ``a = A x_true + sigma e``.

    ``A`` and ``e`` are standard normal.  The ``n`` coordinates are cut into
    ``sparsity`` equal segments; each segment holds one block at a seeded
    offset, with a seeded sign and magnitude in ``[1, 2)``.
    """
    r, n = spec.r, spec.n
    A = rng.normal(spec.seed, r * n, stream=rng.STREAM_DESIGN).reshape(r, n)
    e = rng.normal(spec.seed, r, stream=rng.STREAM_NOISE)

    x_true = np.zeros(n)
    k, L = spec.sparsity, spec.block_length
    if k:
        u = rng.uniform(spec.seed, 3 * k, stream=rng.STREAM_SIGNAL).reshape(k, 3)
        seg = n // k
        for i in range(k):
            start = i * seg + int(u[i, 0] * (seg - L + 1))
            sign = 1.0 if u[i, 1] < 0.5 else -1.0
            x_true[start:start + L] = sign * (1.0 + u[i, 2])
    a = A @ x_true + spec.noise_sigma * e
    return make_dense(A), a, x_true


def build_fused_lasso(A: LinearMap, a, mu1: float, mu2: float,
                      lipschitz: Optional[float] = None) -> ProblemSpec:
    """``f1 = 1/2||Ax - a||^2``, ``f2 = mu1 ||.||_1`` on first differences,
    ``f3 = mu2 ||.||_1`` (the zero function when ``mu2 == 0``)."""
    a = np.asarray(a, dtype=float)
    if a.shape != (A.out_dim,):
        raise ValueError(f"a has shape {a.shape}, expected ({A.out_dim},)")
    f2 = ProxFn.l1(mu1) if mu1 > 0 else ProxFn.zero()
    f3 = ProxFn.l1(mu2) if mu2 > 0 else ProxFn.zero()
    return ProblemSpec(SmoothFn.least_squares(A, a, lipschitz=lipschitz), f2,
                       make_first_difference(A.in_dim), f3)


def make_kernel(spec: TvRestorationSpec) -> np.ndarray:
    if spec.kernel == "identity":
        return np.ones((1, 1))
    s = spec.kernel_size
    if spec.kernel == "box":
        return np.full((s, s), 1.0 / (s * s))
    t = np.arange(s) - (s - 1) / 2.0
    g = np.exp(-0.5 * (t / spec.kernel_sigma) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


def checkerboard(h: int, w: int, tile: int) -> np.ndarray:
    i, j = np.indices((h, w))
    return (((i // tile) + (j // tile)) % 2).astype(float)


def synthesize_tv_restoration(spec: TvRestorationSpec, image: Optional[np.ndarray] = None):
    """Blur ``image`` (a checkerboard by default) and add Gaussian noise.

    Returns ``(A, a, x_true)`` with ``x_true`` flattened row-major.
    """
    h, w = spec.height, spec.width
    if image is None:
        image = checkerboard(h, w, spec.tile)
    image = np.asarray(image, dtype=float)
    if image.shape != (h, w):
        raise ValueError(f"image shape {image.shape} does not match {(h, w)}")
    A = make_conv2d_periodic(make_kernel(spec), h, w)
    x_true = image.ravel().copy()
    e = rng.normal(spec.seed, h * w, stream=rng.STREAM_IMAGE)
    return A, A.apply(x_true) + spec.noise_sigma * e, x_true


def build_tv_restoration(A: LinearMap, a, mu: float, nonneg: bool, height: int, width: int,
                         lipschitz: Optional[float] = None) -> ProblemSpec:
    """``f1 = 1/2||Ax - a||^2``, ``f2 = mu * isotropic TV`` on the image
    gradient, ``f3`` = nonnegativity indicator or zero."""
    a = np.asarray(a, dtype=float)
    if A.in_dim != height * width:
        raise ValueError(f"A acts on {A.in_dim} pixels, image is {height}x{width}")
    if a.shape != (A.out_dim,):
        raise ValueError(f"a has shape {a.shape}, expected ({A.out_dim},)")
    f2 = ProxFn.group_l1_pairs(mu) if mu > 0 else ProxFn.zero()
    f3 = ProxFn.nonneg() if nonneg else ProxFn.zero()
    return ProblemSpec(SmoothFn.least_squares(A, a, lipschitz=lipschitz), f2,
                       make_grad2d(height, width), f3)


def objective(problem: ProblemSpec, x) -> float:
    """``f1(x) + f2(Bx) + f3(x)``; ``+inf`` outside the constraint set."""
    return problem.objective(x)


KKT_GAMMA = 1.0
KKT_LAMBDA_FACTOR = 0.5


def kkt_residual(problem: ProblemSpec, x, v, gamma: Optional[float] = None,
                 lam: Optional[float] = None) -> float:
    """Distance of ``(v, x)`` from being a fixed point of the PDFP map.

    Evaluated at the fixed reference steps ``gamma_r = 1``,
    ``lam_r = 0.5 / lambda_max(BB^T)``::

        ||x - prox_{g f3}(x - g grad f1(x) - l B^T v)||
          + ||v - (I - prox_{(g/l) f2})(Bx + v)||

    ``v`` is the PDFP dual produced with steps ``(gamma, lam)``; it is
    rescaled to the reference steps (``v`` scales like ``gamma/lam``).  Pass
    ``gamma=lam=None`` if ``v`` is already at reference scale.  The value is
    zero exactly at solutions.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    L = problem.opnorm.value
    g_r = KKT_GAMMA
    l_r = KKT_LAMBDA_FACTOR / L if L > 0 else KKT_LAMBDA_FACTOR
    if gamma is not None and lam is not None:
        v = v * ((g_r / l_r) * (lam / gamma))
    B = problem.B
    gx = x if problem.f1.is_zero else x - g_r * problem.f1.grad(x)
    r1 = x - problem.f3.prox(gx - l_r * B.adjoint(v), g_r)
    r2 = v - residual_shrink(problem.f2, B.apply(x) + v, g_r / l_r)
    return float(np.linalg.norm(r1) + np.linalg.norm(r2))


def dual_from_primal(problem: ProblemSpec, x, gamma: float, lam: float,
                     iters: int = 100_000, tol: float = 1e-14) -> np.ndarray:
    """Recover a PDFP dual for a fixed primal point ``x``.

    Iterates the dual half of the PDFP map with ``x`` frozen,
    ``v <- (I - prox_{(gamma/lam) f2})(B prox_{gamma f3}(x - gamma grad f1(x) - lam B^T v) + v)``,
    from ``v = 0``.  When ``x`` is a solution the limit pairs with it in the
    optimality condition.
    """
    x = np.asarray(x, dtype=float)
    B, f3 = problem.B, problem.f3
    gx = x if problem.f1.is_zero else x - gamma * problem.f1.grad(x)
    v = np.zeros(problem.m)
    for _ in range(iters):
        y = f3.prox(gx - lam * B.adjoint(v), gamma)
        v_new = residual_shrink(problem.f2, B.apply(y) + v, gamma / lam)
        if np.max(np.abs(v_new - v), initial=0.0) <= tol:
            return v_new
        v = v_new
    return v


# --------------------------------------------------------------------------- IO


def write_pgm(path, image: np.ndarray, maxval: int = 255, vmin: float = 0.0,
              vmax: float = 1.0) -> None:
    """Write a 2-D array as ASCII PGM (P2), mapping ``[vmin, vmax]`` to ``[0, maxval]``."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    scaled = np.clip(np.rint((img - vmin) / (vmax - vmin) * maxval), 0, maxval).astype(int)
    h, w = img.shape
    try:
        with open(path, "w") as fh:
            fh.write(f"P2\n{w} {h}\n{maxval}\n")
            for row in scaled:
                fh.write(" ".join(str(p) for p in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write PGM {os.fspath(path)}: {exc}") from exc


def read_pgm(path, vmin: float = 0.0, vmax: float = 1.0) -> np.ndarray:
    """Read an ASCII PGM (P2) file into floats in ``[vmin, vmax]``."""
    tokens = []
    with open(path) as fh:
        for line in fh:
            tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{os.fspath(path)}: not an ASCII PGM (P2) file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    pix = np.array(tokens[4:], dtype=float)
    if pix.size != w * h:
        raise ValueError(f"{os.fspath(path)}: expected {w * h} pixels, found {pix.size}")
    return vmin + pix.reshape(h, w) / maxval * (vmax - vmin)


def write_vector_csv(path, columns: dict) -> None:
    """Write equal-length vectors as named CSV columns (shortest round-trip floats)."""
    names = list(columns)
    cols = [np.asarray(columns[k], dtype=float) for k in names]
    if len({c.shape[0] for c in cols}) > 1:
        raise ValueError("CSV columns differ in length")
    try:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(names)
            for row in zip(*cols):
                wr.writerow([repr(float(v)) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write CSV {os.fspath(path)}: {exc}") from exc


def read_vector_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    names = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(names))
    return {k: data[:, i] for i, k in enumerate(names)}


def relative_error(x, ref) -> float:
    x, ref = np.asarray(x, dtype=float), np.asarray(ref, dtype=float)
    d = np.linalg.norm(ref)
    return float(np.linalg.norm(x - ref) / d) if d > 0 else float(np.linalg.norm(x))

