"""Independent oracles for the frozen values in the unit tests.

Uses numpy only (nothing from ``pdfp``) so the numbers it prints are an
independent check on the library.  Run with ``python3 scripts/derive_oracles.py``;
the printed values are pasted into ``tests/``.
"""

import numpy as np


def soft(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def grid_prox_1d(f, x, t, lo=-2.0, hi=2.0, step=1e-4):
    y = np.arange(lo, hi + step / 2, step)
    obj = f(y) + (y - x) ** 2 / (2 * t)
    return y[np.argmin(obj)]


def grid_prox_group(p, q, t, step=1e-3):
    a = np.arange(0.0, 3.0 + step / 2, step)
    b = np.arange(0.0, 4.0 + step / 2, step)
    P, Q = np.meshgrid(a, b, indexing="ij")
    obj = t * np.hypot(P, Q) + 0.5 * ((P - p) ** 2 + (Q - q) ** 2)
    i, j = np.unravel_index(np.argmin(obj), obj.shape)
    return a[i], b[j]


def pdfp_step_n2(pdfp2o=False):
    # A = I, a = [1, 3], B = [[-1, 1]], mu1 = mu2 = 0.5, gamma = 1, lam = 0.25
    a = np.array([1.0, 3.0])
    B = np.array([[-1.0, 1.0]])
    mu1 = mu2 = 0.5
    gamma, lam = 1.0, 0.25
    x = np.zeros(2)
    v = np.zeros(1)
    g = x - gamma * (x - a)
    f3 = (lambda z: z) if pdfp2o else (lambda z: soft(z, gamma * mu2))
    y = f3(g - lam * B.T @ v)
    w = B @ y + v
    v1 = w - soft(w, gamma / lam * mu1)
    x1 = f3(g - lam * B.T @ v1)
    return y, v1, x1


def pdfp2oc_step_n2():
    # A = I, a = [-1, 2], B = [[-1, 1]], mu = 0.5, C = nonneg, gamma = 1, lam = 0.2
    a = np.array([-1.0, 2.0])
    B = np.array([[-1.0, 1.0]])
    gamma, lam, mu = 1.0, 0.2, 0.5
    x, v1, v2 = np.zeros(2), np.zeros(1), np.zeros(2)
    g = x - gamma * (x - a)
    y = g - lam * B.T @ v1 - lam * v2
    w = B @ y + v1
    v1 = w - soft(w, gamma / lam * mu)
    v2 = (y + v2) - np.maximum(y + v2, 0.0)
    x = g - lam * B.T @ v1 - lam * v2
    return v1, v2, x


def transient_infeasible_1d(n_iter=200):
    # search a in [-3, 3] for a 1-D instance (f1 = (x - a)^2 / 2, f2 = 0,
    # B = [1], C = [0, inf)) whose PDFP2O_C iterates leave C
    hits = []
    for a in np.linspace(-3, 3, 61):
        x = v2 = 0.0
        lam = 0.5
        xs = []
        for _ in range(n_iter):
            g = a  # x - (x - a)
            y = g - lam * v2
            v2 = min(y + v2, 0.0)
            x = g - lam * v2
            xs.append(x)
        if min(xs) < 0:
            hits.append((float(a), min(xs), xs[-1]))
    return hits


def fused_lasso_n2_argmin(A, a, mu1, mu2):
    def f(X1, X2):
        R1 = A[0, 0] * X1 + A[0, 1] * X2 - a[0]
        R2 = A[1, 0] * X1 + A[1, 1] * X2 - a[1]
        R3 = A[2, 0] * X1 + A[2, 1] * X2 - a[2]
        return (0.5 * (R1 ** 2 + R2 ** 2 + R3 ** 2) + mu1 * np.abs(X2 - X1)
                + mu2 * (np.abs(X1) + np.abs(X2)))

    # exhaustive coarse pass over [-10, 10]^2, then exhaustive fine pass on a
    # window around it (valid because the objective is convex)
    c = np.arange(-10.0, 10.0 + 5e-3, 1e-2)
    X1, X2 = np.meshgrid(c, c, indexing="ij")
    i, j = np.unravel_index(np.argmin(f(X1, X2)), X1.shape)
    k1 = np.round((c[i] + 10.0) / 1e-4)
    k2 = np.round((c[j] + 10.0) / 1e-4)
    f1 = -10.0 + 1e-4 * np.arange(k1 - 300, k1 + 301)
    f2 = -10.0 + 1e-4 * np.arange(k2 - 300, k2 + 301)
    X1, X2 = np.meshgrid(f1, f2, indexing="ij")
    vals = f(X1, X2)
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    return np.array([f1[i], f2[j]]), float(vals[i, j])


N2_A = np.array([[1.0, 0.5], [0.2, 1.0], [0.3, -0.4]])
N2_a = np.array([1.0, 3.0, 0.5])


def main():
    print("prox_l1([0.7], 1):", grid_prox_1d(np.abs, 0.7, 1.0))
    print("prox_quadratic([3], 0.5, 4):", grid_prox_1d(lambda y: 2.0 * y ** 2, 3.0, 0.5,
                                                       lo=-4, hi=4))
    print("group prox (3, 4), t=2.5:", grid_prox_group(3.0, 4.0, 2.5))
    print("conjugate prox of l1 at [2, -0.5, -3]:", np.clip([2.0, -0.5, -3.0], -1, 1))
    print("pdfp step n=2 (y, v1, x1):", pdfp_step_n2())
    print("pdfp2o step n=2 (y, v1, x1):", pdfp_step_n2(pdfp2o=True))
    print("pdfp2oc step n=2 (v1, v2, x):", pdfp2oc_step_n2())
    hits = transient_infeasible_1d()
    print("transient infeasible 1-D instances (a, min x, last x):", hits[:3], len(hits))
    M = np.eye(2) - 0.25 * np.array([[-1, 1, 0], [0, -1, 1]]) @ np.array([[-1, 1, 0],
                                                                           [0, -1, 1]]).T
    print("m_norm first_difference(3), lam=0.25, v=[1,0]:", np.sqrt(np.array([1, 0]) @ M
                                                                     @ np.array([1, 0])))
    print("first_difference(100) lambda_max:", 2 - 2 * np.cos(99 * np.pi / 100))
    for mu1, mu2 in ((0.5, 0.5), (1.0, 0.2)):
        print(f"n=2 fused lasso argmin mu1={mu1} mu2={mu2}:",
              fused_lasso_n2_argmin(N2_A, N2_a, mu1, mu2))


if __name__ == "__main__":
    np.set_printoptions(precision=17)
    main()
