"""Reference computations that avoid the package's own code paths."""

import numpy as np
from scipy import linalg, signal


def lyapunov_quadrature(A, W, h=None, T=None):
    """``int_0^T e^{At} W e^{A^T t} dt`` by composite Simpson on a uniform grid."""
    alpha = np.max(np.linalg.eigvals(A).real)
    if T is None:
        T = 40.0 / -alpha
    if h is None:
        h = min(0.01, 0.05 / max(1.0, np.linalg.norm(A, 2)))
    steps = int(np.ceil(T / h))
    steps += steps % 2
    h = T / steps
    E = linalg.expm(A * h)
    X = np.zeros_like(W, dtype=float)
    F = np.eye(A.shape[0])
    for k in range(steps + 1):
        wgt = 1.0 if k in (0, steps) else (4.0 if k % 2 else 2.0)
        X += wgt * (F @ W @ F.T)
        F = E @ F
    return X * h / 3.0


def tf_response(A, B, C, D, omega):
    """Transfer matrix via characteristic/numerator polynomials (column by column)."""
    p, m = D.shape
    s = 1j * omega
    out = np.zeros((p, m), dtype=complex)
    for j in range(m):
        num, den = signal.ss2tf(A, B, C, D, input=j)
        out[:, j] = [np.polyval(num[i], s) / np.polyval(den, s) for i in range(p)]
    return out


def sigma_grid(A, B, C, D, omegas, chunk=20000):
    """``sigma_max(G(j w))`` on a frequency grid.

    Uses the modal form ``C V (jw - Lambda)^{-1} V^{-1} B + D`` when the
    eigenvectors are well conditioned, batched dense solves otherwise.
    """
    n = A.shape[0]
    omegas = np.asarray(omegas, dtype=float)
    out = np.empty(omegas.size)
    lam, V = np.linalg.eig(A)
    modal = np.linalg.cond(V) < 1e6
    if modal:
        CV = C @ V
        VB = np.linalg.solve(V, B.astype(complex))
    I = np.eye(n)
    for start in range(0, omegas.size, chunk):
        w = omegas[start:start + chunk]
        if modal:
            R = 1.0 / (1j * w[:, None] - lam[None])
            G = np.einsum("pk,wk,km->wpm", CV, R, VB) + D[None]
        else:
            M = 1j * w[:, None, None] * I[None] - A[None]
            X = np.linalg.solve(M, np.broadcast_to(B.astype(complex), (w.size,) + B.shape))
            G = C[None] @ X + D[None]
        H = G.conj().transpose(0, 2, 1)
        S = H @ G if G.shape[2] <= G.shape[1] else G @ H
        out[start:start + chunk] = np.sqrt(np.maximum(np.linalg.eigvalsh(S)[:, -1], 0.0))
    return out


def hinf_grid(A, B, C, D, points=100_000):
    """Grid lower estimate of the H-infinity norm: log sweep plus eigenfrequency clusters."""
    lam = np.linalg.eigvals(A)
    base = np.concatenate([[0.0], np.geomspace(1e-4, 1e4, points)])
    extra = [np.abs(l.imag) + np.abs(l.real) * np.linspace(-3, 3, 601) for l in lam]
    w = np.concatenate([base] + extra)
    w = w[w >= 0]
    return float(np.max(sigma_grid(A, B, C, D, w)))


def central_gradient(f, X, mask, h=1e-5):
    """Central differences of ``f`` in every coordinate where ``mask`` is 1."""
    G = np.zeros_like(X, dtype=float)
    for idx in zip(*np.nonzero(mask)):
        E = np.zeros_like(X, dtype=float)
        E[idx] = h
        G[idx] = (f(X + E) - f(X - E)) / (2 * h)
    return G
