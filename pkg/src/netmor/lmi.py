"""Trace-minimizing block-diagonal Lyapunov LMIs.

Solves::

    minimize    trace(P)
    subject to  A P + P A^T + W <= 0,
                P = diag(P_11, ..., P_qq),  P_ii >= 0

with a primal log-barrier interior-point method.  Both inequalities are
imposed strictly with a floor ``delta = 1e-9 * max(1, ||W||)``, i.e.
``-(A P + P A^T + W) >= delta I`` and ``P_ii >= delta I``.

A strictly feasible start comes from a phase-I problem over normalized
block-diagonal ``P`` (``trace(P) = n``)::

    minimize s   subject to   s I - (A P + P A^T) > 0,   P_ii > 0.

Its optimal value is negative exactly when a block-diagonal Lyapunov
matrix exists.  The barrier gap gives a certified lower bound on that
value, which is attached to :class:`~netmor.errors.Infeasible`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import numkernels as nk
from .errors import DimensionMismatch, Infeasible, NotStable, NumericalBreakdown


@dataclass(frozen=True, eq=False)
class LmiProblem:
    """Data of one side (controllability or observability) of the SDP.

    For the observability side pass ``A^T`` and ``W = C^T C``.
    """

    A: np.ndarray
    W: np.ndarray
    partition: tuple[int, ...]
    side: str = "controllability"

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        W = np.asarray(self.W, dtype=float)
        part = tuple(int(k) for k in self.partition)
        n = A.shape[0]
        if A.shape != (n, n) or W.shape != (n, n) or sum(part) != n:
            raise DimensionMismatch(f"A{A.shape}, W{W.shape}, partition {part} are inconsistent")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "W", 0.5 * (W + W.T))
        object.__setattr__(self, "partition", part)


@dataclass
class LmiResult:
    P: np.ndarray
    trace: float
    gap: float
    residual_max_eig: float
    newton_steps: int
    phase1_value: float
    history: list = field(default_factory=list)


def _sym_basis(partition):
    """Basis ``E_k`` of block-diagonal symmetric matrices.

    Returns the dense stack of basis matrices and, per block, the slice of
    variable indices and the state slice it covers.
    """
    n = sum(partition)
    mats, blocks = [], []
    off = 0
    for nb in partition:
        start = len(mats)
        for a in range(off, off + nb):
            for b in range(a, off + nb):
                E = np.zeros((n, n))
                E[a, b] = E[b, a] = 1.0
                mats.append(E)
        blocks.append((slice(start, len(mats)), slice(off, off + nb)))
        off += nb
    return np.array(mats).reshape(len(mats), n, n), blocks


def _chol(F):
    try:
        return linalg.cholesky(F, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return None


class _Barrier:
    """``c^T x - sum_j logdet(F_j0 + sum_k x_k F_jk)`` and its derivatives."""

    def __init__(self, c, lmis):
        self.c = np.asarray(c, dtype=float)
        self.lmis = [(F0, Fk) for F0, Fk in lmis]
        self.nu = sum(F0.shape[0] for F0, _ in self.lmis)

    def matrices(self, x):
        return [F0 + np.tensordot(x, Fk, axes=1) for F0, Fk in self.lmis]

    def value(self, x, t):
        val = t * self.c @ x
        for F in self.matrices(x):
            L = _chol(F)
            if L is None:
                return np.inf
            val -= 2.0 * np.sum(np.log(np.diag(L)))
        return val

    def derivatives(self, x, t):
        g = t * self.c.copy()
        H = np.zeros((x.size, x.size))
        for (F0, Fk), F in zip(self.lmis, self.matrices(x)):
            L = _chol(F)
            if L is None:
                raise NumericalBreakdown("iterate left the barrier domain")
            Li = linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True, check_finite=False)
            M = Li @ Fk @ Li.T
            g -= np.trace(M, axis1=1, axis2=2)
            Mf = M.reshape(M.shape[0], -1)
            H += Mf @ Mf.T
        return g, H


def _newton_step(g, H, a=None):
    if a is None:
        try:
            return linalg.solve(H, -g, assume_a="pos", check_finite=False)
        except (linalg.LinAlgError, ValueError):
            return np.linalg.lstsq(H, -g, rcond=None)[0]
    K = np.block([[H, a[:, None]], [a[None, :], np.zeros((1, 1))]])
    rhs = np.concatenate([-g, [0.0]])
    try:
        sol = linalg.solve(K, rhs, check_finite=False)
    except (linalg.LinAlgError, ValueError):
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:-1]


def _center(bar, x, t, eq=None, max_steps=60, stop=None, counter=None):
    """Damped Newton centering; returns the new iterate."""
    for _ in range(max_steps):
        g, H = bar.derivatives(x, t)
        dx = _newton_step(g, H, eq)
        if not np.all(np.isfinite(dx)):
            raise NumericalBreakdown("Newton direction is not finite")
        dec = -g @ dx
        if counter is not None:
            counter[0] += 1
        if dec <= 2e-10:
            break
        f0 = bar.value(x, t)
        alpha = 1.0
        while True:
            xn = x + alpha * dx
            fn = bar.value(xn, t)
            if fn <= f0 - 0.25 * alpha * dec:
                break
            alpha *= 0.5
            if alpha < 1e-14:
                return x
        x = xn
        if stop is not None and stop(x):
            return x
    return x


def _phase1(A, partition, max_iter):
    """Normalized block-diagonal Lyapunov feasibility problem.

    Returns ``(P, s, lower_bound)``.  ``s < 0`` means ``A P + P A^T <= s I``.
    """
    n = A.shape[0]
    E, blocks = _sym_basis(partition)
    N = E.shape[0]
    LE = -(A @ E + E @ A.T)
    # variables: [x (P), s]
    F1k = np.concatenate([LE, np.eye(n)[None]], axis=0)
    lmis = [(np.zeros((n, n)), F1k)]
    for vs, ss in blocks:
        nb = ss.stop - ss.start
        if nb == 0:
            continue
        Fk = np.zeros((N + 1, nb, nb))
        Fk[vs] = E[vs][:, ss, ss]
        lmis.append((np.zeros((nb, nb)), Fk))
    c = np.zeros(N + 1)
    c[-1] = 1.0
    bar = _Barrier(c, lmis)
    a = np.concatenate([np.trace(E, axis1=1, axis2=2), [0.0]])
    x = np.concatenate([np.trace(E * np.eye(n), axis1=1, axis2=2), [0.0]])
    P = np.tensordot(x[:-1], E, axes=1)
    x[-1] = np.max(np.linalg.eigvalsh(A @ P + P @ A.T)) + 1.0
    margin = 1e-8 * max(1.0, np.linalg.norm(A, 2))
    t = 1.0 / max(abs(x[-1]), 1e-12)
    counter = [0]
    lower = -np.inf
    while counter[0] < max_iter:
        x = _center(bar, x, t, eq=a, stop=lambda z: z[-1] < -margin, counter=counter)
        if x[-1] < -margin:
            break
        lower = x[-1] - bar.nu / t
        if lower > 0:
            break
        t *= 10.0
    P = np.tensordot(x[:-1], E, axes=1)
    s = float(np.max(np.linalg.eigvalsh(A @ P + P @ A.T)))
    return P, s, lower, counter[0]


def solve_block_lmi(prob: LmiProblem, tol: float = 1e-7, max_iter: int = 800,
                    gap_tol: float = 1e-10) -> LmiResult:
    """Minimize ``trace(P)`` subject to the block-diagonal Lyapunov LMI.

    Parameters
    ----------
    prob
        Problem data; ``prob.A`` must be Hurwitz.
    tol
        Exit check: ``lambda_max(A P + P A^T + W) <= tol * max(1, ||W||)``.
    max_iter
        Budget of Newton steps over both phases.
    gap_tol
        Barrier duality gap target relative to ``max(1e-300, trace(P))``.

    Raises
    ------
    Infeasible
        Phase I proved (or, on budget exhaustion, failed to disprove) that
        no strictly feasible block-diagonal ``P`` exists.
    """
    A, W, part = prob.A, prob.W, prob.partition
    n = A.shape[0]
    if n == 0:
        return LmiResult(np.zeros((0, 0)), 0.0, 0.0, -np.inf, 0, -np.inf)
    stable, alpha = nk.is_hurwitz(A)
    if not stable:
        raise NotStable(f"spectral abscissa {alpha:.3e} is not negative")
    w_norm = max(1.0, np.linalg.norm(W, 2))
    delta = 1e-9 * w_norm

    P1, s1, lower, used = _phase1(A, part, max_iter)
    if not s1 < 0:
        raise Infeasible(
            f"no block-diagonal Lyapunov matrix found for partition {part}; "
            f"phase-I lower bound {lower:.3e}", certificate=lower)

    E, blocks = _sym_basis(part)
    LE = -(A @ E + E @ A.T)
    lmis = [(-W - delta * np.eye(n), LE)]
    block_min = min(np.linalg.eigvalsh(P1[ss, ss])[0] for _, ss in blocks if ss.stop > ss.start)
    lam_w = np.linalg.eigvalsh(W)[-1]
    scale = 2.0 * max((lam_w + 2 * delta) / (-s1), 2 * delta / block_min) + 1e-300
    for vs, ss in blocks:
        nb = ss.stop - ss.start
        if nb == 0:
            continue
        Fk = np.zeros((E.shape[0], nb, nb))
        Fk[vs] = E[vs][:, ss, ss]
        lmis.append((-delta * np.eye(nb), Fk))
    c = np.trace(E, axis1=1, axis2=2)
    bar = _Barrier(c, lmis)
    x = np.array([(scale * P1)[np.nonzero(Ek)][0] for Ek in E])

    t = bar.nu / max(c @ x, 1e-300)
    counter = [used]
    history = []
    while True:
        x = _center(bar, x, t, counter=counter)
        tr = float(c @ x)
        gap = bar.nu / t
        history.append((t, tr, gap))
        if gap <= gap_tol * max(tr, 1e-300) or counter[0] >= max_iter:
            break
        t *= 10.0

    P = np.tensordot(x, E, axes=1)
    P = 0.5 * (P + P.T)
    res = float(np.max(np.linalg.eigvalsh(A @ P + P @ A.T + W)))
    if res > tol * w_norm:
        raise NumericalBreakdown(f"LMI residual {res:.3e} exceeds tolerance")
    return LmiResult(P, float(np.trace(P)), gap, res, counter[0], s1, history)
