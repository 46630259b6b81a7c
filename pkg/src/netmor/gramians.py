"""Structured and generalized structured Gramians of an interconnection.

Structured Gramians are the diagonal blocks of the closed-loop Gramians.
Generalized structured Gramians are block-diagonal, trace-minimal
solutions of the Lyapunov inequalities (see :mod:`netmor.lmi`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import numkernels as nk
from .errors import DimensionMismatch, MinimalityWarning, NotStable
from .lmi import LmiProblem, LmiResult, solve_block_lmi
from .network import ClosedLoop
from .sysmodel import block_diag

STRUCTURED = "structured"
GENERALIZED = "generalized"


@dataclass(frozen=True, eq=False)
class GramianPair:
    P_blocks: tuple[np.ndarray, ...]
    Q_blocks: tuple[np.ndarray, ...]
    kind: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def partition(self) -> tuple[int, ...]:
        return tuple(b.shape[0] for b in self.P_blocks)

    def P(self) -> np.ndarray:
        return block_diag(self.P_blocks)

    def Q(self) -> np.ndarray:
        return block_diag(self.Q_blocks)


def _partition(cl: ClosedLoop, partition):
    if partition is None:
        partition = cl.plant.state_dims
    partition = tuple(int(k) for k in partition)
    if sum(partition) != cl.n:
        raise DimensionMismatch(f"partition {partition} does not cover {cl.n} states")
    return partition


def _blocks(M, partition):
    out, off = [], 0
    for k in partition:
        b = M[off:off + k, off:off + k].copy()
        out.append(0.5 * (b + b.T))
        off += k
    return tuple(out)


def regular_gramians(cl: ClosedLoop) -> tuple[np.ndarray, np.ndarray]:
    """Full closed-loop controllability and observability Gramians."""
    if not cl.stable:
        raise NotStable(f"closed loop has spectral abscissa {cl.abscissa:.3e}")
    P = nk.solve_lyapunov(cl.A, cl.B @ cl.B.T)
    Q = nk.solve_lyapunov(cl.A.T, cl.C.T @ cl.C)
    return P, Q


def structured_gramians(cl: ClosedLoop, partition=None) -> GramianPair:
    partition = _partition(cl, partition)
    P, Q = regular_gramians(cl)
    diag = {
        "lyap_residual_P": nk.lyapunov_residual(cl.A, P, cl.B @ cl.B.T),
        "lyap_residual_Q": nk.lyapunov_residual(cl.A.T, Q, cl.C.T @ cl.C),
    }
    return GramianPair(_blocks(P, partition), _blocks(Q, partition), STRUCTURED, diag)


def generalized_gramians(cl: ClosedLoop, partition=None, tol: float = 1e-7,
                         max_iter: int = 800) -> GramianPair:
    """Block-diagonal trace-minimizing solutions of both Lyapunov LMIs.

    Raises :class:`~netmor.errors.Infeasible` when no block-diagonal
    solution is found.
    """
    partition = _partition(cl, partition)
    if not cl.stable:
        raise NotStable(f"closed loop has spectral abscissa {cl.abscissa:.3e}")
    results: dict[str, LmiResult] = {}
    for side, A, W in (("controllability", cl.A, cl.B @ cl.B.T),
                       ("observability", cl.A.T, cl.C.T @ cl.C)):
        results[side] = solve_block_lmi(LmiProblem(A, W, partition, side), tol, max_iter)
    P = results["controllability"].P
    Q = results["observability"].P
    diag = {
        "lmi_residual_P": results["controllability"].residual_max_eig,
        "lmi_residual_Q": results["observability"].residual_max_eig,
        "trace_P": results["controllability"].trace,
        "trace_Q": results["observability"].trace,
        "gap_P": results["controllability"].gap,
        "gap_Q": results["observability"].gap,
    }
    return GramianPair(_blocks(P, partition), _blocks(Q, partition), GENERALIZED, diag)


def check_minimality(cl: ClosedLoop, rtol: float = 1e-10) -> bool:
    """Warn-only rank test of the closed-loop Gramians.

    Returns ``True`` when both Gramians look nonsingular.
    """
    P, Q = regular_gramians(cl)
    ok = True
    for name, G in (("controllability", P), ("observability", Q)):
        w = np.linalg.eigvalsh(G)
        if w.size and w[0] <= rtol * max(w[-1], 1e-300):
            warnings.warn(f"closed loop looks not minimal ({name} Gramian nearly singular)",
                          MinimalityWarning, stacklevel=2)
            ok = False
    return ok
