"""Per-subsystem balancing, truncation and singular perturbation.

Coordinates: a transformation ``T_i`` maps original states to balanced
ones, ``xbar = T_i x``, so that::

    T_i P_ii T_i^T = T_i^{-T} Q_ii T_i^{-1} = Sigma_i

and the balanced matrices are ``T A T^{-1}``, ``T B``, ``C T^{-1}``, ``D``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import numkernels as nk
from .config import NUMERICS
from .errors import DegenerateGramian, DimensionMismatch, NearSingularBalance, SingularFastBlock
from .gramians import GENERALIZED, STRUCTURED, GramianPair, generalized_gramians, structured_gramians
from .network import NetworkMatrix, close_loop, closed_loop_error
from .sysmodel import BlockDiagonalPlant, OrderVector, StateSpaceModel, aggregate, as_orders

TRUNCATION = "truncation"
PERTURBATION = "perturbation"


@dataclass(frozen=True, eq=False)
class BalancedSubsystem:
    T: np.ndarray
    Tinv: np.ndarray
    sigma: np.ndarray
    model: StateSpaceModel


@dataclass(frozen=True, eq=False)
class BalancedRealization:
    subsystems: tuple[BalancedSubsystem, ...]
    original: BlockDiagonalPlant
    gramian_kind: str

    @property
    def sigmas(self) -> list[np.ndarray]:
        return [b.sigma for b in self.subsystems]


@dataclass(eq=False)
class ReducedModel:
    plant: BlockDiagonalPlant
    orders: OrderVector
    method: str
    gramian_kind: str
    error: float | None = None

    def extract_subsystem(self, i: int) -> StateSpaceModel:
        from .sysmodel import extract_subsystem
        return extract_subsystem(self.plant, i)


@dataclass(frozen=True)
class ErrorBound:
    value: float
    tails: tuple[float, ...]
    heuristic: bool = False


def _factor(M):
    """Return ``L`` with ``M = L L^T`` (Cholesky, eigen fallback for PSD)."""
    try:
        return linalg.cholesky(M, lower=True)
    except linalg.LinAlgError:
        w, V = nk.sym_eig(M)
        return V * np.sqrt(np.clip(w, 0.0, None))


def _fix_signs(T, Tinv):
    # deterministic sign: largest-magnitude entry of each row of T positive
    idx = np.argmax(np.abs(T), axis=1)
    s = np.sign(T[np.arange(T.shape[0]), idx])
    s[s == 0] = 1.0
    return T * s[:, None], Tinv * s[None, :]


def balance_blocks(P, Q):
    """Square-root balancing of one Gramian pair.

    Returns ``(T, Tinv, sigma)`` with ``sigma`` descending.
    """
    n = P.shape[0]
    if n == 0:
        return np.zeros((0, 0)), np.zeros((0, 0)), np.zeros(0)
    for name, M in (("P", P), ("Q", Q)):
        sv = np.linalg.svd(M, compute_uv=False)
        if not sv[-1] >= NUMERICS.degenerate_gramian * sv[0] or sv[0] == 0:
            raise DegenerateGramian(
                f"Gramian block {name} is numerically singular (sv ratio {sv[-1] / max(sv[0], 1e-300):.2e})")
    Lp = _factor(0.5 * (P + P.T))
    Lq = _factor(0.5 * (Q + Q.T))
    U, s, Vt = linalg.svd(Lq.T @ Lp)
    if not s[-1] > 0:
        raise DegenerateGramian("Gramian product is singular")
    r = 1.0 / np.sqrt(s)
    T = r[:, None] * (U.T @ Lq.T)
    Tinv = (Lp @ Vt.T) * r[None, :]
    T, Tinv = _fix_signs(T, Tinv)
    return T, Tinv, s


def balance(plant: BlockDiagonalPlant, grams: GramianPair) -> BalancedRealization:
    if grams.partition != plant.state_dims:
        raise DimensionMismatch(f"Gramian partition {grams.partition} vs plant {plant.state_dims}")
    subs = []
    for sub, P, Q in zip(plant.subsystems, grams.P_blocks, grams.Q_blocks):
        T, Tinv, sigma = balance_blocks(P, Q)
        model = sub.transform(T, Tinv) if sub.n else sub
        subs.append(BalancedSubsystem(T, Tinv, sigma, model))
    return BalancedRealization(tuple(subs), plant, grams.kind)


def _warn_tiny(bal: BalancedRealization, r: OrderVector):
    for i, (b, ri) in enumerate(zip(bal.subsystems, r), start=1):
        if ri and b.sigma.size and np.any(b.sigma[:ri] < NUMERICS.near_singular_hsv * b.sigma[0]):
            warnings.warn(f"subsystem {i}: retained Hankel singular values below "
                          f"{NUMERICS.near_singular_hsv:g} x largest", NearSingularBalance, stacklevel=3)


def truncate(bal: BalancedRealization, r) -> ReducedModel:
    r = as_orders(r, bal.original)
    _warn_tiny(bal, r)
    subs = []
    for b, ri in zip(bal.subsystems, r):
        M = b.model
        subs.append(StateSpaceModel(M.A[:ri, :ri], M.B[:ri, :], M.C[:, :ri], M.D, M.label))
    return ReducedModel(aggregate(subs), r, TRUNCATION, bal.gramian_kind)


def residualize(M: StateSpaceModel, r: int) -> StateSpaceModel:
    """Singular perturbation of ``M`` keeping the leading ``r`` states."""
    if r == M.n:
        return M
    A11, A12 = M.A[:r, :r], M.A[:r, r:]
    A21, A22 = M.A[r:, :r], M.A[r:, r:]
    B1, B2 = M.B[:r], M.B[r:]
    C1, C2 = M.C[:, :r], M.C[:, r:]
    if not np.linalg.cond(A22) <= NUMERICS.fast_block_cond:
        raise SingularFastBlock(f"fast block of order {M.n - r} is numerically singular")
    X = np.linalg.solve(A22, np.hstack([A21, B2]))
    X_A, X_B = X[:, :r], X[:, r:]
    return StateSpaceModel(A11 - A12 @ X_A, B1 - A12 @ X_B, C1 - C2 @ X_A, M.D - C2 @ X_B, M.label)


def singular_perturbation(bal: BalancedRealization, r) -> ReducedModel:
    r = as_orders(r, bal.original)
    _warn_tiny(bal, r)
    subs = [residualize(b.model, ri) for b, ri in zip(bal.subsystems, r)]
    return ReducedModel(aggregate(subs), r, PERTURBATION, bal.gramian_kind)


def error_bound(bal: BalancedRealization, r) -> ErrorBound:
    """Twice the sum of discarded structured Hankel singular values.

    Only a guaranteed bound when ``bal`` came from generalized Gramians;
    otherwise ``heuristic`` is set.
    """
    r = as_orders(r, bal.original)
    tails = tuple(float(np.sum(b.sigma[ri:])) for b, ri in zip(bal.subsystems, r))
    return ErrorBound(2.0 * sum(tails), tails, heuristic=bal.gramian_kind != GENERALIZED)


theorem1_bound = error_bound


def suggest_orders(bal: BalancedRealization, drop_ratio: float = 100.0) -> OrderVector:
    """Order per subsystem at the first drop ``sigma_k / sigma_{k+1} >= drop_ratio``."""
    if not drop_ratio > 1:
        raise ValueError("drop_ratio must exceed 1")
    return OrderVector(tuple(first_drop(b.sigma, drop_ratio) for b in bal.subsystems))


def first_drop(sigma, drop_ratio: float) -> int:
    sigma = np.asarray(sigma, dtype=float)
    for k in range(sigma.size - 1):
        if sigma[k] >= drop_ratio * sigma[k + 1]:
            return k + 1
    return int(sigma.size)


def compute_gramians(plant: BlockDiagonalPlant, net: NetworkMatrix, kind: str = STRUCTURED,
                     tol: float = 1e-7) -> GramianPair:
    cl = close_loop(plant, net)
    if kind == STRUCTURED:
        return structured_gramians(cl)
    if kind == GENERALIZED:
        return generalized_gramians(cl, tol=tol)
    raise ValueError(f"unknown Gramian kind {kind!r}")


def reduce_network(plant: BlockDiagonalPlant, net: NetworkMatrix, orders,
                   method: str = TRUNCATION, gramians: str = STRUCTURED,
                   bal: BalancedRealization | None = None,
                   evaluate: bool = True) -> ReducedModel:
    """Balance every subsystem with structured or generalized Gramians and reduce.

    ``bal`` may be passed to reuse one balancing across several orders.
    """
    if bal is None:
        bal = balance(plant, compute_gramians(plant, net, gramians))
    if method == TRUNCATION:
        red = truncate(bal, orders)
    elif method == PERTURBATION:
        red = singular_perturbation(bal, orders)
    else:
        raise ValueError(f"unknown reduction method {method!r}")
    if evaluate:
        red.error = closed_loop_error(net, plant, red.plant)
    return red


def hankel_values(P, Q) -> np.ndarray:
    """``sqrt(eig(P Q))`` computed as singular values of ``L_Q^T L_P``."""
    if P.shape[0] == 0:
        return np.zeros(0)
    return linalg.svd(_factor(0.5 * (Q + Q.T)).T @ _factor(0.5 * (P + P.T)), compute_uv=False)


def hankel_comparison(plant: BlockDiagonalPlant, net: NetworkMatrix):
    """Structured HSVs (closed loop) and regular HSVs of each isolated subsystem."""
    grams = structured_gramians(close_loop(plant, net))
    structured = [hankel_values(P, Q) for P, Q in zip(grams.P_blocks, grams.Q_blocks)]
    regular = []
    for sub in plant.subsystems:
        if sub.n == 0:
            regular.append(np.zeros(0))
            continue
        P = nk.solve_lyapunov(sub.A, sub.B @ sub.B.T)
        Q = nk.solve_lyapunov(sub.A.T, sub.C.T @ sub.C)
        regular.append(hankel_values(P, Q))
    return structured, regular
