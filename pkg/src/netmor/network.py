"""Static interconnection network ``N`` and the closed loop ``F(N, G(s))``.

Signal convention: the plant outputs ``y`` and external inputs ``w`` are
routed by ``N`` to the external outputs ``z`` and plant inputs ``u``::

    z = D_E w + D_F y
    u = D_H w + D_K y

Edge lists use 1-based indices, matching the toolbox-style description of
a network.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import numkernels as nk
from .config import NUMERICS
from .errors import DimensionMismatch, IllPosed, IndexOutOfRange, NotStable
from .sysmodel import BlockDiagonalPlant, StateSpaceModel


def _edges(rows) -> tuple[tuple[int, int, float], ...]:
    out = []
    for row in rows:
        row = tuple(row)
        if len(row) == 2:
            row = (row[0], row[1], 1.0)
        if len(row) != 3:
            raise ValueError(f"edge {row!r} must have 2 or 3 entries")
        src, dst, weight = int(row[0]), int(row[1]), float(row[2])
        if not np.isfinite(weight):
            raise ValueError(f"edge {row!r} has a non-finite weight")
        out.append((src, dst, weight))
    return tuple(out)


@dataclass(frozen=True)
class EdgeLists:
    """The four edge lists describing a network.

    iedges
        ``(internal_output, internal_input, weight)``
    einedges
        ``(external_input, internal_input, weight)``
    eoutedges
        ``(internal_output, external_output, weight)``
    eedges
        ``(external_input, external_output, weight)``

    Weights may be omitted (2-tuples), in which case they default to 1.
    Parallel edges are summed.
    """

    iedges: Sequence = ()
    einedges: Sequence = ()
    eoutedges: Sequence = ()
    eedges: Sequence = ()
    m_ext: int = 0
    p_ext: int = 0

    def __post_init__(self):
        for name in ("iedges", "einedges", "eoutedges", "eedges"):
            object.__setattr__(self, name, _edges(getattr(self, name)))


@dataclass(frozen=True, eq=False)
class NetworkMatrix:
    DE: np.ndarray
    DF: np.ndarray
    DH: np.ndarray
    DK: np.ndarray

    def __post_init__(self):
        DE, DF, DH, DK = (np.atleast_2d(np.asarray(x, dtype=float)) for x in
                          (self.DE, self.DF, self.DH, self.DK))
        p_ext, m_ext = DE.shape
        m, p = DK.shape
        if DF.shape != (p_ext, p) or DH.shape != (m, m_ext):
            raise DimensionMismatch(
                f"inconsistent network blocks DE{DE.shape} DF{DF.shape} DH{DH.shape} DK{DK.shape}")
        for name, arr in (("DE", DE), ("DF", DF), ("DH", DH), ("DK", DK)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def m_ext(self) -> int:
        return self.DE.shape[1]

    @property
    def p_ext(self) -> int:
        return self.DE.shape[0]

    @property
    def N(self) -> np.ndarray:
        """``[[D_E, D_F], [D_H, D_K]]`` as one matrix."""
        return np.block([[self.DE, self.DF], [self.DH, self.DK]])


def assemble_network(edges: EdgeLists, plant: BlockDiagonalPlant) -> NetworkMatrix:
    m, p = plant.m, plant.p
    m_ext, p_ext = edges.m_ext, edges.p_ext
    DE = np.zeros((p_ext, m_ext))
    DF = np.zeros((p_ext, p))
    DH = np.zeros((m, m_ext))
    DK = np.zeros((m, p))

    def add(target, rows, kind, src_max, dst_max):
        for src, dst, weight in rows:
            if not (1 <= src <= src_max and 1 <= dst <= dst_max):
                raise IndexOutOfRange(
                    f"{kind} edge ({src}, {dst}) outside ranges 1..{src_max}, 1..{dst_max}")
            # matrix rows index the destination signal
            target[dst - 1, src - 1] += weight

    add(DK, edges.iedges, "iedges", p, m)
    add(DH, edges.einedges, "einedges", m_ext, m)
    add(DF, edges.eoutedges, "eoutedges", p, p_ext)
    add(DE, edges.eedges, "eedges", m_ext, p_ext)
    return NetworkMatrix(DE, DF, DH, DK)


@dataclass(frozen=True, eq=False)
class ClosedLoop:
    """Realization ``(A, B, C, D)`` of ``F(N, G(s))``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    plant: BlockDiagonalPlant = field(repr=False)
    network: NetworkMatrix = field(repr=False)
    stable: bool = False
    abscissa: float = np.nan

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def model(self) -> StateSpaceModel:
        return StateSpaceModel(self.A, self.B, self.C, self.D, "closed-loop")


def _check_partition(plant: BlockDiagonalPlant, net: NetworkMatrix):
    if net.DK.shape != (plant.m, plant.p):
        raise DimensionMismatch(
            f"network D_K is {net.DK.shape} but plant has m={plant.m}, p={plant.p}")


def close_loop(plant: BlockDiagonalPlant, net: NetworkMatrix) -> ClosedLoop:
    """Lower LFT ``F(N, G(s))`` in state-space form.

    Raises :class:`IllPosed` when ``I - D_K D_G`` is singular or its
    condition number exceeds ``NUMERICS.wellposed_cond``.
    """
    _check_partition(plant, net)
    AG, BG, CG, DG = plant.A, plant.B, plant.C, plant.D
    DE, DF, DH, DK = net.DE, net.DF, net.DH, net.DK
    m, p = plant.m, plant.p
    L = np.eye(m) - DK @ DG
    if m and not np.linalg.cond(L) <= NUMERICS.wellposed_cond:
        raise IllPosed("I - D_K D_G is singular or ill-conditioned (algebraic loop)")
    R = np.eye(p) - DG @ DK
    Linv_DK = np.linalg.solve(L, DK) if m else np.zeros((m, p))
    Linv_DH = np.linalg.solve(L, DH) if m else np.zeros((m, DH.shape[1]))
    A = AG + BG @ Linv_DK @ CG
    B = BG @ Linv_DH
    C = DF @ np.linalg.solve(R, CG) if p else np.zeros((DF.shape[0], AG.shape[0]))
    D = DE + DF @ DG @ Linv_DH
    stable, alpha = nk.is_hurwitz(A)
    return ClosedLoop(A, B, C, D, plant, net, stable, alpha)


def lft_response(plant: BlockDiagonalPlant, net: NetworkMatrix, omega: float) -> np.ndarray:
    """Transfer-matrix form ``D_E + D_F (I - G D_K)^{-1} G D_H`` at ``j omega``."""
    G = nk.freq_response(plant, omega)
    I = np.eye(G.shape[0])
    return net.DE + net.DF @ np.linalg.solve(I - G @ net.DK, G @ net.DH)


def difference_system(a: StateSpaceModel, b: StateSpaceModel) -> StateSpaceModel:
    """Parallel realization of ``a(s) - b(s)``."""
    if a.D.shape != b.D.shape:
        raise DimensionMismatch("systems have different input/output sizes")
    na, nb = a.n, b.n
    A = np.zeros((na + nb, na + nb))
    A[:na, :na] = a.A
    A[na:, na:] = b.A
    return StateSpaceModel(A, np.vstack([a.B, b.B]), np.hstack([a.C, -b.C]), a.D - b.D)


def closed_loop_error(net: NetworkMatrix, G: BlockDiagonalPlant, Ghat: BlockDiagonalPlant,
                      rel_tol: float | None = None) -> float:
    """``||F(N, Ghat) - F(N, G)||_inf``, or ``inf`` if ``F(N, Ghat)`` is unstable."""
    if not G.same_partition(Ghat):
        raise DimensionMismatch("reduced plant must keep every subsystem's m_i, p_i")
    full = close_loop(G, net)
    red = close_loop(Ghat, net)
    if not full.stable:
        raise NotStable("the full closed loop is not stable")
    if not red.stable:
        return np.inf
    return nk.hinf_norm(difference_system(full.model(), red.model()), rel_tol)[0]
