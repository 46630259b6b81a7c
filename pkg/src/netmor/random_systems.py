"""Random stable systems and interconnections for tests and experiments."""

from __future__ import annotations

import numpy as np

from .network import NetworkMatrix, close_loop
from .sysmodel import BlockDiagonalPlant, StateSpaceModel, aggregate


def stable_matrix(rng: np.random.Generator, n: int, margin=(0.1, 1.0)) -> np.ndarray:
    """Gaussian matrix shifted so its spectral abscissa lies in ``-margin``."""
    M = rng.standard_normal((n, n))
    shift = np.max(np.linalg.eigvals(M).real) + rng.uniform(*margin)
    return M - shift * np.eye(n)


def dissipative_matrix(rng: np.random.Generator, n: int, decay=(0.2, 1.0)) -> np.ndarray:
    """``A`` with ``A + A^T < 0``: skew part plus a negative definite part."""
    S = rng.standard_normal((n, n))
    K = rng.standard_normal((n, n)) / np.sqrt(n)
    return (S - S.T) - K @ K.T - rng.uniform(*decay) * np.eye(n)


def stable_system(rng: np.random.Generator, n: int, m: int, p: int, feedthrough=True,
                  label="") -> StateSpaceModel:
    A = stable_matrix(rng, n)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    D = rng.standard_normal((p, m)) if feedthrough else np.zeros((p, m))
    return StateSpaceModel(A, B, C, D, label)


def random_network(rng: np.random.Generator, plant: BlockDiagonalPlant, m_ext: int, p_ext: int,
                   coupling=1.0) -> NetworkMatrix:
    """Dense random ``N`` with ``D_K`` scaled by ``coupling``.

    Diagonal blocks of ``D_K`` (self loops) are kept, so the result is a
    generic interconnection rather than a pure cascade.
    """
    DE = rng.standard_normal((p_ext, m_ext))
    DF = rng.standard_normal((p_ext, plant.p))
    DH = rng.standard_normal((plant.m, m_ext))
    DK = coupling * rng.standard_normal((plant.m, plant.p))
    return NetworkMatrix(DE, DF, DH, DK)


def random_interconnection(rng: np.random.Generator, q=2, max_order=4, max_io=2, m_ext=None,
                           p_ext=None, coupling=0.3, feedthrough=True, max_tries=200):
    """Well-posed interconnection with a stable closed loop.

    Coupling is halved on each rejected draw, so the loop always ends up
    stable for small enough gain.
    """
    for _ in range(max_tries):
        subs = [stable_system(rng, int(rng.integers(1, max_order + 1)),
                              int(rng.integers(1, max_io + 1)), int(rng.integers(1, max_io + 1)),
                              feedthrough, label=f"G{i + 1}") for i in range(q)]
        plant = aggregate(subs)
        me = m_ext if m_ext is not None else int(rng.integers(1, max_io + 1))
        pe = p_ext if p_ext is not None else int(rng.integers(1, max_io + 1))
        c = coupling
        for _ in range(30):
            net = random_network(rng, plant, me, pe, c)
            try:
                cl = close_loop(plant, net)
            except Exception:
                cl = None
            if cl is not None and cl.stable:
                return plant, net
            c *= 0.5
    raise RuntimeError("could not draw a stable interconnection")


def weakly_coupled(rng: np.random.Generator, orders=(3, 4), io=((1, 1), (1, 1)), m_ext=1, p_ext=1,
                   coupling=0.05, feedthrough=False):
    """Dissipative subsystems joined by a weak network.

    Every ``A_i + A_i^T`` is negative definite, so the closed loop keeps a
    block-diagonal Lyapunov matrix for small ``coupling``.  That makes
    generalized structured Gramians feasible.
    """
    subs = []
    for i, (n, (m, p)) in enumerate(zip(orders, io)):
        A = dissipative_matrix(rng, n)
        B = rng.standard_normal((n, m))
        C = rng.standard_normal((p, n))
        D = rng.standard_normal((p, m)) if feedthrough else np.zeros((p, m))
        subs.append(StateSpaceModel(A, B, C, D, f"G{i + 1}"))
    plant = aggregate(subs)
    net = random_network(rng, plant, m_ext, p_ext, coupling)
    return plant, net


def fragile_loop(rng: np.random.Generator, orders=(4, 4), margin=0.05):
    """Two SISO subsystems in a feedback ring tuned close to instability.

    The ring gain is bisected until the closed-loop spectral abscissa is
    about ``-margin``, so most reductions push a pole across the axis.
    """
    subs = [stable_system(rng, n, 1, 1, feedthrough=False, label=f"G{i + 1}")
            for i, n in enumerate(orders)]
    plant = aggregate(subs)

    def net(g):
        DK = np.array([[0.0, g], [g, 0.0]])
        return NetworkMatrix(np.zeros((1, 1)), np.array([[1.0, 0.0]]), np.array([[1.0], [0.0]]), DK)

    def abscissa(g):
        return close_loop(plant, net(g)).abscissa

    lo, hi = 0.0, 1.0
    while abscissa(hi) < 0:
        hi *= 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if abscissa(mid) < -margin:
            lo = mid
        else:
            hi = mid
    return plant, net(lo)
