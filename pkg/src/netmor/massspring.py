"""Stand-in for the two-body mass-spring example.

Each elastic body is a chain of ``n_i / 2`` point masses joined by springs
(a lumped discretization of an elastic rod), anchored to a wall at its
outer end, with Rayleigh damping ``C = alpha M + beta K``.  Body 1 is
pushed by the external force at its wall-side mass and by the coupling
spring at its free end; body 2 is pushed by the coupling spring at its
free end.  Each body outputs the position of its free end.
"""

from __future__ import annotations

import numpy as np

from .network import EdgeLists
from .sysmodel import BlockDiagonalPlant, StateSpaceModel, aggregate


def chain(masses, link_stiffness, wall_stiffness, wall_side, force_nodes, output_node,
          alpha=0.0, beta=1e-3, label=""):
    """Second-order chain model with position states first.

    ``link_stiffness[j]`` joins masses ``j`` and ``j + 1``.  ``wall_side``
    is ``"left"`` (wall at mass 0) or ``"right"`` (wall at the last mass).
    """
    masses = np.asarray(masses, dtype=float)
    N = masses.size
    K = np.zeros((N, N))
    for j, kj in enumerate(link_stiffness):
        K[j, j] += kj
        K[j + 1, j + 1] += kj
        K[j, j + 1] -= kj
        K[j + 1, j] -= kj
    anchor = 0 if wall_side == "left" else N - 1
    K[anchor, anchor] += wall_stiffness
    M = np.diag(masses)
    Minv = np.diag(1.0 / masses)
    Cd = alpha * M + beta * K
    A = np.block([[np.zeros((N, N)), np.eye(N)], [-Minv @ K, -Minv @ Cd]])
    B = np.vstack([np.zeros((N, len(force_nodes))), Minv[:, list(force_nodes)]])
    C = np.zeros((1, 2 * N))
    C[0, output_node] = 1.0
    return StateSpaceModel(A, B, C, np.zeros((1, len(force_nodes))), label)


def elastic_body(n_states, total_mass=1.0, rod_stiffness=100.0, wall_stiffness=100.0,
                 wall_side="left", force_nodes=(0,), output_node=-1, alpha=0.0, beta=1e-3,
                 label=""):
    """Uniform lumped rod with ``n_states / 2`` nodes."""
    if n_states < 2 or n_states % 2:
        raise ValueError("order must be even and at least 2")
    N = n_states // 2
    masses = np.full(N, total_mass / N)
    links = np.full(N - 1, rod_stiffness * max(N - 1, 1))
    output_node = output_node % N
    force_nodes = tuple(f % N for f in force_nodes)
    return chain(masses, links, wall_stiffness, wall_side, force_nodes, output_node,
                 alpha, beta, label)


def demo_edges(k: float) -> EdgeLists:
    """Network of the two-body example; ``k`` is the coupling spring."""
    return EdgeLists(
        iedges=[(1, 2, -k), (2, 2, k), (1, 3, k), (2, 3, -k)],
        einedges=[(1, 1)],
        eoutedges=[(1, 1), (2, 2)],
        eedges=[],
        m_ext=1,
        p_ext=2,
    )


def demo_plant(orders=(8, 10), alpha=0.0, beta=1e-3, **body) -> BlockDiagonalPlant:
    n1, n2 = orders
    g1 = elastic_body(n1, wall_side="left", force_nodes=(0, -1), output_node=-1,
                      alpha=alpha, beta=beta, label="G1", **body)
    g2 = elastic_body(n2, wall_side="right", force_nodes=(0,), output_node=0,
                      alpha=alpha, beta=beta, label="G2", **body)
    return aggregate([g1, g2])


def demo_system(k: float = 10.0, orders=(8, 10), alpha=0.0, beta=1e-3, **body):
    """Return ``(plant, edges)`` of the stand-in two-body example."""
    if not k > 0:
        raise ValueError("spring constant k must be positive")
    for n in orders:
        if n < 2 or n % 2:
            raise ValueError(f"orders must be even and >= 2, got {orders}")
    return demo_plant(orders, alpha, beta, **body), demo_edges(k)
