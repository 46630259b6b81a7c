"""Error plant with the reduced model in a static feedback gain, and descent on it.

The reduction error ``F(N, G) - F(N, Ghat)`` is written as the lower LFT
of an augmented plant ``P(s)`` closed by the static gain::

    Phi = [[Ahat, Bhat],
           [Chat, Dhat]]

``P`` has states ``[x; xhat]`` (full closed loop, then an integrator bank
of size ``r``), inputs ``[w; xi; yhat]`` and outputs ``[z'; xhat; uhat]``.
The feedback is ``[xi; yhat] = Phi [xhat; uhat]``, i.e. the integrators
realize ``xhat' = Ahat xhat + Bhat uhat`` and ``yhat = Chat xhat + Dhat uhat``
while ``uhat = D_H w + D_K yhat`` routes the reduced outputs through the
network.  ``z'`` is the full external output minus the reduced one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numkernels as nk
from .errors import (DimensionMismatch, IllPosed, NotStable, ObjectiveAtZero, UnstableInit,
                     UnstableIterate)
from .network import NetworkMatrix, close_loop
from .reduction import ReducedModel
from .sysmodel import BlockDiagonalPlant, OrderVector, StateSpaceModel, aggregate, as_orders, block_diag


@dataclass(frozen=True, eq=False)
class ErrorPlant:
    """Augmented plant ``P(s)`` with the reduced-model unknowns cut out.

    Inputs are ``[w (m_ext); u_Phi (r + p)]`` and outputs
    ``[z' (p_ext); y_Phi (r + m)]``.
    """

    model: StateSpaceModel
    plant: BlockDiagonalPlant
    network: NetworkMatrix
    orders: OrderVector
    n_full: int
    m_ext: int
    p_ext: int
    scale: float = 1.0

    @property
    def r(self) -> int:
        return self.orders.total

    @property
    def phi_shape(self) -> tuple[int, int]:
        return self.r + self.plant.p, self.r + self.plant.m

    def blocks(self):
        """``(A, B1, B2, C1, C2, D11, D12, D21, D22)`` split at the gain channels."""
        M = self.model
        mw, pz = self.m_ext, self.p_ext
        return (M.A, M.B[:, :mw], M.B[:, mw:], M.C[:pz], M.C[pz:],
                M.D[:pz, :mw], M.D[:pz, mw:], M.D[pz:, :mw], M.D[pz:, mw:])


@dataclass(frozen=True, eq=False)
class ProjectionMask:
    """0/1 pattern of ``Phi`` allowed by the block-diagonal structure."""

    mask: np.ndarray

    @property
    def shape(self):
        return self.mask.shape


@dataclass(frozen=True, eq=False)
class GainPoint:
    Phi: np.ndarray
    mask: ProjectionMask
    objective: float
    stable: bool
    omega: float = np.nan


@dataclass
class DescentOptions:
    tol: float = 1e-5
    patience: int = 5
    max_iter: int = 300
    armijo: float = 1e-4
    max_halvings: int = 30
    # two peaks closer than this (relative) are treated as active together
    peak_tie: float = 1e-3
    hinf_rel_tol: float = 1e-9
    # objective at or below zero_tol * max(1, ||F(N, G)||_inf) counts as exact
    zero_tol: float = 1e-10


@dataclass
class DescentReport:
    history: list = field(default_factory=list)
    reason: str = ""
    final: GainPoint | None = None
    iterations: int = 0
    evaluations: int = 0
    accepted: int = 0


def build_error_plant(net: NetworkMatrix, plant: BlockDiagonalPlant, r) -> ErrorPlant:
    """Realize ``P(s)`` for target orders ``r``.

    Raises :class:`IllPosed` if the full interconnection is ill-posed and
    :class:`NotStable` if it is unstable (the error norm is then undefined).
    """
    r = as_orders(r, plant)
    cl = close_loop(plant, net)
    if not cl.stable:
        raise NotStable("the full closed loop is not stable")
    n, rt, m, p = cl.n, r.total, plant.m, plant.p
    mw, pz = net.m_ext, net.p_ext
    A = block_diag([cl.A, np.zeros((rt, rt))])
    # inputs: w | xi | yhat
    B = np.zeros((n + rt, mw + rt + p))
    B[:n, :mw] = cl.B
    B[n:, mw:mw + rt] = np.eye(rt)
    # outputs: z' | xhat | uhat
    C = np.zeros((pz + rt + m, n + rt))
    C[:pz, :n] = cl.C
    C[pz:pz + rt, n:] = np.eye(rt)
    D = np.zeros((pz + rt + m, mw + rt + p))
    D[:pz, :mw] = cl.D - net.DE
    D[:pz, mw + rt:] = -net.DF
    D[pz + rt:, :mw] = net.DH
    D[pz + rt:, mw + rt:] = net.DK
    scale = nk.hinf_norm(cl.model())[0]
    return ErrorPlant(StateSpaceModel(A, B, C, D, "error-plant"), plant, net, r, n, mw, pz, scale)


def projection_mask(plant: BlockDiagonalPlant, r) -> ProjectionMask:
    """Stack of the block-diagonal ones patterns for ``Ahat, Bhat, Chat, Dhat``."""
    r = as_orders(r, plant)
    ones = np.ones
    PA = block_diag([ones((ri, ri)) for ri in r])
    PB = block_diag([ones((ri, mi)) for ri, mi in zip(r, plant.input_dims)])
    PC = block_diag([ones((pi, ri)) for ri, pi in zip(r, plant.output_dims)])
    PD = block_diag([ones((pi, mi)) for pi, mi in zip(plant.output_dims, plant.input_dims)])
    mask = np.block([[PA, PB], [PC, PD]])
    mask.setflags(write=False)
    return ProjectionMask(mask)


def project_subgradient(g, mask: ProjectionMask) -> np.ndarray:
    """Hadamard product with the mask (idempotent)."""
    g = np.asarray(g, dtype=float)
    if g.shape != mask.shape:
        raise DimensionMismatch(f"subgradient {g.shape} vs mask {mask.shape}")
    return g * mask.mask


def encode(red: ReducedModel | BlockDiagonalPlant) -> np.ndarray:
    """Pack reduced subsystems into ``Phi = [Ahat Bhat; Chat Dhat]``."""
    plant = red.plant if isinstance(red, ReducedModel) else red
    subs = plant.subsystems
    return np.block([[block_diag([s.A for s in subs]), block_diag([s.B for s in subs])],
                     [block_diag([s.C for s in subs]), block_diag([s.D for s in subs])]])


def decode(Phi, plant: BlockDiagonalPlant, r, labels=None) -> BlockDiagonalPlant:
    """Inverse of :func:`encode` for the partition of ``plant`` and orders ``r``."""
    r = as_orders(r, plant)
    Phi = np.asarray(Phi, dtype=float)
    rt = r.total
    if Phi.shape != (rt + plant.p, rt + plant.m):
        raise DimensionMismatch(f"Phi has shape {Phi.shape}, expected {(rt + plant.p, rt + plant.m)}")
    ro = np.concatenate([[0], np.cumsum(r.r)]).astype(int)
    mo, po = plant.input_offsets(), plant.output_offsets()
    subs = []
    for i in range(plant.q):
        xs, us, ys = slice(ro[i], ro[i + 1]), slice(mo[i], mo[i + 1]), slice(po[i], po[i + 1])
        label = labels[i] if labels is not None else plant.subsystems[i].label
        subs.append(StateSpaceModel(Phi[xs, xs], Phi[xs, rt + mo[i]:rt + mo[i + 1]],
                                    Phi[rt + po[i]:rt + po[i + 1], xs], Phi[rt:, rt:][ys, us], label))
    return aggregate(subs)


def closed_error(ep: ErrorPlant, Phi) -> StateSpaceModel:
    """State-space realization of ``F_lower(P, Phi)``.

    Raises :class:`IllPosed` when ``I - Phi D22`` is singular.
    """
    A, B1, B2, C1, C2, D11, D12, D21, D22 = ep.blocks()
    Phi = np.asarray(Phi, dtype=float)
    if Phi.shape != ep.phi_shape:
        raise DimensionMismatch(f"Phi has shape {Phi.shape}, expected {ep.phi_shape}")
    L = np.eye(Phi.shape[0]) - Phi @ D22
    if L.size and not np.linalg.cond(L) <= 1e12:
        raise IllPosed("feedback through Phi is ill-posed")
    K = np.linalg.solve(L, Phi) if L.size else Phi
    return StateSpaceModel(A + B2 @ K @ C2, B1 + B2 @ K @ D21,
                           C1 + D12 @ K @ C2, D11 + D12 @ K @ D21, "error")


def evaluate(ep: ErrorPlant, Phi, mask: ProjectionMask | None = None, rel_tol=1e-9,
             hint_freqs=()) -> GainPoint:
    """Objective ``||F_lower(P, Phi)||_inf`` (``inf`` when unstable or ill-posed)."""
    if mask is None:
        mask = projection_mask(ep.plant, ep.orders)
    Phi = np.array(Phi, dtype=float)
    Phi.setflags(write=False)
    try:
        sys = closed_error(ep, Phi)
    except IllPosed:
        return GainPoint(Phi, mask, np.inf, False)
    stable, _ = nk.is_hurwitz(sys.A)
    if not stable:
        return GainPoint(Phi, mask, np.inf, False)
    val, w = nk.hinf_norm(sys, rel_tol, hint_freqs=[h for h in hint_freqs if np.isfinite(h)])
    return GainPoint(Phi, mask, val, True, w)


def _channel_matrices(ep: ErrorPlant, Phi, omega):
    """``T``, ``L = P12 (I - Phi P22)^{-1}`` and ``R = (I - P22 Phi)^{-1} P21`` at ``j omega``.

    ``L`` and ``R`` are closed-loop maps (injection at the gain output to
    ``z'``, ``w`` to the gain input), so they are realized around the
    closed-loop state matrix.  ``P`` itself has integrators in the reduced
    states and cannot be evaluated at ``omega = 0``.
    """
    A, B1, B2, C1, C2, D11, D12, D21, D22 = ep.blocks()
    M = np.linalg.inv(np.eye(Phi.shape[0]) - Phi @ D22)
    K = M @ Phi
    Eo = np.eye(Phi.shape[1]) + D22 @ K
    cl = closed_error(ep, Phi)
    zv = StateSpaceModel(cl.A, B2 @ M, cl.C, D12 @ M)
    yw = StateSpaceModel(cl.A, cl.B, Eo @ C2, Eo @ D21)
    return nk.freq_response(cl, omega), nk.freq_response(zv, omega), nk.freq_response(yw, omega)


def _gradient_at(ep: ErrorPlant, Phi, omega) -> np.ndarray:
    T, L, R = _channel_matrices(ep, Phi, omega)
    U, s, Vh = np.linalg.svd(T)
    u, v = U[:, 0], Vh[0].conj()
    # d sigma_max = Re(u^H L dPhi R v)
    return np.real(np.outer(u.conj() @ L, R @ v))


def peak_frequencies(sys: StateSpaceModel, value: float, omega: float, tie: float):
    """Frequencies of local maxima of ``sigma_max`` within ``tie`` (relative) of ``value``.

    The global peak ``omega`` is always first.  Other local maxima are
    located on a log grid and polished.
    """
    out = [omega]
    if sys.n == 0:
        return out
    lam = np.abs(np.linalg.eigvals(sys.A))
    w_lo, w_hi = max(1e-6, 0.1 * lam.min()), 10.0 * lam.max()
    grid = np.concatenate([[0.0], np.geomspace(w_lo, w_hi, 400)])
    s = nk.sigma_sweep(sys, grid)
    idx = [k for k in range(grid.size)
           if (k == 0 or s[k] >= s[k - 1]) and (k == grid.size - 1 or s[k] >= s[k + 1])]
    for k in sorted(idx, key=lambda k: -s[k]):
        if s[k] < (1.0 - 10 * tie) * value:
            break
        w, v = nk._refine_peak(lambda x: nk.sigma_max(sys, x), float(grid[k]), width=0.05)
        near = any(np.isfinite(o) and abs(np.log1p(w) - np.log1p(o)) < 1e-3 for o in out)
        if not near and v >= (1.0 - tie) * value:
            out.append(w)
    return out


def hinf_subgradient(ep: ErrorPlant, pt: GainPoint, zero_tol: float = 1e-10) -> np.ndarray:
    """One Clarke subgradient of ``||F_lower(P, Phi)||_inf`` at the peak frequency.

    Equals the gradient when the peak is unique and ``sigma_max`` there is
    simple.  Not projected; see :func:`project_subgradient`.
    """
    if not pt.stable or not np.isfinite(pt.objective):
        raise UnstableIterate("error system is unstable at this gain")
    if pt.objective <= zero_tol * max(1.0, ep.scale):
        raise ObjectiveAtZero(f"objective {pt.objective:.3e} is numerically zero")
    return _gradient_at(ep, np.asarray(pt.Phi), pt.omega)


def _min_norm_pair(g1, g2):
    d = g1 - g2
    dd = np.sum(d * d)
    if dd == 0:
        return g1
    lam = np.clip(-np.sum(d * g2) / dd, 0.0, 1.0)
    return lam * g1 + (1.0 - lam) * g2


def descent_direction(ep: ErrorPlant, pt: GainPoint, opts: DescentOptions) -> np.ndarray:
    """Projected subgradient, or the min-norm combination at two tied peaks."""
    g = project_subgradient(hinf_subgradient(ep, pt, opts.zero_tol), pt.mask)
    peaks = peak_frequencies(closed_error(ep, pt.Phi), pt.objective, pt.omega, opts.peak_tie)
    if len(peaks) > 1:
        g2 = project_subgradient(_gradient_at(ep, np.asarray(pt.Phi), peaks[1]), pt.mask)
        g = _min_norm_pair(g, g2)
    return g


def improve(ep: ErrorPlant, init: ReducedModel, opts: DescentOptions | None = None):
    """Projected subgradient descent on the closed-loop H-infinity error.

    Backtracking Armijo line search with a Barzilai-Borwein trial step;
    unstable trial points count as ``+inf``.  Stops when the relative
    decrease stays below ``opts.tol`` for ``opts.patience`` accepted steps,
    when no step is accepted, or after ``opts.max_iter`` iterations.

    Returns the improved :class:`ReducedModel` and a :class:`DescentReport`.
    """
    opts = opts or DescentOptions()
    if tuple(init.orders) != tuple(ep.orders):
        raise DimensionMismatch(f"seed orders {tuple(init.orders)} differ from {tuple(ep.orders)}")
    mask = projection_mask(ep.plant, ep.orders)
    Phi0 = encode(init)
    if np.any(Phi0 * (1.0 - mask.mask)):
        raise DimensionMismatch("seed model is not block diagonal")
    labels = [s.label for s in init.plant.subsystems]
    report = DescentReport()
    pt = evaluate(ep, Phi0, mask, opts.hinf_rel_tol)
    report.evaluations += 1
    if not pt.stable:
        raise UnstableInit(f"seed with orders {tuple(ep.orders)} gives an unstable reduced closed loop",
                           orders=tuple(ep.orders))
    report.history.append(pt.objective)

    def finish(reason, pt):
        report.reason = reason
        report.final = pt
        red = ReducedModel(decode(pt.Phi, ep.plant, ep.orders, labels), ep.orders,
                           init.method, init.gramian_kind, pt.objective)
        return red, report

    prev_phi = prev_g = None
    step = None
    slow = 0
    for it in range(opts.max_iter):
        report.iterations = it + 1
        try:
            g = descent_direction(ep, pt, opts)
        except ObjectiveAtZero:
            return finish("objective-at-zero", pt)
        gg = float(np.sum(g * g))
        if gg == 0.0:
            return finish("stationary", pt)
        if prev_g is not None:
            s = np.asarray(pt.Phi) - prev_phi
            y = g - prev_g
            sy = float(np.sum(s * y))
            step = float(np.sum(s * s)) / sy if sy > 0 else 2.0 * step
        else:
            # aim the first trial at a 10% decrease of the objective
            step = 0.1 * pt.objective / gg
        alpha = step
        accepted = None
        for _ in range(opts.max_halvings + 1):
            cand = evaluate(ep, np.asarray(pt.Phi) - alpha * g, mask, opts.hinf_rel_tol,
                            hint_freqs=(pt.omega,))
            report.evaluations += 1
            if cand.objective <= pt.objective - opts.armijo * alpha * gg:
                accepted = cand
                break
            alpha *= 0.5
        if accepted is None:
            return finish("line-search-failed", pt)
        assert not np.any(np.asarray(accepted.Phi) * (1.0 - mask.mask))
        prev_phi, prev_g = np.asarray(pt.Phi), g
        step = alpha
        rel = (pt.objective - accepted.objective) / pt.objective
        pt = accepted
        report.accepted += 1
        report.history.append(pt.objective)
        slow = slow + 1 if rel < opts.tol else 0
        if slow >= opts.patience:
            return finish("converged", pt)
    return finish("max-iter", pt)
