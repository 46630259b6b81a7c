"""Dense numerical kernels: Lyapunov equations, stability, frequency
response, H-infinity norm and symmetric eigendecomposition.

Functions taking a ``sys`` argument accept anything exposing ``A``, ``B``,
``C``, ``D`` array attributes (e.g. :class:`netmor.sysmodel.StateSpaceModel`).
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy import linalg, optimize

from .config import NUMERICS
from .errors import DimensionMismatch, NotStable, SingularResolvent


def _square(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {A.shape}")
    return A


def spectral_abscissa(A) -> float:
    A = _square(A)
    if A.shape[0] == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvals(A).real))


def is_hurwitz(A) -> tuple[bool, float]:
    """Return ``(stable, abscissa)`` where ``abscissa`` is max Re(eig(A)).

    ``stable`` requires the abscissa to be below ``-NUMERICS.stability_margin``.
    An empty matrix is stable with abscissa ``-inf``.
    """
    alpha = spectral_abscissa(A)
    return bool(alpha < -NUMERICS.stability_margin), alpha


def solve_lyapunov(A, W) -> np.ndarray:
    """Solve ``A X + X A^T + W = 0`` for stable ``A``.

    Bartels-Stewart (real Schur form of ``A`` and back substitution), as
    provided by LAPACK through :func:`scipy.linalg.solve_continuous_lyapunov`.
    The result is symmetrized.
    """
    A = _square(A)
    W = _square(W, "W")
    if W.shape != A.shape:
        raise DimensionMismatch(f"A is {A.shape} but W is {W.shape}")
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    stable, alpha = is_hurwitz(A)
    if not stable:
        raise NotStable(f"spectral abscissa {alpha:.3e} is not negative")
    X = linalg.solve_continuous_lyapunov(A, -W)
    return 0.5 * (X + X.T)


def lyapunov_residual(A, X, W) -> float:
    return float(np.linalg.norm(A @ X + X @ A.T + W))


def freq_response(sys, omega: float) -> np.ndarray:
    """Evaluate ``C (j omega I - A)^{-1} B + D``.

    ``omega = inf`` returns ``D``.  Raises :class:`SingularResolvent` when
    the resolvent is numerically singular.
    """
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    n = A.shape[0]
    if n == 0 or np.isinf(omega):
        return np.asarray(D, dtype=complex)
    M = 1j * omega * np.eye(n) - A
    with warnings.catch_warnings():
        # exact singularity is reported below as SingularResolvent
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(M, check_finite=False)
    # cheap reciprocal condition estimate from the LU factors (1-norm)
    rcond = linalg.lapack.zgecon(lu, np.linalg.norm(M, 1), norm="1")[0]
    if not rcond > 1.0 / NUMERICS.resolvent_cond:
        raise SingularResolvent(f"resolvent at omega={omega} has rcond {rcond:.2e}")
    return C @ linalg.lu_solve((lu, piv), B.astype(complex), check_finite=False) + D


class _ModalEvaluator:
    """Vectorized frequency response via an eigendecomposition of ``A``.

    Falls back to per-frequency solves when the eigenvector matrix is
    badly conditioned.
    """

    def __init__(self, sys):
        self.sys = sys
        A = sys.A
        self.modal = False
        if A.shape[0] == 0:
            return
        lam, V = np.linalg.eig(A)
        if np.linalg.cond(V) < 1e8:
            self.lam = lam
            self.CV = sys.C @ V
            self.VB = np.linalg.solve(V, sys.B.astype(complex))
            self.modal = True

    def sigma_max(self, omegas) -> np.ndarray:
        omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        sys = self.sys
        if sys.A.shape[0] == 0:
            s = np.linalg.norm(sys.D, 2) if sys.D.size else 0.0
            return np.full(omegas.shape, s)
        if not self.modal:
            return np.array([_smax(freq_response(sys, w)) for w in omegas])
        out = np.empty(omegas.shape)
        for start in range(0, omegas.size, 4096):
            w = omegas[start:start + 4096]
            inv = 1.0 / (1j * w[:, None] - self.lam[None, :])
            G = np.einsum("pk,fk,km->fpm", self.CV, inv, self.VB) + sys.D
            out[start:start + 4096] = np.linalg.svd(G, compute_uv=False)[:, 0]
        return out


def _smax(G) -> float:
    if G.size == 0:
        return 0.0
    return float(np.linalg.svd(G, compute_uv=False)[0])


def sigma_max(sys, omega: float) -> float:
    return _smax(freq_response(sys, omega))


def _hamiltonian(sys, gamma):
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    m = B.shape[1]
    R = gamma ** 2 * np.eye(m) - D.T @ D
    Rinv_Bt = np.linalg.solve(R, B.T)
    Rinv_DtC = np.linalg.solve(R, D.T @ C)
    Ah = A + B @ Rinv_DtC
    top = np.hstack([Ah, gamma * B @ Rinv_Bt])
    Q = C.T @ (np.eye(C.shape[0]) + D @ np.linalg.solve(R, D.T)) @ C
    bottom = np.hstack([-Q / gamma, -Ah.T])
    return np.vstack([top, bottom])


def _imaginary_frequencies(H) -> np.ndarray:
    lam = np.linalg.eigvals(H)
    tol = NUMERICS.imag_axis_tol
    on_axis = np.abs(lam.real) <= tol * np.maximum(1.0, np.abs(lam))
    w = np.abs(lam[on_axis].imag)
    return np.unique(np.round(np.sort(w), 14))


def _refine_peak(sigma, w0, width=0.02):
    """Local maximization of ``sigma`` over log-frequency near ``w0``."""
    f0 = sigma(w0)
    if not (np.isfinite(w0) and w0 > 0):
        return w0, f0
    x0 = np.log(w0)
    res = optimize.minimize_scalar(
        lambda x: -sigma(np.exp(x)),
        bounds=(x0 - width, x0 + width),
        method="bounded",
        options={"xatol": 1e-12},
    )
    if res.success and -res.fun > f0:
        return float(np.exp(res.x)), float(-res.fun)
    return w0, f0


def hinf_norm(sys, rel_tol: float | None = None, hint_freqs=()) -> tuple[float, float]:
    """H-infinity norm of a stable continuous-time system.

    Level-set iteration on the Hamiltonian matrix: starting from the best
    value of a coarse log grid (plus pole frequencies and ``hint_freqs``),
    each level ``gamma (1 + 2 rel_tol)`` is tested for imaginary-axis
    Hamiltonian eigenvalues.  Crossing frequencies bracket the intervals
    where ``sigma_max > gamma``; their midpoints raise the lower bound.
    The iteration stops once a level has no crossings.  The peak is then
    polished by a local 1-D maximization.

    Returns
    -------
    norm, omega_peak
        ``omega_peak`` is ``inf`` when the supremum is attained at infinite
        frequency.
    """
    if rel_tol is None:
        rel_tol = NUMERICS.default_hinf_rel_tol
    if not 0 < rel_tol <= 0.1:
        raise ValueError("rel_tol must lie in (0, 0.1]")
    A, B, C, D = (np.asarray(x, dtype=float) for x in (sys.A, sys.B, sys.C, sys.D))
    n = A.shape[0]
    d_norm = _smax(D)
    if n == 0 or B.shape[1] == 0 or C.shape[0] == 0:
        return d_norm, np.inf
    stable, alpha = is_hurwitz(A)
    if not stable:
        raise NotStable(f"spectral abscissa {alpha:.3e} is not negative")

    ev = _ModalEvaluator(sys)
    lam = np.linalg.eigvals(A)
    mags = np.abs(lam)
    w_lo = max(1e-6, 0.1 * mags.min())
    w_hi = 10.0 * mags.max()
    grid = np.concatenate([
        [0.0],
        np.geomspace(w_lo, w_hi, NUMERICS.hinf_coarse_points),
        np.abs(lam.imag),
        mags,
        np.asarray(hint_freqs, dtype=float).ravel(),
    ])
    grid = grid[np.isfinite(grid) & (grid >= 0)]
    values = ev.sigma_max(grid)
    k = int(np.argmax(values))
    gamma_lb, w_peak = float(values[k]), float(grid[k])
    if d_norm > gamma_lb:
        gamma_lb, w_peak = d_norm, np.inf

    if gamma_lb == 0.0:
        return 0.0, 0.0

    use_grid = False
    for _ in range(100):
        gamma = (1.0 + 2.0 * rel_tol) * gamma_lb
        d_sv = np.linalg.svd(D, compute_uv=False) if D.size else np.zeros(0)
        if d_sv.size and np.min(np.abs(d_sv - gamma)) <= NUMERICS.hamiltonian_d_margin * gamma:
            use_grid = True
            break
        crossings = _imaginary_frequencies(_hamiltonian(sys, gamma))
        if crossings.size == 0:
            break
        pts = np.concatenate([crossings, 0.5 * (crossings[:-1] + crossings[1:])])
        if crossings.size == 1:
            pts = np.concatenate([pts, [0.0]])
        vals = ev.sigma_max(pts)
        j = int(np.argmax(vals))
        if vals[j] <= gamma_lb * (1.0 + 1e-15):
            break
        gamma_lb, w_peak = float(vals[j]), float(pts[j])

    if use_grid:
        fine = np.concatenate([[0.0], np.geomspace(w_lo * 1e-2, w_hi * 1e2, 20000)])
        vals = ev.sigma_max(fine)
        j = int(np.argmax(vals))
        if vals[j] > gamma_lb:
            gamma_lb, w_peak = float(vals[j]), float(fine[j])

    if np.isfinite(w_peak):
        w_peak, val = _refine_peak(lambda w: sigma_max(sys, w), w_peak)
        gamma_lb = val
    return gamma_lb, w_peak


def sym_eig(M) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvectors of symmetric ``M``."""
    M = _square(M, "M")
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def log_grid(w_min: float, w_max: float, points: int) -> np.ndarray:
    """Strictly increasing log-spaced frequency grid in rad/s."""
    if not 0 < w_min < w_max:
        raise ValueError("need 0 < w_min < w_max")
    return np.geomspace(w_min, w_max, points)


def sigma_sweep(sys, omegas) -> np.ndarray:
    """``sigma_max(G(j omega))`` over an array of frequencies."""
    return _ModalEvaluator(sys).sigma_max(omegas)
