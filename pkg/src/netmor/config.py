"""Numerical thresholds shared by the package.

Every threshold lives on one mutable :class:`Numerics` instance,
:data:`NUMERICS`.  Use :func:`configure` to override values temporarily::

    with configure(wellposed_cond=1e10):
        close_loop(plant, net)
"""

from __future__ import annotations

import contextlib
import dataclasses


@dataclasses.dataclass
class Numerics:
    # spectral abscissa must be below -stability_margin
    stability_margin: float = 1e-12
    resolvent_cond: float = 1e14
    wellposed_cond: float = 1e12
    fast_block_cond: float = 1e12
    degenerate_gramian: float = 1e-12
    near_singular_hsv: float = 1e-12
    # |Re(lambda)| <= imag_axis_tol * max(1, |lambda|) counts as imaginary
    imag_axis_tol: float = 1e-8
    # grid fallback when a singular value of D is this close (relative) to gamma
    hamiltonian_d_margin: float = 1e-8
    hinf_coarse_points: int = 200
    default_hinf_rel_tol: float = 1e-9


NUMERICS = Numerics()


@contextlib.contextmanager
def configure(**overrides):
    """Temporarily override fields of :data:`NUMERICS`."""
    old = dataclasses.asdict(NUMERICS)
    unknown = set(overrides) - set(old)
    if unknown:
        raise TypeError(f"unknown numerics settings: {sorted(unknown)}")
    for key, value in overrides.items():
        setattr(NUMERICS, key, value)
    try:
        yield NUMERICS
    finally:
        for key, value in old.items():
            setattr(NUMERICS, key, value)
