"""Masking absorbing boundary.

The outgoing wave is damped by a pointwise multiplier applied after every
leapfrog update, equivalent to adding a negative imaginary potential to the
Hamiltonian.  The damping rate per axis follows the inverse-cosh-squared
profile

    rate(d) = u0 / cosh(alpha * d)**2

with ``d`` the distance in grids from the outermost lattice surface, and
the 3D multiplier is the product of the per-axis factors
``exp(-rate * dtau)``.  The exponential form keeps the multiplier strictly
positive for any time step.

The plain profile never reaches zero, so on small lattices its tail damps
the scattered-field shell where virtual planes record phasors.  The
``clipped`` variant shifts the profile to vanish exactly at the layer's
inner edge (still smooth to first order in practice: the slope there is
~2*alpha*rate(width), tiny for the usual parameters), leaving everything
inside the shell untouched.  Any other nonnegative rate profile can be
plugged in; nonnegativity is what guarantees the mask can only remove norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .lattice import GridSpec, ModelGeometry


@dataclass(frozen=True)
class AbsorberProfile:
    """Damping-rate profile of one absorbing layer.

    ``u0`` is the dimensionless peak rate, ``alpha`` the decay per grid,
    ``width`` the layer thickness in grids.  ``clipped=True`` subtracts the
    profile's value at the inner edge so the rate is exactly zero beyond
    the layer.  ``rate_fn`` overrides the built-in shape; it must be
    nonnegative (checked numerically at build time).
    """

    u0: float = 5.0
    alpha: float = 0.1
    width: int = 40
    clipped: bool = True
    rate_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.u0 <= 0:
            raise ValueError(f"u0 must be positive, got {self.u0}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.width <= 0:
            raise ValueError(f"width must be positive, got {self.width}")

    def rate(self, d: np.ndarray) -> np.ndarray:
        """Damping rate at distance ``d`` (grids) from the outer surface."""
        d = np.asarray(d, dtype=float)
        if self.rate_fn is not None:
            r = np.asarray(self.rate_fn(d), dtype=float)
        else:
            r = self.u0 / np.cosh(self.alpha * d) ** 2
            if self.clipped:
                edge = self.u0 / np.cosh(self.alpha * self.width) ** 2
                r = np.maximum(r - edge, 0.0)
                r[d >= self.width] = 0.0
        if np.any(r < 0):
            raise ValueError("damping rate must be nonnegative everywhere")
        return r


@dataclass(frozen=True)
class AbsorberMask:
    """Precomputed per-step multiplier, separable across axes."""

    axis_factors: Tuple[np.ndarray, ...]

    @property
    def mask(self) -> np.ndarray:
        """The full lattice multiplier (product of the axis factors)."""
        nd = len(self.axis_factors)
        out = None
        for ax, f in enumerate(self.axis_factors):
            shape = [1] * nd
            shape[ax] = f.size
            g = f.reshape(shape)
            out = g.copy() if out is None else out * g
        return out


def build_mask(
    profiles,
    geometry: ModelGeometry,
    dtau: float,
) -> AbsorberMask:
    """Build the damping multiplier for every lattice grid.

    ``profiles`` is one AbsorberProfile shared by all axes or a sequence of
    one per axis.  The per-axis distance is measured in grids from whichever
    lattice face is nearer; the profile widths must match the geometry's
    absorbing-layer width and fit in half the lattice.
    """
    nd = len(geometry.n)
    if isinstance(profiles, AbsorberProfile):
        profiles = (profiles,) * nd
    if len(profiles) != nd:
        raise ValueError(f"need {nd} profiles, got {len(profiles)}")
    factors = []
    for ax, prof in enumerate(profiles):
        m = geometry.n[ax]
        if prof.width > m // 2:
            raise ValueError(
                f"absorber width {prof.width} exceeds half the lattice ({m} grids)"
            )
        idx = np.arange(m, dtype=float)
        d = np.minimum(idx, m - 1 - idx)
        factors.append(np.exp(-prof.rate(d) * dtau))
    return AbsorberMask(axis_factors=tuple(factors))


def apply_mask(field: np.ndarray, mask) -> np.ndarray:
    """Multiply a field by the damping mask, in place, and return it.

    ``mask`` may be an AbsorberMask or a plain array of matching shape.
    This is the second half of a leapfrog update: first the free update,
    then the attenuation.
    """
    m = mask.mask if isinstance(mask, AbsorberMask) else np.asarray(mask)
    if m.shape != field.shape:
        raise ValueError(f"shape mismatch: field {field.shape}, mask {m.shape}")
    field *= m
    return field
