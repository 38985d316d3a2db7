"""Leapfrog time stepping of the reduced Schrodinger equation.

One step writes

    psi[n+1] = mask * ( psi[n-1] + 2i*eta*dtau * lap(psi[n])
                        - 2i*dtau * (V/E0) * psi[n]
                        - 2i*dtau * injection[n] )

where ``lap`` is either the spectral Laplacian (inverse transform of
-k^2 times the forward transform, per axis) or the eighth-order central
finite-difference stencil, ``eta`` is an optional kinetic rescaling that
cancels the time-discretization phase-velocity error for a monochromatic
wave, and ``injection`` carries the incident wave across the transition
layer.  The damping mask multiplies the whole bracket, after the free
update.

Both spatial operators admit a sufficient stability bound on the time
step.  The spectral operator's representable kinetic energy is capped by
the Nyquist wavenumber per axis, giving

    dtau <= 1 / ( pi^2 * sum(1/spacing^2) + |V/E0|_max )

while the stencil's symbol peaks at 2048/315 instead of pi^2, so its bound
is looser: for equal spacings the spectral bound is the smaller one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.fft as sfft

from .lattice import GridSpec, WaveField

try:  # complex input support in ndimage exists in modern scipy
    from scipy.ndimage import correlate1d as _correlate1d

    _correlate1d(np.ones(16, dtype=np.complex128), np.array([1.0, 0.0, 1.0]))
    _HAVE_COMPLEX_CORRELATE = True
except Exception:  # pragma: no cover
    _HAVE_COMPLEX_CORRELATE = False

#: central second-derivative stencil, offsets 0..4; the coefficient sum
#: alpha0 + 2*(alpha1+alpha2+alpha3+alpha4) is exactly zero.
STENCIL_COEFFICIENTS: Tuple[float, ...] = (
    -205.0 / 72.0,
    8.0 / 5.0,
    -1.0 / 5.0,
    8.0 / 315.0,
    -1.0 / 560.0,
)

#: peak of the stencil symbol f(delta) at delta = pi (exact rational)
STENCIL_SYMBOL_MAX = 2048.0 / 315.0


class InstabilityError(RuntimeError):
    """The field produced non-finite values; carries step and grid index."""

    def __init__(self, message: str, step_index: int = -1, grid_index=None):
        super().__init__(message)
        self.step_index = step_index
        self.grid_index = grid_index


def stencil_factor(delta) -> np.ndarray:
    """Symbol of the eighth-order stencil on a plane wave.

    For psi = exp(i*delta*j) the stencil returns -f(delta)/spacing^2 times
    psi with

        f(d) = (16/35) s^8 + (32/45) s^6 + (4/3) s^4 + 4 s^2,  s = sin(d/2).

    f(0) = 0, f(pi) = 2048/315, and f(d) -> d^2 for small d.
    """
    s2 = np.square(np.sin(np.asarray(delta, dtype=float) / 2.0))
    return s2 * (4.0 + s2 * (4.0 / 3.0 + s2 * (32.0 / 45.0 + s2 * (16.0 / 35.0))))


def _spacings(grid_or_spacing) -> Tuple[float, ...]:
    if isinstance(grid_or_spacing, GridSpec):
        return grid_or_spacing.spacing
    if isinstance(grid_or_spacing, (int, float)):
        return (float(grid_or_spacing),)
    return tuple(float(d) for d in grid_or_spacing)


def stability_dtau_fdtd(grid_or_spacing, vmax: float = 0.0) -> float:
    """Sufficient time-step bound for the stencil stepper (reduced units)."""
    sp = _spacings(grid_or_spacing)
    if any(d <= 0 for d in sp):
        raise ValueError(f"spacings must be positive, got {sp}")
    if vmax < 0:
        raise ValueError("vmax is a magnitude, must be nonnegative")
    return 1.0 / (STENCIL_SYMBOL_MAX * sum(1.0 / d**2 for d in sp) + vmax)


def stability_dtau_pstd(grid_or_spacing, vmax: float = 0.0) -> float:
    """Sufficient time-step bound for the spectral stepper (reduced units)."""
    sp = _spacings(grid_or_spacing)
    if any(d <= 0 for d in sp):
        raise ValueError(f"spacings must be positive, got {sp}")
    if vmax < 0:
        raise ValueError("vmax is a magnitude, must be nonnegative")
    return 1.0 / (math.pi**2 * sum(1.0 / d**2 for d in sp) + vmax)


def stability_dtau(mode: str, grid_or_spacing, vmax: float = 0.0) -> float:
    if mode == "pstd":
        return stability_dtau_pstd(grid_or_spacing, vmax)
    if mode == "fdtd":
        return stability_dtau_fdtd(grid_or_spacing, vmax)
    raise ValueError(f"unknown stepper mode {mode!r}")


def phase_velocity_correction(dtau: float) -> float:
    """Kinetic rescaling sin(dtau)/dtau for monochromatic incidence.

    The leapfrog time discretization distorts the dispersion relation by
    exactly this factor at the central frequency; multiplying the kinetic
    term by it makes the unit-wavenumber mode advance at the exact phase
    velocity.
    """
    if not 0.0 < dtau < math.pi:
        raise ValueError(f"dtau must lie in (0, pi), got {dtau}")
    return math.sin(dtau) / dtau


def _wavenumbers(shape, spacing) -> list:
    """Per-axis angular wavenumbers in transform order (negative half
    folded to the upper indices, i.e. the index shifted to -N/2..N/2-1)."""
    return [
        2.0 * math.pi * sfft.fftfreq(n, d=h)
        for n, h in zip(shape, spacing)
    ]


def laplacian_pstd(field: np.ndarray, spacing, workers: Optional[int] = None) -> np.ndarray:
    """Spectral Laplacian on the periodic lattice (exact for band-limited
    fields).  Returns the physical Laplacian: negative-semidefinite, so a
    plane wave exp(i*x) maps to minus itself."""
    sp = _spacings(spacing)
    if len(sp) != field.ndim:
        raise ValueError("spacing does not match field dimensionality")
    ks = _wavenumbers(field.shape, sp)
    k2 = _sum_outer_squares(ks)
    spec = sfft.fftn(field, workers=workers)
    spec *= -k2
    return sfft.ifftn(spec, workers=workers, overwrite_x=True)


def _sum_outer_squares(ks) -> np.ndarray:
    nd = len(ks)
    out = None
    for ax, k in enumerate(ks):
        shape = [1] * nd
        shape[ax] = k.size
        term = (k * k).reshape(shape)
        out = term.copy() if out is None else out + term
    return out


_FDTD_WEIGHTS = np.array(
    [
        STENCIL_COEFFICIENTS[4],
        STENCIL_COEFFICIENTS[3],
        STENCIL_COEFFICIENTS[2],
        STENCIL_COEFFICIENTS[1],
        STENCIL_COEFFICIENTS[0],
        STENCIL_COEFFICIENTS[1],
        STENCIL_COEFFICIENTS[2],
        STENCIL_COEFFICIENTS[3],
        STENCIL_COEFFICIENTS[4],
    ]
)


def laplacian_fdtd(field: np.ndarray, spacing) -> np.ndarray:
    """Eighth-order central-stencil Laplacian with periodic wrap.

    The wrap only ever touches the outermost four grids per side, which sit
    deep in the absorbing layer in a production geometry, so no one-sided
    stencils are needed.  Exact (to roundoff) for polynomials through
    degree 9 away from the wrap seam.
    """
    sp = _spacings(spacing)
    if len(sp) != field.ndim:
        raise ValueError("spacing does not match field dimensionality")
    out = np.zeros_like(field, dtype=np.complex128)
    f = field.astype(np.complex128, copy=False)
    for ax, h in enumerate(sp):
        if _HAVE_COMPLEX_CORRELATE:
            term = _correlate1d(f, _FDTD_WEIGHTS, axis=ax, mode="wrap")
        else:  # pragma: no cover
            term = (
                _correlate1d(f.real, _FDTD_WEIGHTS, axis=ax, mode="wrap")
                + 1j * _correlate1d(f.imag, _FDTD_WEIGHTS, axis=ax, mode="wrap")
            )
        out += term / h**2
    return out


@dataclass
class PotentialTerm:
    """Static potential folded to its nonzero bounding box."""

    box: Tuple[slice, ...]
    values: np.ndarray  # V/E0 on the box

    @classmethod
    def from_array(cls, v: np.ndarray) -> Optional["PotentialTerm"]:
        nz = np.nonzero(v)
        if len(nz[0]) == 0:
            return None
        box = tuple(slice(int(i.min()), int(i.max()) + 1) for i in nz)
        return cls(box=box, values=np.ascontiguousarray(v[box]))

    def apply(self, out: np.ndarray, cur: np.ndarray, coef: complex) -> None:
        out[self.box] += coef * (self.values * cur[self.box])


class Propagator:
    """Precomputed single-lattice stepper.

    Holds everything reusable across steps: the spectral multiplier with
    the update constants folded in, the damping mask, the potential's
    bounding box, and the injection term.  ``injection`` is any object with
    ``apply(out, n, coef)`` adding its contribution for time level n scaled
    by ``coef = -2j*dtau`` (spectral taper injection) or the wall-correction
    equivalent; see :mod:`qpstd.tfsf`.

    ``on_spectrum`` is called with (n, spectrum-of-level-n) right after the
    forward transform in spectral mode; the phasor recorder uses it to read
    normal derivatives without extra transforms.
    """

    def __init__(
        self,
        grid: GridSpec,
        mode: str = "pstd",
        kinetic_scale: float = 1.0,
        mask: Optional[np.ndarray] = None,
        potential: Optional[np.ndarray] = None,
        injection=None,
        workers: Optional[int] = None,
        nan_check_every: int = 50,
        enforce_stability: bool = True,
    ):
        if mode not in ("pstd", "fdtd"):
            raise ValueError(f"unknown stepper mode {mode!r}")
        self.grid = grid
        self.mode = mode
        self.kinetic_scale = float(kinetic_scale)
        self.dtau = grid.dtau
        self.workers = workers
        self.nan_check_every = int(nan_check_every)
        self.injection = injection
        self.on_spectrum = None

        vmax = 0.0
        self.potential = None
        if potential is not None:
            v = np.asarray(potential, dtype=float)
            if v.shape != grid.n:
                raise ValueError("potential shape does not match the lattice")
            vmax = float(np.abs(v).max())
            self.potential = PotentialTerm.from_array(v)
        bound = stability_dtau(mode, grid, vmax)
        if enforce_stability and self.dtau > bound * (1.0 + 1e-12):
            raise ValueError(
                f"dtau={self.dtau:.6g} exceeds the {mode} stability bound "
                f"{bound:.6g} for |V|max={vmax:.3g}"
            )
        self.stability_bound = bound

        if mask is None:
            self._mask = None
        else:
            m = mask.mask if hasattr(mask, "mask") else np.asarray(mask)
            if m.shape != grid.n:
                raise ValueError("mask shape does not match the lattice")
            self._mask = m

        if mode == "pstd":
            ks = _wavenumbers(grid.n, grid.spacing)
            k2 = _sum_outer_squares(ks)
            # kinetic term: +2i*eta*dtau * lap == ifft((-2i*eta*dtau*k2) * fft)
            self._k2c = (-2j * self.kinetic_scale * self.dtau) * k2

    def step(self, state: WaveField) -> WaveField:
        """Advance one leapfrog step and return the rotated state."""
        if state.shape != self.grid.n:
            raise ValueError("state shape does not match the lattice")
        n = state.n
        if self.mode == "pstd":
            spec = sfft.fftn(state.cur, workers=self.workers)
            if self.on_spectrum is not None:
                self.on_spectrum(n, spec)
            spec *= self._k2c
            out = sfft.ifftn(spec, workers=self.workers, overwrite_x=True)
        else:
            out = laplacian_fdtd(state.cur, self.grid.spacing)
            out *= 2j * self.kinetic_scale * self.dtau
        out += state.prev
        if self.potential is not None:
            self.potential.apply(out, state.cur, -2j * self.dtau)
        if self.injection is not None:
            self.injection.apply(out, n, self)
        if self._mask is not None:
            out *= self._mask
        new = WaveField(prev=state.cur, cur=out, n=n + 1)
        if self.nan_check_every > 0 and new.n % self.nan_check_every == 0:
            if not np.all(np.isfinite(out.view(float))):
                bad = np.argwhere(~np.isfinite(out))
                raise InstabilityError(
                    f"non-finite field at step {new.n}, grid {tuple(bad[0])}",
                    step_index=new.n,
                    grid_index=tuple(bad[0]),
                )
        return new


def step(
    state: WaveField,
    grid: GridSpec,
    masks=None,
    potential: Optional[np.ndarray] = None,
    source=None,
    mode: str = "pstd",
    kinetic_scale: float = 1.0,
    workers: Optional[int] = None,
) -> WaveField:
    """One-shot leapfrog step (builds a throwaway :class:`Propagator`).

    Hot loops should construct the Propagator once and reuse it; this
    functional form exists for tests and small experiments.
    """
    prop = Propagator(
        grid,
        mode=mode,
        kinetic_scale=kinetic_scale,
        mask=masks,
        potential=potential,
        injection=source,
        workers=workers,
        nan_check_every=1,
    )
    return prop.step(state)
