"""Reduced units, grid geometry, region layout and leapfrog field state.

The lattice is organized as nested regions, outermost to innermost:

    absorbing layer (ABC) -> scattered-field zone (SF) -> transition layer
    -> total-field zone (TF)

Widths are given in grids per side and are the same on the low and high
side of every axis.  Lattice coordinates are centered: grid ``i`` along an
axis of ``n`` grids with spacing ``d`` sits at ``(i - (n - 1) / 2) * d``,
so the model center is the coordinate origin and virtual planes placed
symmetrically land on grid planes.

A lattice point belongs to the TF only if every axis index falls in the
axis TF interval; it belongs to the transition layer if every axis falls
in TF-or-transition but not all in TF, and so on outward.  Equivalently,
with per-axis codes ABC=0 < SF=1 < TRANSITION=2 < TF=3, the region of a
point is the minimum of its per-axis codes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Region widths do not fit the lattice, or nesting is violated."""


class PotentialSupportError(ValueError):
    """Declared potential support extends outside the total-field zone."""


def to_reduced(x: float, lambda0: float) -> float:
    """Convert a physical length to reduced units, ``2*pi*x / lambda0``.

    One incident wavelength maps to one reduced period 2*pi.
    """
    if lambda0 <= 0:
        raise ValueError(f"wavelength must be positive, got {lambda0}")
    return TWO_PI * x / lambda0


def from_reduced(xbar: float, lambda0: float) -> float:
    """Inverse of :func:`to_reduced`."""
    if lambda0 <= 0:
        raise ValueError(f"wavelength must be positive, got {lambda0}")
    return xbar * lambda0 / TWO_PI


@dataclass(frozen=True)
class UnitSystem:
    """Reduced-unit bookkeeping.

    Internally everything is dimensionless: reduced time ``tau = omega0*t``
    and reduced coordinates ``x/lambdabar0``.  ``lambda0`` is carried only
    so that I/O can convert back to physical lengths; the solver core never
    reads it.
    """

    lambda0: Optional[float] = None

    def to_reduced(self, x: float) -> float:
        if self.lambda0 is None:
            raise ValueError("no physical wavelength configured")
        return to_reduced(x, self.lambda0)

    def from_reduced(self, xbar: float) -> float:
        if self.lambda0 is None:
            raise ValueError("no physical wavelength configured")
        return from_reduced(xbar, self.lambda0)


@dataclass(frozen=True)
class GridSpec:
    """Lattice sizes, spacings and the time increment, all reduced.

    ``spacing`` is per axis; ``2*pi / spacing`` is the grids-per-wavelength
    resolution, which must stay at or above ``min_grids_per_wavelength``.
    ``dtau`` must additionally respect the stability bound of the active
    stepper; that check lives with the stepper since the bound depends on
    the spatial operator.
    """

    n: Tuple[int, ...]
    spacing: Tuple[float, ...]
    dtau: float
    min_grids_per_wavelength: float = 4.0

    def __post_init__(self):
        if len(self.n) != len(self.spacing):
            raise ValueError("n and spacing must have the same length")
        if any(int(m) != m or m <= 0 for m in self.n):
            raise ValueError(f"grid sizes must be positive integers, got {self.n}")
        if any(d <= 0 for d in self.spacing):
            raise ValueError(f"spacings must be positive, got {self.spacing}")
        if self.dtau <= 0:
            raise ValueError(f"dtau must be positive, got {self.dtau}")
        gpw = self.grids_per_wavelength
        if min(gpw) < self.min_grids_per_wavelength:
            raise ValueError(
                f"resolution too coarse: {gpw} grids per wavelength, "
                f"floor is {self.min_grids_per_wavelength}"
            )

    @property
    def ndim(self) -> int:
        return len(self.n)

    @property
    def grids_per_wavelength(self) -> Tuple[float, ...]:
        return tuple(TWO_PI / d for d in self.spacing)

    def coords(self, axis: int) -> np.ndarray:
        """Centered reduced coordinates of the grids along ``axis``."""
        n = self.n[axis]
        return (np.arange(n) - 0.5 * (n - 1)) * self.spacing[axis]


class Region(IntEnum):
    """Per-point region code; ordered outermost to innermost."""

    ABC = 0
    SF = 1
    TRANSITION = 2
    TF = 3


@dataclass(frozen=True)
class ModelGeometry:
    """Nested region layout of the internal model.

    Per side of each axis, from the outside in: ``w_abc`` absorbing grids,
    ``w_sf`` scattered-field grids, ``w_trans`` transition grids, then the
    total-field interior.  The taper anchor grids (value exactly 0 on the
    last SF grid and exactly 1 on the first TF grid) sit just outside the
    transition interval, which carries strictly intermediate values.

    One virtual plane per face is placed at the center of the SF shell;
    ``w_halo`` records the overlap width used when the lattice is split
    into subdomains (informational here, enforced by the decomposition).
    """

    n: Tuple[int, ...]
    w_abc: int
    w_sf: int
    w_trans: int
    w_halo: int = 0
    stepper_mode: str = "pstd"

    def __post_init__(self):
        if self.stepper_mode not in ("pstd", "fdtd"):
            raise GeometryError(f"unknown stepper mode {self.stepper_mode!r}")
        for name, w in (("w_abc", self.w_abc), ("w_sf", self.w_sf),
                        ("w_trans", self.w_trans)):
            if w <= 0:
                raise GeometryError(f"{name} must be positive, got {w}")
        if self.stepper_mode == "fdtd" and self.w_trans != 8:
            raise GeometryError(
                f"the finite-difference stepper needs a transition layer of "
                f"exactly 8 grids (4 per side of the conversion plane), got "
                f"{self.w_trans}"
            )
        shell = self.w_abc + self.w_sf + self.w_trans
        for ax, m in enumerate(self.n):
            if m - 2 * shell < 1:
                raise GeometryError(
                    f"axis {ax}: total shell width 2*{shell} leaves no "
                    f"total-field interior on {m} grids"
                )
        if self.w_sf < 3:
            raise GeometryError(
                "scattered-field zone must be at least 3 grids wide so the "
                "virtual plane clears both the absorber and the transition"
            )

    # -- per-axis intervals (inclusive index bounds) -------------------

    def tf_interval(self, axis: int) -> Tuple[int, int]:
        lo = self.w_abc + self.w_sf + self.w_trans
        return lo, self.n[axis] - 1 - lo

    def transition_intervals(self, axis: int) -> Tuple[Tuple[int, int], Tuple[int, int]]:
        """Low-side and high-side transition intervals along ``axis``."""
        lo0 = self.w_abc + self.w_sf
        lo1 = lo0 + self.w_trans - 1
        hi1 = self.n[axis] - 1 - lo0
        hi0 = hi1 - self.w_trans + 1
        return (lo0, lo1), (hi0, hi1)

    def sf_intervals(self, axis: int) -> Tuple[Tuple[int, int], Tuple[int, int]]:
        lo0 = self.w_abc
        return (lo0, lo0 + self.w_sf - 1), (
            self.n[axis] - self.w_abc - self.w_sf,
            self.n[axis] - 1 - self.w_abc,
        )

    def taper_breakpoints(self, axis: int) -> Tuple[int, int, int, int]:
        """Anchor grids (a0, a1, a2, a3) of the per-axis taper.

        The taper is exactly 0 at and outside a0, rises on a0+1 .. a1-1,
        is exactly 1 on a1 .. a2, falls on a2+1 .. a3-1, and is 0 at and
        beyond a3.
        """
        a1, a2 = self.tf_interval(axis)
        return a1 - self.w_trans - 1, a1, a2, a2 + self.w_trans + 1

    def axis_codes(self, axis: int) -> np.ndarray:
        """Per-grid region code along one axis (Region values)."""
        m = self.n[axis]
        codes = np.full(m, int(Region.ABC), dtype=np.int8)
        (s0, s1), (s2, s3) = self.sf_intervals(axis)
        codes[s0 : s1 + 1] = int(Region.SF)
        codes[s2 : s3 + 1] = int(Region.SF)
        (t0, t1), (t2, t3) = self.transition_intervals(axis)
        codes[t0 : t1 + 1] = int(Region.TRANSITION)
        codes[t2 : t3 + 1] = int(Region.TRANSITION)
        f0, f1 = self.tf_interval(axis)
        codes[f0 : f1 + 1] = int(Region.TF)
        return codes

    def region_map(self) -> np.ndarray:
        """Full-lattice region codes (min of the per-axis codes)."""
        out = None
        nd = len(self.n)
        for ax in range(nd):
            shape = [1] * nd
            shape[ax] = self.n[ax]
            c = self.axis_codes(ax).reshape(shape)
            out = c.copy() if out is None else np.minimum(out, c)
        return np.broadcast_to(out, self.n).copy() if out.shape != self.n else out

    def region_mask(self, region: Region) -> np.ndarray:
        return self.region_map() == int(region)

    @property
    def tf_slices(self) -> Tuple[slice, ...]:
        out = []
        for ax in range(len(self.n)):
            lo, hi = self.tf_interval(ax)
            out.append(slice(lo, hi + 1))
        return tuple(out)

    # -- virtual planes -------------------------------------------------

    def virtual_plane_index(self, axis: int, side: str) -> int:
        """Grid index of the virtual plane on one face (center of the SF)."""
        off = self.w_abc + self.w_sf // 2
        idx = off if side == "low" else self.n[axis] - 1 - off
        (s0, s1), (s2, s3) = self.sf_intervals(axis)
        # must clear the absorber's inner edge and the transition layer
        if side == "low" and not (s0 + 1 <= idx <= s1 - 1):
            raise GeometryError("virtual plane does not fit inside the SF shell")
        if side == "high" and not (s2 + 1 <= idx <= s3 - 1):
            raise GeometryError("virtual plane does not fit inside the SF shell")
        return idx

    def virtual_box(self) -> Tuple[Tuple[int, int], ...]:
        """Per-axis (low, high) grid indices of the virtual-surface box."""
        return tuple(
            (self.virtual_plane_index(ax, "low"), self.virtual_plane_index(ax, "high"))
            for ax in range(len(self.n))
        )

    # -- FDTD conversion box ---------------------------------------------

    def fdtd_total_box(self) -> Tuple[Tuple[int, int], ...]:
        """Per-axis interval holding total-field values under the FDTD split.

        The 8-grid transition layer is split 4/4: the inner four grids store
        total field, the outer four store scattered field.
        """
        if self.stepper_mode != "fdtd":
            raise GeometryError("total/scattered split is defined for the fdtd mode")
        out = []
        for ax in range(len(self.n)):
            (t0, _), (_, t3) = self.transition_intervals(ax)
            out.append((t0 + 4, t3 - 4))
        return tuple(out)

    def transition_outer_bounds(self) -> Tuple[Tuple[int, int], ...]:
        """Per-axis index extremes of the transition layer's outer surface.

        This is the box the incident wavefront first touches; its corners
        are the candidate origins of the 1D incident-wave axis.
        """
        out = []
        for ax in range(len(self.n)):
            (t0, _), (_, t3) = self.transition_intervals(ax)
            out.append((t0, t3))
        return tuple(out)


def build_geometry(
    n: Sequence[int],
    w_abc: int,
    w_sf: int,
    w_trans: int,
    w_halo: int = 0,
    stepper_mode: str = "pstd",
) -> ModelGeometry:
    """Validate widths against the lattice and return the region layout."""
    return ModelGeometry(
        n=tuple(int(m) for m in n),
        w_abc=int(w_abc),
        w_sf=int(w_sf),
        w_trans=int(w_trans),
        w_halo=int(w_halo),
        stepper_mode=stepper_mode,
    )


@dataclass
class WaveField:
    """Leapfrog state: the complex lattice at two consecutive time levels.

    Inside the TF the stored value is the total wave; in the SF it is the
    scattered wave only.  The three-level update writes a new level from
    ``prev`` and ``cur`` and then rotates.
    """

    prev: np.ndarray
    cur: np.ndarray
    n: int = 0

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> "WaveField":
        shape = tuple(shape)
        return cls(
            prev=np.zeros(shape, dtype=np.complex128),
            cur=np.zeros(shape, dtype=np.complex128),
            n=0,
        )

    def __post_init__(self):
        if self.prev.shape != self.cur.shape:
            raise ValueError("leapfrog levels must share one shape")

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.cur.shape


@dataclass(frozen=True)
class PotentialSpec:
    """Interaction strength relative to the incident central energy.

    ``evaluator`` maps reduced coordinate arrays (one per axis, broadcastable)
    to V/E0.  ``support_radius`` declares the reduced radius beyond which the
    evaluator is zero; it is validated against the TF box and the evaluated
    lattice is hard-zeroed outside the TF so the interaction can never leak
    into the conversion layer.
    """

    evaluator: Callable[..., np.ndarray]
    support_radius: float
    name: str = "custom"


def central_square_well(s: float, radius: float, antialias: int = 4) -> PotentialSpec:
    """Uniform spherical potential of strength ``s`` (relative to the
    incident energy) and the given reduced radius.

    ``antialias > 1`` averages the indicator over that many sub-samples per
    grid per axis, softening the voxelized sphere boundary toward the true
    one; 1 samples at grid centers only.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if antialias < 1:
        raise ValueError("antialias factor must be >= 1")

    def evaluator(*axes: np.ndarray) -> np.ndarray:
        if antialias == 1:
            r2 = sum(np.square(a) for a in _broadcast(axes))
            return np.where(r2 <= radius * radius, s, 0.0)
        # sub-grid averaging of the sphere indicator
        spacings = [_axis_step(a) for a in axes]
        acc = None
        offs = (np.arange(antialias) + 0.5) / antialias - 0.5
        for off in np.ndindex(*([antialias] * len(axes))):
            shifted = [
                a + offs[o] * h for a, o, h in zip(_broadcast(axes), off, spacings)
            ]
            r2 = sum(np.square(a) for a in shifted)
            term = (r2 <= radius * radius).astype(float)
            acc = term if acc is None else acc + term
        return s * acc / antialias ** len(axes)

    return PotentialSpec(
        evaluator=evaluator,
        support_radius=radius,
        name=f"square_well(s={s}, radius={radius})",
    )


def _broadcast(axes) -> list:
    nd = len(axes)
    out = []
    for ax, a in enumerate(axes):
        shape = [1] * nd
        shape[ax] = a.size
        out.append(np.asarray(a).reshape(shape))
    return out


def _axis_step(a: np.ndarray) -> float:
    a = np.asarray(a).ravel()
    return float(a[1] - a[0]) if a.size > 1 else 1.0


def build_potential(
    spec: PotentialSpec, geometry: ModelGeometry, grid: GridSpec
) -> np.ndarray:
    """Evaluate a potential on the lattice, confined to the TF zone.

    Raises if the declared support does not fit inside the TF box; values
    outside the TF are zeroed regardless of the evaluator.
    """
    if geometry.n != grid.n:
        raise ValueError("geometry and grid describe different lattices")
    for ax in range(grid.ndim):
        lo, hi = geometry.tf_interval(ax)
        c = grid.coords(ax)
        # largest centered radius that still fits in the TF along this axis
        reach = min(abs(c[lo]), abs(c[hi]))
        if spec.support_radius > reach + 1e-12:
            raise PotentialSupportError(
                f"potential support radius {spec.support_radius} exceeds the "
                f"TF half-width {reach:.6g} along axis {ax}"
            )
    axes = [grid.coords(ax) for ax in range(grid.ndim)]
    v = np.asarray(spec.evaluator(*axes), dtype=float)
    v = np.broadcast_to(v, grid.n).copy()
    out = np.zeros(grid.n, dtype=float)
    sl = geometry.tf_slices
    out[sl] = v[sl]
    return out
