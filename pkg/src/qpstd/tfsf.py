"""Total-field/scattered-field conversion.

The lattice stores one wave function that means "total" inside the TF box
and "scattered" in the SF shell.  The incident plane wave enters only
through the transition layer, in one of two ways:

* spectral stepper: the stored field is ``psi_scat + taper * psi_inc``
  with a smooth separable taper (1 in the TF, 0 in the SF).  Moving the
  taper through the free-space equation leaves a source term

      lap(taper) * psi_inc + 2 * grad(taper) . grad(psi_inc)

  supported on the transition shell only.  The taper profile used here is
  a polynomial-plus-sines blend whose first four derivatives vanish at
  both ends, so the spectral transform sees no sharp feature.

* finite-difference stepper: the 8-grid transition layer is split 4/4
  into total-storing and scattered-storing grids.  Wherever the 9-point
  second-derivative stencil straddles the split, incident-wave terms are
  added to keep every stencil sum consistently all-total or all-scattered.
  Applying the per-wall corrections for all six walls in sequence handles
  the edges and corners of the box automatically.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .lattice import GridSpec, ModelGeometry, Region
from .source import IncidentSource1D, RecursiveSinusoid

_STENCIL_ALPHA = (8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0)  # offsets 1..4


def taper_profile(rho) -> np.ndarray:
    """Smooth 0-to-1 ramp on [0, 1].

    value = rho - (2/(3 pi)) sin(2 pi rho) + (1/(12 pi)) sin(4 pi rho).
    The first four derivatives vanish exactly at both endpoints, and
    profile(rho) + profile(1 - rho) = 1.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < -1e-12) or np.any(rho > 1 + 1e-12):
        raise ValueError("taper argument must lie in [0, 1]")
    return (
        rho
        - (2.0 / (3.0 * math.pi)) * np.sin(2.0 * math.pi * rho)
        + (1.0 / (12.0 * math.pi)) * np.sin(4.0 * math.pi * rho)
    )


def taper_profile_d1(rho) -> np.ndarray:
    """First derivative of :func:`taper_profile`."""
    rho = np.asarray(rho, dtype=float)
    return (
        1.0
        - (4.0 / 3.0) * np.cos(2.0 * math.pi * rho)
        + (1.0 / 3.0) * np.cos(4.0 * math.pi * rho)
    )


def taper_profile_d2(rho) -> np.ndarray:
    """Second derivative of :func:`taper_profile`."""
    rho = np.asarray(rho, dtype=float)
    return (8.0 * math.pi / 3.0) * np.sin(2.0 * math.pi * rho) - (
        4.0 * math.pi / 3.0
    ) * np.sin(4.0 * math.pi * rho)


@dataclass(frozen=True)
class TaperMask:
    """Separable taper and its analytic derivatives on the lattice.

    Stored per axis: the taper value, and its first and second derivatives
    with respect to the reduced coordinate (closed forms of the profile
    derivatives scaled by the wall span, not finite differences).  The 3D
    value is the product of the axis values; the gradient and Laplacian
    follow by the product rule.
    """

    axis_value: Tuple[np.ndarray, ...]
    axis_d1: Tuple[np.ndarray, ...]
    axis_d2: Tuple[np.ndarray, ...]

    @property
    def ndim(self) -> int:
        return len(self.axis_value)

    def _outer(self, arrays) -> np.ndarray:
        nd = self.ndim
        out = None
        for ax, f in enumerate(arrays):
            shape = [1] * nd
            shape[ax] = f.size
            g = f.reshape(shape)
            out = g.copy() if out is None else out * g
        return out

    def value(self) -> np.ndarray:
        """Full-lattice taper (1 in TF, 0 in SF)."""
        return self._outer(self.axis_value)

    def gradient(self) -> Tuple[np.ndarray, ...]:
        out = []
        for ax in range(self.ndim):
            arrays = list(self.axis_value)
            arrays[ax] = self.axis_d1[ax]
            out.append(self._outer(arrays))
        return tuple(out)

    def laplacian(self) -> np.ndarray:
        acc = None
        for ax in range(self.ndim):
            arrays = list(self.axis_value)
            arrays[ax] = self.axis_d2[ax]
            term = self._outer(arrays)
            acc = term if acc is None else acc + term
        return acc


def build_taper(geometry: ModelGeometry, grid: GridSpec) -> TaperMask:
    """Build the taper from the geometry's per-axis wall anchors.

    The anchors (a0, a1, a2, a3) carry exact values 0, 1, 1, 0; the walls
    a0+1 .. a1-1 and a2+1 .. a3-1 carry strictly intermediate values of the
    profile evaluated at fractional position across the wall span.
    """
    if geometry.n != grid.n:
        raise ValueError("geometry and grid describe different lattices")
    vals, d1s, d2s = [], [], []
    for ax in range(grid.ndim):
        a0, a1, a2, a3 = geometry.taper_breakpoints(ax)
        if a1 - a0 < 2 or a3 - a2 < 2:
            raise ValueError("transition walls are empty")
        m = grid.n[ax]
        h = grid.spacing[ax]
        v = np.zeros(m)
        d1 = np.zeros(m)
        d2 = np.zeros(m)
        v[a1 : a2 + 1] = 1.0
        # rising wall: fractional position (i - a0) / (a1 - a0)
        span_lo = (a1 - a0) * h
        i = np.arange(a0 + 1, a1)
        rho = (i - a0) / (a1 - a0)
        v[i] = taper_profile(rho)
        d1[i] = taper_profile_d1(rho) / span_lo
        d2[i] = taper_profile_d2(rho) / span_lo**2
        # falling wall: mirror of the rising one
        span_hi = (a3 - a2) * h
        i = np.arange(a2 + 1, a3)
        rho = (i - a2) / (a3 - a2)
        v[i] = 1.0 - taper_profile(rho)
        d1[i] = -taper_profile_d1(rho) / span_hi
        d2[i] = -taper_profile_d2(rho) / span_hi**2
        vals.append(v)
        d1s.append(d1)
        d2s.append(d2)
    return TaperMask(axis_value=tuple(vals), axis_d1=tuple(d1s), axis_d2=tuple(d2s))


def injection_term(
    taper: TaperMask,
    psi_inc: np.ndarray,
    grad_psi_inc: Sequence[np.ndarray],
) -> np.ndarray:
    """Incident-wave source for the spectral stepper.

    Returns ``lap(taper)*psi_inc + 2*grad(taper).grad(psi_inc)`` on the full
    lattice.  The taper derivatives vanish outside the transition shell, so
    the result is supported there regardless of the incident values.
    """
    lap = taper.laplacian()
    out = lap * psi_inc
    for g, dpsi in zip(taper.gradient(), grad_psi_inc):
        out += 2.0 * g * dpsi
    return out


def injection_support(taper: TaperMask) -> np.ndarray:
    """Boolean lattice mask where the injection term can be nonzero."""
    mask = np.abs(taper.laplacian()) > 0
    for g in taper.gradient():
        mask |= np.abs(g) > 0
    return mask


_SIDES = ("low", "high")


def wall_id(axis: int, side: str) -> int:
    """Flat wall index 0..5 from (axis, side)."""
    if side not in _SIDES:
        raise ValueError(f"side must be 'low' or 'high', got {side!r}")
    return 2 * axis + _SIDES.index(side)


def _wall_axis_side(wall) -> Tuple[int, str]:
    if isinstance(wall, tuple):
        axis, side = wall
    else:
        axis, side = divmod(int(wall), 2)
        side = _SIDES[side]
    if side not in _SIDES:
        raise ValueError(f"invalid wall {wall!r}")
    return int(axis), side


def fdtd_wall_terms(
    wall,
    geometry: ModelGeometry,
) -> list:
    """Stencil-completion terms for one wall of the 4/4 conversion box.

    Returns a list of (target_row, source_row, sign, alpha) tuples along the
    wall's axis: the new level at ``target_row`` (within the other axes'
    total intervals) gains ``sign * alpha * coef * psi_inc(source_row)``
    where ``coef`` is the stepper's kinetic coefficient for that axis.

    On the total-field side the stencil needs total values but the far
    grids store scattered ones, so the incident part is added (+); on the
    scattered side it is subtracted (-).
    """
    axis, side = _wall_axis_side(wall)
    box = geometry.fdtd_total_box()
    t0, t1 = box[axis]
    terms = []
    if side == "high":
        j_edge = t1
        for j in range(j_edge - 3, j_edge + 1):          # total-storing rows
            for ell in range(1, 5):
                if j + ell > t1:
                    terms.append((j, j + ell, +1.0, _STENCIL_ALPHA[ell - 1]))
        for j in range(j_edge + 1, j_edge + 5):          # scattered-storing rows
            for ell in range(1, 5):
                if t0 <= j - ell <= t1:
                    terms.append((j, j - ell, -1.0, _STENCIL_ALPHA[ell - 1]))
    else:
        j_edge = t0
        for j in range(j_edge, j_edge + 4):
            for ell in range(1, 5):
                if j - ell < t0:
                    terms.append((j, j - ell, +1.0, _STENCIL_ALPHA[ell - 1]))
        for j in range(j_edge - 4, j_edge):
            for ell in range(1, 5):
                if t0 <= j + ell <= t1:
                    terms.append((j, j + ell, -1.0, _STENCIL_ALPHA[ell - 1]))
    return terms


def fdtd_consistency_update(
    wall,
    field: np.ndarray,
    geometry: ModelGeometry,
    grid: GridSpec,
    incident,
    n: int,
    dtau: float,
    kinetic_scale: float = 1.0,
) -> np.ndarray:
    """Add one wall's incident-wave corrections to a bulk-updated level.

    ``field`` is the freshly written time level n+1 after the plain stencil
    update; ``incident`` evaluates the incident wave on index slabs at level
    n (see :class:`qpstd.source.IncidentWave`).  Corners are handled by
    applying all six walls in sequence: a grid near an edge simply receives
    corrections from both walls.

    Returns ``field`` (modified in place).
    """
    axis, side = _wall_axis_side(wall)
    if not 0 <= axis < grid.ndim:
        raise ValueError(f"wall axis {axis} out of range for {grid.ndim}D lattice")
    box = geometry.fdtd_total_box()
    coef = 2j * dtau * kinetic_scale / grid.spacing[axis] ** 2
    # transverse restriction: the straddling grid pair must sit inside the
    # conversion box along every other axis
    transverse = []
    for ax in range(grid.ndim):
        if ax == axis:
            transverse.append(None)
        else:
            lo, hi = box[ax]
            transverse.append(slice(lo, hi + 1))

    for target_row, source_row, sign, alpha in fdtd_wall_terms(wall, geometry):
        idx = [sl for sl in transverse]
        src_idx = list(idx)
        idx[axis] = target_row
        src_idx[axis] = source_row
        vals = incident.psi_on_indices(tuple(src_idx), n, grid)
        field[tuple(idx)] += (sign * alpha) * coef * vals
    return field


def _ramp(n: int, ramp_steps: int) -> float:
    if ramp_steps <= 0 or n >= ramp_steps:
        return 1.0
    return float(taper_profile(n / ramp_steps))


class _TimePhase:
    """exp(-i*n*dtau) advanced by the sine/cosine recurrence when accessed
    sequentially, with a direct fallback for random access."""

    def __init__(self, dtau: float):
        self.dtau = dtau
        self._rs = RecursiveSinusoid(step=dtau)

    def factor(self, n: int) -> complex:
        if n < self._rs.n:
            return cmath.exp(-1j * n * self.dtau)
        while self._rs.n < n:
            self._rs.advance()
        return self._rs.phase_factor


class PstdInjection:
    """Spectral-mode incident source, folded to the transition shell.

    For a monochromatic wave the whole term factorizes into a static
    complex lattice on the shell times exp(-i*n*dtau); the static part and
    the recurrence for the time factor are prepared here.  For pulsed
    incidence the per-grid 1D distances are fixed, and the packet value
    and slope are interpolated from the concurrently stepped 1D lattice
    each step.
    """

    def __init__(self, taper: TaperMask, source: IncidentSource1D, grid: GridSpec):
        support = injection_support(taper)
        idx = np.nonzero(support)
        self.flat_idx = np.ravel_multi_index(idx, grid.n)
        lap = taper.laplacian()[idx]
        grad = taper.gradient()
        slope_coef = np.zeros_like(lap)
        for comp, g in zip(source.k_unit, grad):
            slope_coef += 2.0 * comp * g[idx]
        self.source = source
        self.grid = grid
        d = source.distances_on_indices(tuple(np.asarray(i, float) for i in idx), grid)
        self._d = d
        if source.mode == "sinusoidal":
            carrier = np.exp(1j * d)
            self._static = (lap + 1j * slope_coef) * carrier
            self._phase = _TimePhase(source.dtau)
            self._lap = None
            self._slope = None
        else:
            self._static = None
            self._lap = lap
            self._slope = slope_coef

    #: steps of smooth source turn-on (0 disables); shapes only the startup
    #: transient, the steady state is unchanged
    ramp_steps: int = 0

    def values(self, n: int) -> np.ndarray:
        """The raw injection term on the shell grids at time level n."""
        if self._static is not None:
            return self._static * self._phase.factor(n)
        psi, dpsi = self.source.eval_at_distance(self._d, n)
        return self._lap * psi + self._slope * dpsi

    def apply(self, out: np.ndarray, n: int, propagator) -> None:
        amp = _ramp(n, self.ramp_steps)
        out.reshape(-1)[self.flat_idx] += (-2j * amp * propagator.dtau) * self.values(n)


class FdtdCorrection:
    """All-walls stencil-completion source for the finite-difference mode.

    Collects every (target grid, incident grid, signed coefficient) triple
    of the 2*ndim walls once.  Monochromatic incidence consolidates to one
    static complex value per affected grid times the recurrence factor;
    pulsed incidence re-evaluates the packet at the stored distances.
    """

    def __init__(
        self,
        geometry: ModelGeometry,
        grid: GridSpec,
        source: IncidentSource1D,
        clip=None,
    ):
        tgt_flat, coef, d_src = [], [], []
        box = geometry.fdtd_total_box()
        if clip is None:
            clip = tuple((0, m - 1) for m in grid.n)
        for axis in range(grid.ndim):
            inv_h2 = 1.0 / grid.spacing[axis] ** 2
            transverse = []
            for ax in range(grid.ndim):
                lo, hi = box[ax]
                lo, hi = max(lo, clip[ax][0]), min(hi, clip[ax][1])
                transverse.append(np.arange(lo, hi + 1))
            for side in _SIDES:
                for trow, srow, sign, alpha in fdtd_wall_terms((axis, side), geometry):
                    if not clip[axis][0] <= trow <= clip[axis][1]:
                        continue
                    if any(t.size == 0 for t in transverse):
                        continue
                    idx = [t.copy() for t in transverse]
                    idx[axis] = np.array([trow])
                    mesh = np.meshgrid(*idx, indexing="ij")
                    flat = np.ravel_multi_index(tuple(m.ravel() for m in mesh), grid.n)
                    src_idx = [m.astype(float) for m in mesh]
                    src_idx[axis] = np.full_like(src_idx[axis], float(srow))
                    d = source.distances_on_indices(tuple(src_idx), grid).ravel()
                    tgt_flat.append(flat)
                    coef.append(np.full(flat.size, sign * alpha * inv_h2))
                    d_src.append(d)
        self.source = source
        if tgt_flat:
            tgt = np.concatenate(tgt_flat)
            co = np.concatenate(coef)
            dd = np.concatenate(d_src)
        else:
            tgt = np.zeros(0, dtype=int)
            co = np.zeros(0)
            dd = np.zeros(0)
        if source.mode == "sinusoidal":
            # consolidate duplicate targets (wall overlaps at edges/corners)
            contrib = co * np.exp(1j * dd)
            uniq, inv = np.unique(tgt, return_inverse=True)
            static = np.zeros(uniq.size, dtype=np.complex128)
            np.add.at(static, inv, contrib)
            self.flat_idx = uniq
            self._static = static
            self._phase = _TimePhase(source.dtau)
            self._coef = None
            self._d = None
        else:
            self.flat_idx = tgt
            self._static = None
            self._coef = co
            self._d = dd

    ramp_steps: int = 0

    def apply(self, out: np.ndarray, n: int, propagator) -> None:
        c = 2j * propagator.dtau * propagator.kinetic_scale * _ramp(n, self.ramp_steps)
        flat = out.reshape(-1)
        if self._static is not None:
            flat[self.flat_idx] += (c * self._phase.factor(n)) * self._static
        else:
            psi, _ = self.source.eval_at_distance(self._d, n)
            np.add.at(flat, self.flat_idx, c * (self._coef * psi))


def build_injection(
    geometry: ModelGeometry,
    grid: GridSpec,
    source: IncidentSource1D,
    mode: str,
    taper: TaperMask = None,
):
    """Injection term for the requested stepper mode."""
    if mode == "pstd":
        if taper is None:
            taper = build_taper(geometry, grid)
        return PstdInjection(taper, source, grid)
    if mode == "fdtd":
        return FdtdCorrection(geometry, grid, source)
    raise ValueError(f"unknown stepper mode {mode!r}")
