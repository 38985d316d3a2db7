"""Partial-wave reference solver for central potentials.

For a spherically symmetric interaction that vanishes beyond a cutoff
radius, the scattering solution decomposes into angular-momentum channels.
Each channel's reduced radial equation

    u'' = [ l(l+1)/r^2 + v(r) - k^2 ] u,        v = V/E0 (reduced)

is integrated outward from the origin on a fixed grid ending exactly at
the cutoff, where the logarithmic derivative is matched to free spherical
waves to extract the phase shift.  The far-field scattering amplitude and
differential cross-section follow from the standard phase-shift sums.

This module is the golden standard the lattice solver is validated
against; it shares no code with the time-domain path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.special import spherical_jn, spherical_yn


@dataclass(frozen=True)
class PartialWaveSolution:
    """Phase shifts and the scattering amplitude they define.

    ``phase_shifts[l]`` is the channel-l shift in the principal branch
    (-pi/2, pi/2]; cross-sections only depend on the shifts modulo pi,
    so branch jumps between channels are harmless.
    """

    k: float
    phase_shifts: np.ndarray
    cutoff_radius: float

    @property
    def l_max(self) -> int:
        return len(self.phase_shifts) - 1

    def amplitude(self, theta) -> np.ndarray:
        """f(theta) = (1/k) sum_l (2l+1) e^{i d_l} sin(d_l) P_l(cos theta)."""
        theta = np.asarray(theta, dtype=float)
        x = np.cos(theta)
        out = np.zeros(np.shape(x), dtype=np.complex128)
        p_prev = np.ones_like(x)       # P_0
        p_cur = x.copy()               # P_1
        for l, d in enumerate(self.phase_shifts):
            if l == 0:
                pl = p_prev
            elif l == 1:
                pl = p_cur
            else:
                # stable upward recurrence on [-1, 1]
                p_next = ((2 * l - 1) * x * p_cur - (l - 1) * p_prev) / l
                p_prev, p_cur = p_cur, p_next
                pl = p_cur
            out = out + (2 * l + 1) * np.exp(1j * d) * math.sin(d) * pl
        return out / self.k

    def total_cross_section(self) -> float:
        """Partial-wave sum (4pi/k^2) sum (2l+1) sin^2(d_l)."""
        s = sum(
            (2 * l + 1) * math.sin(d) ** 2 for l, d in enumerate(self.phase_shifts)
        )
        return 4.0 * math.pi / self.k**2 * s


def _riccati(l: int, x: float) -> Tuple[float, float, float, float]:
    """Riccati-Bessel pairs (j, j', y, y') at x (derivatives w.r.t. x)."""
    jl = spherical_jn(l, x)
    jlp = spherical_jn(l, x, derivative=True)
    yl = spherical_yn(l, x)
    ylp = spherical_yn(l, x, derivative=True)
    return x * jl, jl + x * jlp, x * yl, yl + x * ylp


def _numerov_log_derivative(
    v: Callable[[np.ndarray], np.ndarray],
    l: int,
    k: float,
    a: float,
    h: float,
) -> float:
    """u'/u at the cutoff from outward fixed-step integration.

    Starting values use the two-term series of the regular solution,
    u ~ r^(l+1) (1 + w0 r^2 / (4l+6)), so the launch error stays below the
    integrator's own order.  The derivative at the endpoint is a one-sided
    five-point formula over the last (smooth, interior-only) samples.
    """
    n_steps = max(8, int(round(a / h)))
    h = a / n_steps
    r = h * np.arange(1, n_steps + 1)
    vv = np.asarray(v(r), dtype=float)
    w = l * (l + 1) / (r * r) + vv - k * k

    # launch from the Frobenius series at the first two nodes
    w0 = float(vv[0]) - k * k
    u = np.empty(n_steps)
    scale = 1.0
    for i in (0, 1):
        u[i] = r[i] ** (l + 1) * (1.0 + w0 * r[i] ** 2 / (4 * l + 6))
    f = 1.0 - (h * h / 12.0) * w
    g = 2.0 + (5.0 * h * h / 6.0) * w
    for i in range(1, n_steps - 1):
        u[i + 1] = (g[i] * u[i] - f[i - 1] * u[i - 1]) / f[i + 1]
        if abs(u[i + 1]) > 1e250:
            u[: i + 2] *= 1e-200
            scale *= 1e-200
    # one-sided five-point derivative, O(h^4), interior samples only
    un = u[-5:]
    du = (25.0 * un[4] - 48.0 * un[3] + 36.0 * un[2] - 16.0 * un[1] + 3.0 * un[0]) / (
        12.0 * h
    )
    if u[-1] == 0.0:
        return math.inf
    return du / u[-1]


def phase_shifts(
    potential: Callable[[np.ndarray], np.ndarray],
    cutoff_radius: float,
    k: float = 1.0,
    l_max: Optional[int] = None,
    radial_step: float = 2e-3,
    tail_tol: float = 1e-10,
    l_hard_cap: int = 200,
) -> PartialWaveSolution:
    """Phase shifts of a central potential that vanishes beyond the cutoff.

    ``potential`` maps reduced radii to V/E0 and must be smooth on
    (0, cutoff]; the jump of a square edge sits exactly at the matching
    point and never enters the integration stencil.  ``l_max`` defaults to
    ceil(k*a) + 12 and is raised automatically until the last shift falls
    below ``tail_tol`` (error if the hard cap is hit first).
    """
    if cutoff_radius <= 0:
        raise ValueError("cutoff radius must be positive")
    if k <= 0:
        raise ValueError("wavenumber must be positive")
    a = float(cutoff_radius)
    auto = l_max is None
    if auto:
        l_max = int(math.ceil(k * a)) + 12

    shifts: List[float] = []
    l = 0
    while True:
        beta = _numerov_log_derivative(potential, l, k, a, radial_step)
        x = k * a
        jh, jhp, yh, yhp = _riccati(l, x)
        num = k * jhp - beta * jh
        den = k * yhp - beta * yh
        delta = math.atan2(num, den) if den != 0 else math.pi / 2.0
        # fold to the principal branch
        while delta > math.pi / 2.0:
            delta -= math.pi
        while delta <= -math.pi / 2.0:
            delta += math.pi
        shifts.append(delta)
        if l >= l_max:
            if abs(delta) <= tail_tol or not auto:
                break
            l_max += 8
            if l_max > l_hard_cap:
                raise RuntimeError(
                    f"phase shifts did not decay below {tail_tol} by l={l_hard_cap}"
                )
        l += 1
    return PartialWaveSolution(
        k=k, phase_shifts=np.asarray(shifts), cutoff_radius=a
    )


def differential_cross_section(
    solution: PartialWaveSolution, theta
) -> np.ndarray:
    """d(sigma)/d(Omega) = |f(theta)|^2 on the given angles (radians)."""
    f = solution.amplitude(theta)
    return np.abs(f) ** 2


def square_well_solution(
    s: float,
    radius: float,
    k: float = 1.0,
    l_max: Optional[int] = None,
    radial_step: float = 2e-3,
) -> PartialWaveSolution:
    """Phase shifts of the uniform spherical potential V/E0 = s, r <= radius."""

    def v(r):
        return np.full_like(np.asarray(r, dtype=float), float(s))

    return phase_shifts(v, radius, k=k, l_max=l_max, radial_step=radial_step)


def s_wave_square_well_closed_form(s: float, radius: float, k: float = 1.0) -> float:
    """Closed-form l=0 shift of a square well/barrier (independent check).

    For interior wavenumber k' = sqrt(k^2 - s*k^2) real:
        delta_0 = -k a + atan( (k/k') tan(k' a) )   (principal branch)
    """
    kp2 = k * k * (1.0 - s)
    if kp2 <= 0:
        raise ValueError("closed form needs a real interior wavenumber")
    kp = math.sqrt(kp2)
    d = -k * radius + math.atan2(k * math.tan(kp * radius), kp)
    while d > math.pi / 2.0:
        d -= math.pi
    while d <= -math.pi / 2.0:
        d += math.pi
    return d
