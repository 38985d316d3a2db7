"""Shared test oracles, independent of the library's hot paths."""

from __future__ import annotations

import math

import numpy as np
import scipy.fft as sfft

from qpstd.ntdf import FACES, SurfacePhasors


def quadrature_surface_integral(
    phasors: SurfacePhasors,
    r: np.ndarray,
    k: float | None = None,
    upsample: int = 4,
) -> complex:
    """Dense numerical quadrature of the closed-box surface integral.

    Midpoint rule on each face at ``upsample`` times the lattice
    resolution, with the face fields read from the 2D Fourier interpolant
    of the stored planes.  Deliberately shares nothing with the
    semi-analytical cell path.
    """
    r = np.asarray(r, dtype=float)
    k = phasors.k if k is None else float(k)
    total = 0.0 + 0.0j
    for face in FACES:
        axis, side = face
        u_ax, v_ax = phasors.in_plane_axes(face)
        lo_u, hi_u = phasors.box_window[u_ax]
        lo_v, hi_v = phasors.box_window[v_ax]
        cu = phasors.coords[u_ax]
        cv = phasors.coords[v_ax]
        du = phasors.spacing[u_ax] / upsample
        dv = phasors.spacing[v_ax] / upsample
        nu_f = (hi_u - lo_u) * upsample
        nv_f = (hi_v - lo_v) * upsample
        uf = cu[lo_u] + du * (np.arange(nu_f) + 0.5)
        vf = cv[lo_v] + dv * (np.arange(nv_f) + 0.5)
        psi_t, dpsi_t = phasors.planes[face]
        psi_f = fourier_interp2(psi_t, cu, cv, uf, vf)
        dpsi_f = fourier_interp2(dpsi_t, cu, cv, uf, vf)
        pos = phasors.plane_position(face)
        xyz = [None, None, None]
        uu, vv = np.meshgrid(uf, vf, indexing="ij")
        xyz[axis] = np.full_like(uu, pos)
        xyz[u_ax] = uu
        xyz[v_ax] = vv
        rel = [r[a] - xyz[a] for a in range(3)]
        dist = np.sqrt(rel[0] ** 2 + rel[1] ** 2 + rel[2] ** 2)
        rhat_n = rel[axis] / dist
        sign = 1.0 if side == "low" else -1.0
        integrand = (
            (dpsi_f + (1j * k - 1.0 / dist) * rhat_n * psi_f)
            * np.exp(1j * k * dist)
            / dist
        )
        total += sign / (4.0 * math.pi) * np.sum(integrand) * du * dv
    return complex(total)


def fourier_interp2(
    plane: np.ndarray,
    cu: np.ndarray,
    cv: np.ndarray,
    uf: np.ndarray,
    vf: np.ndarray,
) -> np.ndarray:
    """Evaluate the 2D discrete Fourier interpolant of ``plane`` (sampled at
    coordinates cu x cv) at points uf x vf."""
    nu, nv = plane.shape
    du = cu[1] - cu[0]
    dv = cv[1] - cv[0]
    spec = sfft.fft2(plane)
    ku = 2.0 * math.pi * sfft.fftfreq(nu, d=du)
    kv = 2.0 * math.pi * sfft.fftfreq(nv, d=dv)
    eu = np.exp(1j * np.outer(uf - cu[0], ku)) / nu   # (len(uf), nu)
    ev = np.exp(1j * np.outer(kv, vf - cv[0])) / nv   # (nv, len(vf))
    return eu @ spec @ ev


def numeric_derivative(f, x: float, order: int, h: float = 1e-2) -> float:
    """Central finite-difference derivative of callable f at x."""
    if order == 0:
        return f(x)
    stencils = {
        1: ([-2, -1, 1, 2], [1 / 12, -2 / 3, 2 / 3, -1 / 12]),
        2: ([-2, -1, 0, 1, 2], [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]),
        3: ([-2, -1, 1, 2], [-1 / 2, 1, -1, 1 / 2]),
        4: ([-2, -1, 0, 1, 2], [1, -4, 6, -4, 1]),
    }
    offs, coefs = stencils[order]
    acc = sum(c * f(x + o * h) for o, c in zip(offs, coefs))
    return acc / h**order
