import math

import numpy as np
import pytest

from helpers import numeric_derivative
from qpstd.boundary import AbsorberProfile, build_mask
from qpstd.lattice import GridSpec, Region, WaveField, build_geometry
from qpstd.source import (
    IncidentDirection,
    IncidentSource1D,
    make_pulsed_gaussian_source,
    make_sinusoidal_source,
    gaussian_packet,
)
from qpstd.stepper import Propagator, phase_velocity_correction, stability_dtau
from qpstd.tfsf import (
    build_injection,
    build_taper,
    fdtd_consistency_update,
    fdtd_wall_terms,
    injection_support,
    injection_term,
    taper_profile,
    taper_profile_d1,
    taper_profile_d2,
)

TWO_PI = 2.0 * math.pi
ALPHA = (8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0)


class TestTaperProfile:
    def test_endpoints(self):
        assert taper_profile(0.0) == pytest.approx(0.0, abs=1e-15)
        assert taper_profile(1.0) == pytest.approx(1.0, rel=1e-15)

    def test_midpoint_and_symmetry(self):
        assert taper_profile(0.5) == pytest.approx(0.5, rel=1e-14)
        rng = np.random.default_rng(2)
        r = rng.uniform(0, 1, 64)
        assert np.allclose(taper_profile(r) + taper_profile(1 - r), 1.0, atol=1e-14)

    def test_quarter_value(self):
        assert taper_profile(0.25) == pytest.approx(0.25 - 2.0 / (3.0 * math.pi), rel=1e-12)

    def test_derivatives_vanish_to_fourth_order_at_ends(self):
        # finite differences on the entire closed form (which extends
        # smoothly past [0,1]); tolerances account for stencil truncation
        # against the profile's interior derivative scale of O(100)
        def f(x):
            return float(
                x
                - (2.0 / (3.0 * math.pi)) * math.sin(2.0 * math.pi * x)
                + (1.0 / (12.0 * math.pi)) * math.sin(4.0 * math.pi * x)
            )

        cases = {1: (1e-3, 1e-8), 2: (1e-2, 1e-8), 3: (1e-3, 5e-3), 4: (1e-2, 1e-4)}
        for x0 in (0.0, 1.0):
            for order, (h, tol) in cases.items():
                d = numeric_derivative(f, x0, order, h=h)
                assert abs(d) < tol, (x0, order, d)
        # first two derivatives also vanish exactly in closed form
        for x0 in (0.0, 1.0):
            assert abs(taper_profile_d1(x0)) < 1e-13
            assert abs(taper_profile_d2(x0)) < 1e-12

    def test_analytic_derivatives_match_numeric(self):
        for rho in (0.1, 0.33, 0.5, 0.77, 0.9):
            d1 = numeric_derivative(lambda t: float(taper_profile(t)), rho, 1, h=1e-3)
            d2 = numeric_derivative(lambda t: float(taper_profile(t)), rho, 2, h=1e-3)
            assert taper_profile_d1(rho) == pytest.approx(d1, abs=1e-8)
            assert taper_profile_d2(rho) == pytest.approx(d2, abs=1e-5)

    def test_exact_half_slope(self):
        assert taper_profile_d1(0.5) == pytest.approx(8.0 / 3.0, rel=1e-14)

    def test_domain_check(self):
        with pytest.raises(ValueError):
            taper_profile(1.2)


class TestTaperMask:
    def geom_grid(self, n=(72, 72), w_trans=11):
        geom = build_geometry(n, w_abc=8, w_sf=6, w_trans=w_trans)
        grid = GridSpec(n=n, spacing=(math.pi / 10,) * len(n), dtau=1e-3)
        return geom, grid

    def test_tf_is_one_sf_is_zero(self):
        geom, grid = self.geom_grid()
        taper = build_taper(geom, grid)
        val = taper.value()
        region = geom.region_map()
        assert np.all(val[region == int(Region.TF)] == 1.0)
        assert np.all(val[region <= int(Region.SF)] == 0.0)
        assert np.all(taper.laplacian()[region != int(Region.TRANSITION)] == 0.0)

    def test_product_structure(self):
        geom, grid = self.geom_grid()
        taper = build_taper(geom, grid)
        val = taper.value()
        rng = np.random.default_rng(8)
        for _ in range(1000):
            i = rng.integers(0, 72)
            j = rng.integers(0, 72)
            assert val[i, j] == taper.axis_value[0][i] * taper.axis_value[1][j]

    def test_mid_wall_value_and_slope(self):
        geom, grid = self.geom_grid(w_trans=11)  # span 12 -> exact midpoint
        taper = build_taper(geom, grid)
        a0, a1, _, _ = geom.taper_breakpoints(0)
        mid = a0 + (a1 - a0) // 2
        h = grid.spacing[0]
        assert taper.axis_value[0][mid] == pytest.approx(0.5, rel=1e-14)
        assert taper.axis_d1[0][mid] == pytest.approx(
            (8.0 / 3.0) / ((a1 - a0) * h), rel=1e-13
        )

    def test_anchor_grids_exact(self):
        geom, grid = self.geom_grid()
        taper = build_taper(geom, grid)
        a0, a1, a2, a3 = geom.taper_breakpoints(0)
        v = taper.axis_value[0]
        assert v[a0] == 0.0 and v[a3] == 0.0
        assert v[a1] == 1.0 and v[a2] == 1.0
        assert np.all((v[a0 + 1 : a1] > 0) & (v[a0 + 1 : a1] < 1))


class TestInjectionTerm:
    def test_zero_incident_zero_term(self):
        geom = build_geometry((64,), 8, 6, 10)
        grid = GridSpec(n=(64,), spacing=(math.pi / 10,), dtau=1e-3)
        taper = build_taper(geom, grid)
        out = injection_term(taper, np.zeros(64, complex), (np.zeros(64, complex),))
        assert np.all(out == 0)

    def test_support_equals_transition_shell(self):
        geom = build_geometry((48, 56), 6, 5, 6)
        grid = GridSpec(n=(48, 56), spacing=(math.pi / 10,) * 2, dtau=1e-3)
        taper = build_taper(geom, grid)
        support = injection_support(taper)
        region = geom.region_map()
        assert np.array_equal(support, region == int(Region.TRANSITION))
        # nonzero incident cannot produce anything outside the shell
        rng = np.random.default_rng(4)
        psi = rng.standard_normal((48, 56)) + 1j * rng.standard_normal((48, 56))
        out = injection_term(taper, psi, (psi, psi))
        assert np.all(out[~support] == 0)


class TestFdtdWallTerms:
    def test_right_wall_pattern(self):
        geom = build_geometry((96,), 10, 8, 8, stepper_mode="fdtd")
        t0, t1 = geom.fdtd_total_box()[0]
        terms = fdtd_wall_terms((0, "high"), geom)
        got = {}
        for tgt, src, sign, alpha in terms:
            got.setdefault(tgt - t1, []).append((src - t1, sign, alpha))
        # total-field side rows J-3..J reach into the scattered side
        assert got[-3] == [(1, +1.0, ALPHA[3])]
        assert got[-2] == [(1, +1.0, ALPHA[2]), (2, +1.0, ALPHA[3])]
        assert got[0] == [
            (1, +1.0, ALPHA[0]),
            (2, +1.0, ALPHA[1]),
            (3, +1.0, ALPHA[2]),
            (4, +1.0, ALPHA[3]),
        ]
        # scattered side rows subtract the incident at total-side grids
        assert got[1] == [
            (0, -1.0, ALPHA[0]),
            (-1, -1.0, ALPHA[1]),
            (-2, -1.0, ALPHA[2]),
            (-3, -1.0, ALPHA[3]),
        ]
        assert got[4] == [(0, -1.0, ALPHA[3])]
        assert set(got) == {-3, -2, -1, 0, 1, 2, 3, 4}

    def test_left_wall_mirrors_right(self):
        geom = build_geometry((96,), 10, 8, 8, stepper_mode="fdtd")
        t0, _ = geom.fdtd_total_box()[0]
        got = {}
        for tgt, src, sign, alpha in fdtd_wall_terms((0, "low"), geom):
            got.setdefault(tgt - t0, []).append((src - t0, sign, alpha))
        assert got[3] == [(-1, +1.0, ALPHA[3])]
        assert got[0] == [
            (-1, +1.0, ALPHA[0]),
            (-2, +1.0, ALPHA[1]),
            (-3, +1.0, ALPHA[2]),
            (-4, +1.0, ALPHA[3]),
        ]
        assert got[-4] == [(0, -1.0, ALPHA[3])]


class _ZeroIncident:
    def psi_on_indices(self, idx, n, grid):
        shapes = [np.shape(np.arange(*i.indices(grid.n[a]))) if isinstance(i, slice) else np.shape(i) for a, i in enumerate(idx)]
        # broadcast target shape
        out_shape = tuple(s[0] for s in shapes if s)
        return np.zeros(out_shape if out_shape else (), dtype=complex)


class TestConsistencyUpdate:
    def test_zero_incident_leaves_field(self):
        geom = build_geometry((64, 64), 8, 6, 8, stepper_mode="fdtd")
        grid = GridSpec(n=(64, 64), spacing=(math.pi / 10,) * 2, dtau=1e-3)
        rng = np.random.default_rng(5)
        f = rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64))
        ref = f.copy()
        for wall in range(4):
            fdtd_consistency_update(wall, f, geom, grid, _ZeroIncident(), 3, 1e-3)
        assert np.array_equal(f, ref)

    def test_invalid_wall(self):
        geom = build_geometry((64,), 8, 6, 8, stepper_mode="fdtd")
        grid = GridSpec(n=(64,), spacing=(math.pi / 10,), dtau=1e-3)
        with pytest.raises(ValueError):
            fdtd_consistency_update(
                (3, "low"), np.zeros(64, complex), geom, grid, _ZeroIncident(), 0, 1e-3
            )

    def test_walls_match_bundled_correction(self):
        # the consolidated all-walls injection equals wall-by-wall updates
        geom = build_geometry((48, 48), 6, 5, 8, stepper_mode="fdtd")
        grid = GridSpec(n=(48, 48), spacing=(math.pi / 10,) * 2, dtau=2e-3)
        src = make_sinusoidal_source(IncidentDirection(90.0, 45.0), geom, grid, 2e-3)
        f1 = np.zeros((48, 48), dtype=complex)
        n = 7
        for wall in range(4):
            fdtd_consistency_update(wall, f1, geom, grid, src, n, grid.dtau)
        corr = build_injection(geometry=geom, grid=grid, source=src, mode="fdtd")

        class P:
            dtau = grid.dtau
            kinetic_scale = 1.0

        f2 = np.zeros((48, 48), dtype=complex)
        corr.apply(f2, n, P())
        assert np.max(np.abs(f1 - f2)) <= 1e-14 * max(np.max(np.abs(f1)), 1e-30)


def leakage_run_1d(mode, n=280, periods=28.0):
    """Empty 1D model driven by a sinusoidal wave; returns (sf_residual,
    tf_relative_error) at the last step."""
    delta = math.pi / 10
    w_trans = 12 if mode == "pstd" else 8
    geom = build_geometry((n,), w_abc=24, w_sf=20, w_trans=w_trans, stepper_mode=mode)
    dtau = math.pi / 400
    grid = GridSpec(n=(n,), spacing=(delta,), dtau=dtau)
    mask = build_mask(AbsorberProfile(5.0, 0.1, 24, clipped=True), geom, dtau)
    src = make_sinusoidal_source(IncidentDirection(90.0, 0.0), geom, grid, dtau)
    eta = phase_velocity_correction(dtau) if mode == "pstd" else 1.0
    taper = build_taper(geom, grid) if mode == "pstd" else None
    inj = build_injection(geom, grid, src, mode, taper=taper)
    inj.ramp_steps = int(round(4 * TWO_PI / dtau))
    prop = Propagator(grid, mode=mode, kinetic_scale=eta, mask=mask.mask, injection=inj)
    state = WaveField.zeros(grid.n)
    steps = int(round(periods * TWO_PI / dtau))
    for _ in range(steps):
        state = prop.step(state)
    region = geom.region_map()
    sf_res = float(np.abs(state.cur[region == int(Region.SF)]).max())
    tf_idx = np.nonzero(region == int(Region.TF))
    inc = src.psi_on_indices(tf_idx, state.n, grid)
    tf_err = float(np.abs(state.cur[tf_idx] - inc).max())
    return sf_res, tf_err


class TestLeakage1D:
    def test_spectral_taper_injection(self):
        sf, tf = leakage_run_1d("pstd")
        assert sf <= 1e-3
        assert tf <= 1e-3

    def test_stencil_wall_injection(self):
        sf, tf = leakage_run_1d("fdtd")
        assert sf <= 1e-3
        assert tf <= 1e-3

    def test_pulsed_packet_crosses_cleanly(self):
        # a pulsed packet enters, crosses the TF and leaves; afterwards the
        # whole interior is quiet and during transit the TF tracks the packet
        delta = math.pi / 10
        n = 360
        geom = build_geometry((n,), w_abc=24, w_sf=20, w_trans=12)
        dtau = math.pi / 400
        grid = GridSpec(n=(n,), spacing=(delta,), dtau=dtau)
        mask = build_mask(AbsorberProfile(5.0, 0.1, 24, clipped=True), geom, dtau)
        run_steps = int(round(115.0 / dtau))
        src = make_pulsed_gaussian_source(
            IncidentDirection(90.0, 0.0), geom, grid, dtau, sigma=3.0,
            run_tau=run_steps * dtau,
        )
        taper = build_taper(geom, grid)
        inj = build_injection(geom, grid, src, "pstd", taper=taper)
        prop = Propagator(grid, mode="pstd", mask=mask.mask, injection=inj)
        state = WaveField.zeros(grid.n)
        region = geom.region_map()
        tf_idx = np.nonzero(region == int(Region.TF))
        # check the TF against the analytic packet when its center crosses
        # the middle of the TF (start offset 7.5*sigma, group velocity 2)
        tf_mid_d = (0.5 * (tf_idx[0][0] + tf_idx[0][-1]) - src.origin[0]) * delta
        mid = int(round((tf_mid_d + 7.5 * 3.0) / 2.0 / dtau))
        tf_err_mid = None
        for i in range(run_steps):
            state = prop.step(state)
            src.advance()
            if state.n == mid:
                inc = src.psi_on_indices(tf_idx, state.n, grid)
                tf_err_mid = float(np.abs(state.cur[tf_idx] - inc).max())
        assert tf_err_mid is not None and tf_err_mid <= 2e-3
        # at any time the stored field outside the absorber must equal the
        # taper times the concurrently solved packet (zero in the SF)
        keep = region >= int(Region.SF)
        idx = (np.nonzero(keep)[0].astype(float),)
        inc_all = src.psi_on_indices(idx, state.n, grid)
        expected = taper.value()[keep] * inc_all
        assert float(np.abs(state.cur[keep] - expected).max()) <= 2e-3
