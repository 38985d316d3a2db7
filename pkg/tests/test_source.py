import math

import numpy as np
import pytest

from qpstd.lattice import GridSpec, build_geometry
from qpstd.source import (
    IncidentDirection,
    IncidentSource1D,
    RecursiveSinusoid,
    SourceInstabilityError,
    contact_corner,
    corner_for_unit_vector,
    eval_incident,
    gaussian_packet,
    make_pulsed_gaussian_source,
    make_sinusoidal_source,
    project_distance,
    recursive_sinusoid,
    step_incident_1d,
)

TWO_PI = 2.0 * math.pi
BOUNDS = ((5, 50), (6, 60), (7, 70))


class TestDirection:
    def test_unit_norm(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            d = IncidentDirection(rng.uniform(0, 180), rng.uniform(0, 360))
            assert abs(np.linalg.norm(d.unit) - 1.0) < 1e-12

    def test_angle_ranges(self):
        with pytest.raises(ValueError):
            IncidentDirection(-1.0, 0.0)
        with pytest.raises(ValueError):
            IncidentDirection(0.0, 360.0)


class TestContactCorner:
    def test_first_octant(self):
        c = contact_corner(IncidentDirection(45.0, 45.0), BOUNDS)
        assert c == (5, 6, 7)

    def test_down_going_third_quadrant(self):
        c = contact_corner(IncidentDirection(120.0, 200.0), BOUNDS)
        assert c == (50, 60, 70)

    def test_along_z(self):
        assert contact_corner(IncidentDirection(0.0, 0.0), BOUNDS) == (5, 6, 7)

    def test_distances_nonnegative_over_the_box(self):
        rng = np.random.default_rng(123)
        spac = (0.3, 0.25, 0.4)
        ii = np.arange(BOUNDS[0][0], BOUNDS[0][1] + 1)
        jj = np.arange(BOUNDS[1][0], BOUNDS[1][1] + 1)
        kk = np.arange(BOUNDS[2][0], BOUNDS[2][1] + 1)
        grids = np.meshgrid(ii, jj, kk, indexing="ij")
        for _ in range(100):
            d = IncidentDirection(rng.uniform(0, 180), rng.uniform(0, 360))
            origin = contact_corner(d, BOUNDS)
            dist = project_distance(grids, origin, spac, d)
            assert dist.min() >= -1e-12


class TestProjection:
    def test_origin_maps_to_zero(self):
        d = IncidentDirection(37.0, 122.0)
        origin = contact_corner(d, BOUNDS)
        assert project_distance(
            tuple(np.array([o]) for o in origin), origin, (0.3, 0.3, 0.3), d
        )[0] == pytest.approx(0.0, abs=1e-15)

    def test_pure_y_propagation(self):
        d = IncidentDirection(90.0, 90.0)
        dist = project_distance(
            (np.array([0]), np.array([20]), np.array([0])),
            (0, 0, 0),
            (math.pi / 10,) * 3,
            d,
        )
        assert dist[0] == pytest.approx(TWO_PI, rel=1e-14)


class TestRecursiveSinusoid:
    def test_first_values(self):
        assert recursive_sinusoid(0, 0.1) == (0.0, 1.0)
        s, c = recursive_sinusoid(1, 0.1)
        assert s == pytest.approx(math.sin(0.1), abs=1e-16)
        assert c == pytest.approx(math.cos(0.1), abs=1e-16)

    def test_million_step_drift(self):
        step = math.pi / 1000
        n = 1_000_000
        s, c = recursive_sinusoid(n, step)
        assert abs(s - math.sin(n * step)) < 1e-9
        assert abs(c - math.cos(n * step)) < 1e-9

    def test_stateful_matches_functional(self):
        rs = RecursiveSinusoid(step=0.05)
        for n in range(1, 200):
            rs.advance()
        s, c = recursive_sinusoid(199, 0.05)
        assert rs.sin_val == pytest.approx(s, abs=1e-13)
        assert rs.phase_factor == pytest.approx(complex(c, -s), abs=1e-13)


def sinusoidal_source(dtau=math.pi / 500):
    return IncidentSource1D(
        mode="sinusoidal",
        k_unit=np.array([0.0, 1.0, 0.0]),
        origin=(0, 0, 0),
        dtau=dtau,
    )


class TestEvalIncident:
    def test_sinusoidal_at_origin(self):
        src = sinusoidal_source()
        psi, grad = eval_incident(src, 0.0, 0)
        assert psi == pytest.approx(1.0 + 0.0j)
        assert grad[1] == pytest.approx(1j)
        assert grad[0] == pytest.approx(0.0) and grad[2] == pytest.approx(0.0)

    def test_same_wavefront_same_value(self):
        # grids with equal projected distance share one source value
        d = IncidentDirection(60.0, 30.0)
        src = IncidentSource1D(
            mode="sinusoidal", k_unit=d.unit, origin=(0, 0, 0), dtau=1e-3
        )
        psi_a, _ = src.eval_at_distance(1.2345, 17)
        psi_b, _ = src.eval_at_distance(1.2345, 17)
        assert psi_a == psi_b

    def test_sinusoidal_solves_free_equation(self):
        # d/dtau psi = i lap psi holds exactly for the analytic form
        src = sinusoidal_source(dtau=1e-4)
        d = 0.7
        psi0, _ = src.eval_at_distance(d, 0)
        psi1, _ = src.eval_at_distance(d, 1)
        dpsi_dt = (psi1 - psi0) / src.dtau
        # for exp(i(d - tau)): time derivative is -i psi, laplacian is -psi
        mid = 0.5 * (psi0 + psi1)
        assert dpsi_dt == pytest.approx(-1j * mid, rel=1e-7)


def pulsed_1d(n1d=512, delta=math.pi / 10, dtau=math.pi / 1000, sigma=3.0):
    x = (np.arange(n1d) - n1d // 2) * delta
    return IncidentSource1D(
        mode="pulsed",
        k_unit=np.array([1.0]),
        origin=(0,),
        dtau=dtau,
        delta=delta,
        d_start=float(x[0]),
        psi_prev=gaussian_packet(x, -dtau, 0.0, sigma),
        psi_cur=gaussian_packet(x, 0.0, 0.0, sigma),
        edge_tol=np.inf,
    )


class TestPulsedInterpolation:
    def test_exact_at_nodes(self):
        src = pulsed_1d()
        j = np.array([100, 200, 301])
        d = src.d_start + j * src.delta
        psi, _ = src.eval_at_distance(d, 0)
        ref = src.psi_cur[j]
        assert np.max(np.abs(psi - ref)) <= 1e-10 * np.max(np.abs(ref))

    def test_halfway_matches_analytic_packet(self):
        src = pulsed_1d(sigma=4.0)
        d = src.d_start + (np.arange(150, 350) + 0.5) * src.delta
        psi, dpsi = src.eval_at_distance(d, 0)
        ref = gaussian_packet(d, 0.0, 0.0, 4.0)
        scale = np.max(np.abs(ref))
        assert np.max(np.abs(psi - ref)) <= 1e-6 * scale
        # derivative of the analytic packet, via fine differences
        h = 1e-5
        ref_d = (gaussian_packet(d + h, 0.0, 0.0, 4.0) - gaussian_packet(d - h, 0.0, 0.0, 4.0)) / (2 * h)
        assert np.max(np.abs(dpsi - ref_d)) <= 1e-5 * np.max(np.abs(ref_d))

    def test_outside_lattice_rejected(self):
        src = pulsed_1d()
        with pytest.raises(ValueError, match="outside"):
            src.eval_at_distance(src.d_start - 1.0, 0)

    def test_nearest_fallback(self):
        src = pulsed_1d()
        src.interp = "nearest"
        j = 250
        d = src.d_start + j * src.delta + 0.3 * src.delta
        psi, _ = src.eval_at_distance(np.array([d]), 0)
        assert psi[0] == src.psi_cur[j]


class TestStep1D:
    def test_constant_field_unchanged(self):
        n = 64
        src = IncidentSource1D(
            mode="pulsed",
            k_unit=np.array([1.0]),
            origin=(0,),
            dtau=1e-3,
            delta=0.3,
            d_start=0.0,
            psi_prev=np.ones(n, dtype=complex),
            psi_cur=np.ones(n, dtype=complex),
            edge_tol=np.inf,
        )
        step_incident_1d(src)
        assert np.allclose(src.psi_cur, 1.0, atol=1e-14)

    def test_plane_wave_phase_advance_with_correction(self):
        # one temporal period on a periodic lattice holding exactly k=1
        n, delta = 200, math.pi / 10
        dtau = TWO_PI / 2000
        eta = math.sin(dtau) / dtau
        x = delta * np.arange(n)
        src = IncidentSource1D(
            mode="pulsed",
            k_unit=np.array([1.0]),
            origin=(0,),
            dtau=dtau,
            delta=delta,
            d_start=0.0,
            psi_prev=np.exp(1j * (x + dtau)),
            psi_cur=np.exp(1j * x),
            kinetic_scale=eta,
            edge_tol=np.inf,
        )
        for _ in range(2000):
            step_incident_1d(src)
        phase_err = np.angle(src.psi_cur / np.exp(1j * x))
        assert np.max(np.abs(phase_err)) < 1e-9

    def test_gaussian_norm_conserved(self):
        src = pulsed_1d(n1d=1024, sigma=4.0)
        norm0 = np.linalg.norm(src.psi_cur)
        for _ in range(1000):
            step_incident_1d(src)
        assert abs(np.linalg.norm(src.psi_cur) / norm0 - 1.0) < 1e-8

    def test_packet_matches_analytic_evolution(self):
        src = pulsed_1d(n1d=1024, sigma=4.0, dtau=math.pi / 2000)
        steps = 800
        for _ in range(steps):
            step_incident_1d(src)
        tau = steps * src.dtau
        x = src.d_start + src.delta * np.arange(src.n1d)
        ref = gaussian_packet(x, tau, 0.0, 4.0)
        assert np.max(np.abs(src.psi_cur - ref)) < 1e-5 * np.max(np.abs(ref))

    def test_edge_contact_aborts(self):
        # a packet started near the end must trip the padding guard
        n1d, delta = 256, math.pi / 10
        x = delta * np.arange(n1d)
        c = x[-1] - 5.0
        src = IncidentSource1D(
            mode="pulsed",
            k_unit=np.array([1.0]),
            origin=(0,),
            dtau=math.pi / 1000,
            delta=delta,
            d_start=0.0,
            psi_prev=gaussian_packet(x, -math.pi / 1000, c, 2.0),
            psi_cur=gaussian_packet(x, 0.0, c, 2.0),
        )
        with pytest.raises(SourceInstabilityError):
            for _ in range(3000):
                step_incident_1d(src)


class TestFactories:
    def test_sinusoidal_source_origin_on_transition_surface(self):
        geom = build_geometry((72, 72, 72), 10, 8, 8)
        grid = GridSpec(n=(72, 72, 72), spacing=(math.pi / 10,) * 3, dtau=1e-3)
        src = make_sinusoidal_source(IncidentDirection(90.0, 90.0), geom, grid, 1e-3)
        (t0, _), (_, t3) = geom.transition_intervals(1)
        assert src.origin[1] == t0

    def test_pulsed_source_padding(self):
        geom = build_geometry((48, 48, 48), 8, 6, 8)
        grid = GridSpec(n=(48, 48, 48), spacing=(math.pi / 10,) * 3, dtau=1e-3)
        src = make_pulsed_gaussian_source(
            IncidentDirection(90.0, 90.0), geom, grid, math.pi / 1000, sigma=3.0
        )
        # leading tail below 1e-6 of the peak at the contact origin
        psi0, _ = src.eval_at_distance(0.0, 0)
        assert abs(psi0) < 1e-6
        # packet fully inside the lattice
        assert np.abs(src.psi_cur[0]) < 1e-8
        assert np.abs(src.psi_cur[-1]) < 1e-8


class TestGaussianOracle:
    def test_initial_condition(self):
        x = np.linspace(-5, 5, 11)
        psi = gaussian_packet(x, 0.0, 0.0, 2.0)
        ref = np.exp(-(x**2) / 16.0 + 1j * x)
        assert np.allclose(psi, ref, atol=1e-14)

    def test_satisfies_free_equation(self):
        # d psi / d tau = i d^2 psi / dx^2, checked by central differences
        x = np.linspace(-3, 3, 7)
        tau, h, hx = 0.7, 1e-5, 1e-4
        dt = (gaussian_packet(x, tau + h, 0.0, 1.5) - gaussian_packet(x, tau - h, 0.0, 1.5)) / (2 * h)
        lap = (
            gaussian_packet(x + hx, tau, 0.0, 1.5)
            - 2 * gaussian_packet(x, tau, 0.0, 1.5)
            + gaussian_packet(x - hx, tau, 0.0, 1.5)
        ) / hx**2
        assert np.max(np.abs(dt - 1j * lap)) < 1e-6
