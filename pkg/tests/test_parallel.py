import math

import numpy as np
import pytest

from qpstd.lattice import GridSpec, WaveField, build_geometry
from qpstd.parallel import (
    DecomposedModel,
    HaloWeights,
    Topology,
    decompose,
    exchange_and_weight,
)
from qpstd.stepper import Propagator
from qpstd.tfsf import taper_profile


class TestTopology:
    def test_halo_floor(self):
        with pytest.raises(ValueError, match="n_halo"):
            Topology(counts=(1, 2, 1), n_halo=14, n_t=10)
        t = Topology(counts=(1, 2, 1), n_halo=15, n_t=10)
        assert t.exchange_thickness == 14

    def test_counts_positive(self):
        with pytest.raises(ValueError):
            Topology(counts=(0, 2))


class TestHaloWeights:
    def test_values_match_taper(self):
        w = HaloWeights(n_t=10).values
        assert w.shape == (10,)
        ref = taper_profile(np.arange(1, 11) / 11.0)
        assert np.allclose(w, ref, atol=1e-15)
        # strictly increasing, in (0, 1), distal weight is tiny
        assert np.all(np.diff(w) > 0)
        assert 0 < w[0] < 1e-3 and w[-1] < 1.0

    def test_distal_weight_value(self):
        # direct evaluation of the blend profile at 1/11
        rho = 1.0 / 11.0
        ref = (
            rho
            - (2 / (3 * math.pi)) * math.sin(2 * math.pi * rho)
            + (1 / (12 * math.pi)) * math.sin(4 * math.pi * rho)
        )
        assert HaloWeights(10).values[0] == pytest.approx(ref, rel=1e-13)
        assert ref == pytest.approx(3.098e-4, abs=2e-6)


class TestDecompose:
    def test_production_split(self):
        # splitting the y axis in two gives 288x160x288 local lattices
        topo = Topology(counts=(1, 2, 1), n_halo=15, n_t=10)
        subs = decompose((288, 290, 288), topo)
        assert len(subs) == 2
        for s in subs:
            assert s.local_shape == (288, 160, 288)
            assert s.core_n == (288, 145, 288)
        assert subs[0].halo_hi[1] == 15 and subs[0].halo_lo[1] == 0
        assert subs[1].halo_lo[1] == 15 and subs[1].halo_hi[1] == 0

    def test_single_domain_has_no_halo(self):
        topo = Topology(counts=(1,), n_halo=15, n_t=10)
        (s,) = decompose((64,), topo)
        assert s.local_shape == (64,)
        assert s.halo_lo == (0,) and s.halo_hi == (0,)

    def test_cores_tile_exactly(self):
        topo = Topology(counts=(3,), n_halo=15, n_t=10)
        subs = decompose((100,), topo)
        covered = sorted(
            i for s in subs for i in range(s.core_lo[0], s.core_lo[0] + s.core_n[0])
        )
        assert covered == list(range(100))

    def test_core_too_small(self):
        topo = Topology(counts=(4,), n_halo=15, n_t=10)
        with pytest.raises(ValueError, match="smaller"):
            decompose((100,), topo)


class TestExchange:
    def setup_pair(self, n=96):
        topo = Topology(counts=(2,), n_halo=15, n_t=10)
        subs = decompose((n,), topo)
        rng = np.random.default_rng(17)
        global_field = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        fields = {}
        for s in subs:
            w = s.window_lo[0]
            local = np.zeros(s.local_shape, dtype=complex)
            sl = s.core_slices_local[0]
            local[sl] = global_field[s.core_lo[0] : s.core_lo[0] + s.core_n[0]]
            fields[s.coords] = local
        return topo, subs, fields, global_field

    def test_proximal_copies_exact_distal_weighted_outermost_zero(self):
        topo, subs, fields, gf = self.setup_pair()
        exchange_and_weight(fields, subs, topo)
        s1 = subs[1]  # right block, has a low-side halo
        f = fields[s1.coords]
        glo = s1.core_lo[0]
        # proximal 4 grids: exact neighbor values
        for d in range(1, 5):
            assert f[15 - d] == gf[glo - d]
        # weighted zone: neighbor value times the blend weights
        w = HaloWeights(10).values
        for l in range(1, 11):
            local_idx = l  # distal to proximal: local 1..10
            global_idx = glo - 15 + l
            assert f[local_idx] == pytest.approx(gf[global_idx] * w[l - 1], rel=1e-14)
        # outermost halo grid pinned to zero
        assert f[0] == 0.0
        # the left block's high-side halo mirrors this
        s0 = subs[0]
        g = fields[s0.coords]
        assert g[-1] == 0.0
        for d in range(1, 5):
            assert g[s0.halo_lo[0] + s0.core_n[0] + d - 1] == gf[s0.core_n[0] + d - 1]

    def test_exchange_volume(self):
        topo = Topology(counts=(2,), n_halo=15, n_t=10)
        assert topo.exchange_thickness == topo.n_t + 4


def gaussian_blob_3d(grid, center, sigma):
    r2 = 0.0
    for ax in range(3):
        c = grid.coords(ax)
        shape_ax = [1, 1, 1]
        shape_ax[ax] = c.size
        r2 = r2 + ((c - center[ax]).reshape(shape_ax)) ** 2
    return np.exp(-r2 / (4.0 * sigma**2) + 0.0j)


def fidelity_pair(n, steps, center_y, sigma, dtau=1e-3, workers=1, masked=True):
    """Free packet under single-domain vs 1x2x1 stepping; returns the
    max-abs disagreement over the non-absorbing interior."""
    from qpstd.boundary import AbsorberProfile

    grid = GridSpec(n=n, spacing=(math.pi / 10,) * 3, dtau=dtau)
    y = grid.coords(1)
    blob = gaussian_blob_3d(grid, (0.0, center_y, 0.0), sigma)
    # carrier exp(-i y): the packet drifts toward -y, away from the split
    blob = blob * np.exp(-1j * y.reshape([1, n[1], 1]))
    mask = None
    keep = np.ones(n, dtype=bool)
    if masked:
        # damping layer on every global face, 10 grids wide
        prof = AbsorberProfile(5.0, 0.1, 10, clipped=True)
        mask = np.ones(n)
        for ax, m in enumerate(n):
            idx = np.arange(m, dtype=float)
            d = np.minimum(idx, m - 1 - idx)
            shape_ax = [1, 1, 1]
            shape_ax[ax] = m
            mask = mask * np.exp(-prof.rate(d) * dtau).reshape(shape_ax)
            keep &= (d.reshape(shape_ax) >= prof.width) | np.zeros(n, bool)
    state = WaveField(prev=blob.copy(), cur=blob.copy())
    prop = Propagator(grid, mode="pstd", mask=mask)
    for _ in range(steps):
        state = prop.step(state)
    topo = Topology(counts=(1, 2, 1), n_halo=15, n_t=10)
    model = DecomposedModel(grid, topo, mode="pstd", mask=mask, workers=workers)
    model.set_global_field(blob.copy(), blob.copy(), n=0)
    for _ in range(steps):
        model.step()
    split = model.gather("cur")
    return float(np.max(np.abs((split - state.cur)[keep])))


class TestDecomposedStepping:
    def test_two_blocks_match_single_domain(self):
        # production-shaped comparison: absorber on the global boundary,
        # packet inside one block with quiet tails at both the split plane
        # and the absorbing layer
        n = (32, 192, 32)
        grid = GridSpec(n=n, spacing=(math.pi / 10,) * 3, dtau=1e-3)
        y = grid.coords(1)
        err = fidelity_pair(n, steps=1000, center_y=y[45], sigma=2.0)
        assert err <= 1e-6

    def test_interface_amplitude_sets_the_accuracy(self):
        # with the packet parked on the split plane, the tapered-halo local
        # transforms carry a ~1e-3-level relative derivative error; this
        # documents the scheme's measured fidelity at order-one interface
        # amplitude (the regime production runs operate in)
        n = (32, 96, 32)
        grid = GridSpec(n=n, spacing=(math.pi / 10,) * 3, dtau=1e-3)
        y = grid.coords(1)
        err = fidelity_pair(n, steps=300, center_y=y[48], sigma=2.5)
        assert 1e-6 < err <= 2e-2

    def test_worker_count_invariance_is_bitwise(self):
        n = (32, 96, 32)
        grid = GridSpec(n=n, spacing=(math.pi / 10,) * 3, dtau=1e-3)
        y = grid.coords(1)
        kw = dict(n=n, steps=60, center_y=y[40], sigma=2.5)
        a = fidelity_pair(workers=1, **kw)
        b = fidelity_pair(workers=2, **kw)
        assert a == b  # identical scalar because the fields are bitwise equal

    def test_gather_round_trip(self):
        n = (24, 64, 24)
        grid = GridSpec(n=n, spacing=(math.pi / 10,) * 3, dtau=1e-3)
        rng = np.random.default_rng(9)
        f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        topo = Topology(counts=(1, 2, 1), n_halo=15, n_t=10)
        model = DecomposedModel(grid, topo, mode="pstd")
        model.set_global_field(f.copy(), f.copy(), n=0)
        assert np.array_equal(model.gather("cur"), f)
