import numpy as np
import pytest

from schrodmap import grid as gd
from schrodmap.partition import Direction


@pytest.fixture(scope="module")
def small_grid():
    return gd.GridSpec(d=3, n_space=8, n_time=16, freq_unit=1.0, t_window=2.0)


def _random_stf(g, seed=0, domain="phys"):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    return gd.SpaceTimeField(g, data, domain)


class TestGridSpec:
    def test_power_of_two_required(self):
        with pytest.raises(ValueError):
            gd.GridSpec(n_space=12)
        with pytest.raises(ValueError):
            gd.GridSpec(n_time=24)

    def test_duality_relations(self, small_grid):
        g = small_grid
        assert g.dx * g.dxi * g.n_space == pytest.approx(2 * np.pi)
        assert g.dt * g.dtau * g.n_time == pytest.approx(2 * np.pi)

    def test_shell_indices(self):
        g = gd.GridSpec(d=3, n_space=16, n_time=32, freq_unit=1.0, t_window=2.0)
        si = g.shell_indices()
        assert si.k_min == 0
        # top shell fits inside the axis Nyquist ball
        assert 1.6 * 2.0**si.k_max <= g.xi_nyquist + 1e-9
        assert 2.0 ** (si.j_max + 1) <= 2 * g.tau_max + 1e-9


class TestTransforms:
    def test_roundtrip(self, small_grid):
        u = _random_stf(small_grid, 3)
        v = gd.ifft_spacetime(gd.fft_spacetime(u))
        rel = np.linalg.norm(v.data - u.data) / np.linalg.norm(u.data)
        assert rel <= 1e-12

    def test_plancherel_spacetime(self, small_grid):
        u = _random_stf(small_grid, 4)
        assert gd.fft_spacetime(u).l2() == pytest.approx(u.l2(), rel=1e-12)

    def test_plancherel_space(self, small_grid):
        g = small_grid
        rng = np.random.default_rng(5)
        f = gd.SpatialField(g, rng.standard_normal(g.space_shape) + 0j, "phys")
        assert gd.fft_space(f).l2() == pytest.approx(f.l2(), rel=1e-12)

    def test_constant_field_hits_dc(self, small_grid):
        g = small_grid
        f = gd.SpatialField(g, np.ones(g.space_shape, dtype=complex), "phys")
        fh = gd.fft_space(f)
        dc = fh.data[0, 0, 0]
        off = fh.data.copy()
        off[0, 0, 0] = 0.0
        assert np.max(np.abs(off)) <= 1e-12 * abs(dc)
        # unitary transform: L2 mass preserved, concentrated in one cell
        assert abs(dc) * g.dxi ** (g.d / 2.0) == pytest.approx(f.l2(), rel=1e-12)

    def test_plane_wave_single_coefficient(self, small_grid):
        g = small_grid
        x = g.x_axis()
        xi0 = np.array([2.0, -1.0, 0.0])
        phase = (
            x.reshape(-1, 1, 1) * xi0[0]
            + x.reshape(1, -1, 1) * xi0[1]
            + x.reshape(1, 1, -1) * xi0[2]
        )
        f = gd.SpatialField(g, np.exp(1j * phase), "phys")
        fh = gd.fft_space(f)
        mags = np.abs(fh.data)
        idx = np.unravel_index(np.argmax(mags), mags.shape)
        ax = g.xi_axis()
        assert (ax[idx[0]], ax[idx[1]], ax[idx[2]]) == (2.0, -1.0, 0.0)
        mags[idx] = 0.0
        assert mags.max() <= 1e-12 * abs(fh.data[idx])

    def test_domain_flag_enforced(self, small_grid):
        u = _random_stf(small_grid, 6)
        with pytest.raises(gd.DomainError):
            gd.ifft_spacetime(u)
        with pytest.raises(gd.DomainError):
            gd.fft_spacetime(gd.fft_spacetime(u))

    def test_conjugate_reflect_matches_pointwise_conj(self, small_grid):
        u = _random_stf(small_grid, 7)
        lhs = gd.conjugate_reflect(gd.fft_spacetime(u))
        rhs = gd.fft_spacetime(gd.SpaceTimeField(small_grid, np.conj(u.data), "phys"))
        assert np.max(np.abs(lhs.data - rhs.data)) <= 1e-12 * np.max(np.abs(rhs.data))


class TestModulationMultiplier:
    def test_identity_sum(self, small_grid):
        u = gd.fft_spacetime(_random_stf(small_grid, 8))
        jc = gd.modulation_ceiling(small_grid)
        total = np.zeros_like(u.data)
        for j in range(jc + 1):
            total += gd.modulation_multiplier(u, j, "exact").data
        np.testing.assert_allclose(total, u.data, atol=1e-12 * np.max(np.abs(u.data)))

    def test_le_plateau_preserves_low_modulation(self, small_grid):
        g = small_grid
        m = g.modulation()
        data = np.where(np.abs(m) <= 1.0, 1.0 + 0j, 0.0)
        u = gd.SpaceTimeField(g, data, "freq")
        out = gd.modulation_multiplier(u, 0, "le")
        np.testing.assert_allclose(out.data, u.data, atol=1e-14)

    def test_signed_variants_split(self, small_grid):
        u = gd.fft_spacetime(_random_stf(small_grid, 9))
        j = 2
        plus = gd.modulation_multiplier(u, j, "plus").data
        minus = gd.modulation_multiplier(u, j, "minus").data
        whole = gd.modulation_multiplier(u, j, "exact").data
        m = small_grid.modulation()
        mask = m != 0
        np.testing.assert_allclose((plus + minus)[mask], whole[mask], atol=1e-13)

    def test_j_above_ceiling_rejected(self, small_grid):
        u = gd.fft_spacetime(_random_stf(small_grid, 10))
        with pytest.raises(ValueError):
            gd.modulation_multiplier(u, gd.modulation_ceiling(small_grid) + 1)

    def test_commutes_with_translation(self, small_grid):
        g = small_grid
        u = _random_stf(g, 11)
        shifted = gd.SpaceTimeField(g, np.roll(u.data, 3, axis=0), "phys")
        a = gd.modulation_multiplier(gd.fft_spacetime(u), 1, "exact")
        b = gd.modulation_multiplier(gd.fft_spacetime(shifted), 1, "exact")
        a_shift = np.roll(gd.ifft_spacetime(a).data, 3, axis=0)
        b_phys = gd.ifft_spacetime(b).data
        assert np.max(np.abs(a_shift - b_phys)) <= 1e-12 * np.max(np.abs(b_phys))


class TestFiberSlicing:
    def test_axis_direction_slabs(self, small_grid):
        g = small_grid
        slc = gd.fiber_slice(g, Direction((1, 0, 0)))
        assert slc.n_fibers == g.n_space
        counts = slc.counts()
        assert np.all(counts == g.n_space ** (g.d - 1))

    def test_diagonal_brute_force(self, small_grid):
        g = small_grid
        e = Direction((1, 1, 0))
        slc = gd.fiber_slice(g, e)
        # brute force: group integer coordinates by (n . m) mod N with a dict
        n = g.n_space
        s = np.arange(n)
        s[n // 2 :] -= n
        groups = {}
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    key = (s[i] * 1 + s[j] * 1 + s[k] * 0) % n
                    groups.setdefault(key, []).append((i, j, k))
        assert slc.n_fibers == len(groups)
        counts = sorted(slc.counts().tolist())
        assert counts == sorted(len(v) for v in groups.values())

    def test_mass_partition(self, small_grid):
        g = small_grid
        u = _random_stf(g, 12)
        slc = gd.fiber_slice(u, Direction((1, 1, 0)))
        total = sum(np.sum(np.abs(arr) ** 2) for arr in slc.fiber_arrays(u))
        assert total == pytest.approx(np.sum(np.abs(u.data) ** 2), rel=1e-12)
        # measure consistency: dr * dv = dx^d
        assert slc.dr * slc.dv == pytest.approx(g.dx**g.d, rel=1e-12)

    def test_requires_physical_domain_and_direction_type(self, small_grid):
        u = gd.fft_spacetime(_random_stf(small_grid, 13))
        with pytest.raises(gd.DomainError):
            gd.fiber_slice(u, Direction((1, 0, 0)))
        with pytest.raises(TypeError):
            gd.fiber_slice(small_grid, (1.0, 0.5, 0.0))


class TestContainer:
    def test_roundtrip_spacetime(self, tmp_path, small_grid):
        u = _random_stf(small_grid, 14)
        path = tmp_path / "u.fld"
        gd.save_field(path, u)
        v = gd.load_field(path)
        assert isinstance(v, gd.SpaceTimeField)
        assert v.domain == u.domain and v.grid == u.grid
        np.testing.assert_array_equal(v.data, u.data)

    def test_roundtrip_sphere(self, tmp_path, small_grid):
        g = small_grid
        rng = np.random.default_rng(15)
        raw = rng.standard_normal(g.space_shape + (3,))
        raw /= np.linalg.norm(raw, axis=-1, keepdims=True)
        s = gd.SphereField(g, raw)
        path = tmp_path / "s.fld"
        gd.save_field(path, s)
        s2 = gd.load_field(path)
        assert isinstance(s2, gd.SphereField)
        np.testing.assert_array_equal(s2.data, s.data)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.fld"
        path.write_bytes(b"not a field")
        with pytest.raises(ValueError):
            gd.load_field(path)


class TestDyadicRescale:
    def test_l2_scaling(self):
        g = gd.GridSpec(d=3, n_space=16, n_time=16, freq_unit=1.0, t_window=2.0)
        rng = np.random.default_rng(16)
        r = g.xi_radii()
        data = (rng.standard_normal(g.space_shape) + 1j * rng.standard_normal(g.space_shape)) * (
            (r >= 0.5) & (r <= 3.0)
        )
        f = gd.SpatialField(g, data, "freq")
        up = gd.dyadic_rescale_fourier(f, up=True)
        assert up.l2() == pytest.approx(2.0 ** (-g.d / 2.0) * f.l2(), rel=1e-12)
        down = gd.dyadic_rescale_fourier(up, up=False)
        np.testing.assert_allclose(down.data, f.data, atol=1e-14)
