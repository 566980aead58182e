import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schrodmap import partition as pt


class TestEta0:
    def test_plateau(self):
        assert pt.eta0(0.0) == 1.0
        assert pt.eta0(1.25) == 1.0
        assert pt.eta0(-1.2) == 1.0

    def test_support(self):
        assert pt.eta0(2.0) == 0.0
        assert pt.eta0(1.6) == 0.0
        assert pt.eta0(-5.0) == 0.0

    def test_transition_strictly_between(self):
        v = pt.eta0(1.45)
        assert 0.0 < v < 1.0

    @given(st.floats(-50, 50))
    def test_range_and_evenness(self, mu):
        v = float(pt.eta0(mu))
        assert 0.0 <= v <= 1.0
        assert v == pytest.approx(float(pt.eta0(-mu)), abs=1e-15)

    def test_monotone_on_transition(self):
        mus = np.linspace(1.25, 1.6, 200)
        vals = pt.eta0(mus)
        assert np.all(np.diff(vals) <= 1e-12)


class TestEtaJ:
    def test_negative_j_rejected(self):
        with pytest.raises(ValueError):
            pt.eta_j(-1, 0.5)

    def test_vanishes_at_origin_for_positive_j(self):
        assert pt.eta_j(1, 0.0) == 0.0

    def test_plateau_value(self):
        # 6.5/8 is inside the inner plateau and 6.5/4 is beyond the support
        assert pt.eta_j(3, 6.5) == pytest.approx(1.0, abs=1e-15)

    def test_transition_value_strictly_inside(self):
        # 6/4 = 1.5 sits in the transition band, so the difference is not 1
        v = float(pt.eta_j(3, 6.0))
        assert 0.0 < v < 1.0

    @given(st.floats(-200.0, 200.0), st.integers(0, 8))
    @settings(max_examples=200)
    def test_telescoping(self, mu, jmax):
        total = sum(float(pt.eta_j(j, mu)) for j in range(jmax + 1))
        assert total == pytest.approx(float(pt.eta_le(jmax, mu)), abs=1e-12)

    @given(st.floats(-200.0, 200.0), st.integers(0, 6))
    @settings(max_examples=100)
    def test_signed_split(self, mu, j):
        plus = float(pt.eta_j_signed(j, mu, 1))
        minus = float(pt.eta_j_signed(j, mu, -1))
        whole = float(pt.eta_j(j, mu))
        if mu == 0.0:
            assert plus + minus == pytest.approx(2 * whole, abs=1e-14)
        else:
            assert plus + minus == pytest.approx(whole, abs=1e-14)

    def test_range_combinator(self):
        mu = np.linspace(-40, 40, 101)
        direct = sum(pt.eta_j(j, mu) for j in range(2, 6))
        np.testing.assert_allclose(pt.eta_range(2, 5, mu), direct, atol=1e-13)
        assert np.all(pt.eta_range(5, 2, mu) == 0.0)

    def test_eta_ge(self):
        mu = np.linspace(-300, 300, 101)
        np.testing.assert_allclose(
            pt.eta_ge(3, mu) + pt.eta_le(2, mu), np.ones_like(mu), atol=1e-13
        )


class TestShellSymbol:
    def test_plateau_on_unit_sphere(self):
        xi = np.array([1.0, 0.0, 0.0])
        assert pt.shell_symbol(0, xi) == pytest.approx(1.0, abs=1e-15)

    def test_far_shell_vanishes(self):
        xi = np.array([1.0, 0.0, 0.0])
        assert pt.shell_symbol(5, xi) == 0.0

    def test_partition_on_annulus(self):
        rng = np.random.default_rng(0)
        xi = rng.standard_normal((100, 3))
        xi = xi / np.linalg.norm(xi, axis=-1, keepdims=True)
        xi *= rng.uniform(1.0, 8.0, size=(100, 1))
        total = sum(pt.shell_symbol(k, xi) for k in range(-3, 8))
        np.testing.assert_allclose(total, 1.0, atol=1e-12)


class TestDirections:
    def test_height_one_set(self):
        ds = pt.build_direction_set(3, 0.5)
        assert len(ds) == 26  # all nonzero sign patterns of height 1
        ivecs = {e.ivec for e in ds.directions}
        assert (1, 0, 0) in ivecs and (1, 1, 1) in ivecs
        assert ds.achieved_radius <= 0.5

    def test_symmetry(self):
        ds = pt.build_direction_set(3, 0.3)
        ivecs = {e.ivec for e in ds.directions}
        for v in ivecs:
            assert tuple(-c for c in v) in ivecs

    def test_covering_oracle(self):
        # independent exhaustive check on a fresh random sphere sample
        ds = pt.build_direction_set(3, 0.4)
        rng = np.random.default_rng(123)
        w = rng.standard_normal((10_000, 3))
        w /= np.linalg.norm(w, axis=-1, keepdims=True)
        units = ds.units()
        d2 = 2.0 - 2.0 * (w @ units.T)
        assert np.sqrt(np.min(d2, axis=1).max()) <= ds.delta + 1e-9

    def test_infeasible_radius_errors(self):
        with pytest.raises(pt.CoveringError) as err:
            pt.build_direction_set(3, 1e-31, max_height=2, n_check=500)
        assert "covering not achieved" in str(err.value)

    def test_json_roundtrip(self):
        ds = pt.build_direction_set(3, 0.5)
        ds2 = pt.DirectionSet.from_json(ds.to_json())
        assert ds2.delta == ds.delta
        assert [e.ivec for e in ds2.directions] == [e.ivec for e in ds.directions]

    def test_non_primitive_rejected(self):
        with pytest.raises(ValueError):
            pt.Direction((2, 4, 0))


class TestTransverse:
    def test_aligned_case(self):
        ds = pt.build_direction_set(3, 0.5)
        w = np.array([1.0, 0.0, 0.0])
        e, d1, d2, c = pt.pick_transverse_direction(w, w, ds)
        assert d1 == pytest.approx(1.0)
        assert d2 == pytest.approx(1.0)
        assert e.ivec == (1, 0, 0)

    def test_antipodal_second_vector(self):
        ds = pt.build_direction_set(3, 0.5)
        rng = np.random.default_rng(5)
        w = rng.standard_normal(3)
        w /= np.linalg.norm(w)
        e, d1, d2, c = pt.pick_transverse_direction(w, -w, ds)
        assert d1 >= c and d2 >= c

    def test_random_pairs_always_succeed(self):
        ds = pt.build_direction_set(3, 0.2)
        rng = np.random.default_rng(17)
        worst = np.inf
        for _ in range(1000):
            w1, w2 = rng.standard_normal((2, 3))
            w1 /= np.linalg.norm(w1)
            w2 /= np.linalg.norm(w2)
            e, d1, d2, c = pt.pick_transverse_direction(w1, w2, ds)
            worst = min(worst, d1, d2)
        assert worst >= pt.transversality_constant(0.2)

    def test_not_unit_rejected(self):
        ds = pt.build_direction_set(3, 0.5)
        with pytest.raises(ValueError):
            pt.pick_transverse_direction([2.0, 0, 0], [1.0, 0, 0], ds)


class TestLatticeCutoffs:
    def test_partition_of_unity_1d(self):
        xi = np.linspace(-5, 5, 1001)
        total = sum(pt.chi1(xi - n) for n in range(-8, 9))
        np.testing.assert_allclose(total, 1.0, atol=1e-12)

    def test_wide_covers_narrow(self):
        xi = np.linspace(-0.67, 0.67, 301)
        narrow = pt.chi1(xi)
        wide = pt.chi1_wide(xi)
        assert np.all(wide[narrow > 0] == 1.0)

    def test_origin_value_and_neighbor_sum(self):
        v0 = pt.lattice_cutoff(0, np.zeros(3), np.zeros(3))
        assert v0 == pytest.approx(1.0)
        rng = np.random.default_rng(1)
        for _ in range(100):
            xi = rng.uniform(-2, 2, size=3)
            total = 0.0
            base = np.round(xi)
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    for dz in (-1, 0, 1):
                        n = base + np.array([dx, dy, dz])
                        total += pt.lattice_cutoff(0, n, xi)
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_partition_at_scale_one(self):
        rng = np.random.default_rng(2)
        fam = pt.LatticeCutoffFamily(1)
        for _ in range(100):
            xi = rng.uniform(-4, 4, size=3)
            cells = fam.cells_touching(xi, xi)
            total = sum(fam.narrow(np.asarray(n), xi) for n in cells)
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_translation_covariance(self):
        xi = np.array([4.0, 0.0, 0.0])
        n = np.array([4.0, 0.0, 0.0])
        v1 = pt.lattice_cutoff(2, n, xi)
        v2 = pt.lattice_cutoff(2, np.zeros(3), np.zeros(3))
        assert v1 == pytest.approx(v2)

    def test_off_lattice_rejected(self):
        with pytest.raises(ValueError):
            pt.lattice_cutoff(2, np.array([1.0, 0, 0]), np.zeros(3))
        with pytest.raises(ValueError):
            pt.lattice_cutoff(-1, np.zeros(3), np.zeros(3))
