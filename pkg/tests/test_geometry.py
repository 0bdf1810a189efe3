"""Point clouds, neighbour search and normalisation."""
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshfree.errors import DegenerateGeometry, InvalidArgument
from meshfree.geometry import (
    Domain,
    PointCloud,
    Stencil,
    generate_perturbed_grid,
    knn_stencil,
    knn_stencils,
    load_cloud,
    normalize,
    radius_stencil,
    radius_stencils,
    save_cloud,
    unit_square_cloud,
)


def brute_force_knn(cloud, center, n):
    d = cloud.domain.minimum_image(cloud.points - cloud.points[center])
    dist = np.hypot(d[:, 0], d[:, 1])
    idx = np.arange(len(cloud))
    keep = idx != center
    order = np.lexsort((idx[keep], dist[keep]))
    return idx[keep][order][:n]


class TestPerturbedGrid:
    def test_zero_noise_is_cartesian(self):
        c = generate_perturbed_grid(3, 3, 1.0, 0.0, seed=5)
        assert len(c) == 9
        xs = np.unique(c.points[:, 0])
        np.testing.assert_array_equal(xs, [0.5, 1.5, 2.5])
        np.testing.assert_array_equal(np.unique(c.points[:, 1]), xs)

    def test_displacement_bound(self):
        c = generate_perturbed_grid(100, 100, 0.01, 1.0, seed=7)
        ix, iy = np.meshgrid(np.arange(100), np.arange(100), indexing="xy")
        base = np.column_stack([(ix.ravel() + 0.5) * 0.01, (iy.ravel() + 0.5) * 0.01])
        disp = c.points - base
        assert np.all(np.abs(disp) < 0.005)
        # the noise actually fills most of the band
        assert np.abs(disp).max() > 0.0049

    def test_bit_identical_for_equal_seed(self):
        a = generate_perturbed_grid(50, 50, 0.02, 0.5, seed=3)
        b = generate_perturbed_grid(50, 50, 0.02, 0.5, seed=3)
        assert a.points.tobytes() == b.points.tobytes()

    @pytest.mark.parametrize("spacing", [0.0, -1.0])
    def test_rejects_bad_spacing(self, spacing):
        with pytest.raises(InvalidArgument):
            generate_perturbed_grid(4, 4, spacing, 0.1, seed=0)

    def test_rejects_tiny_grid_and_negative_noise(self):
        with pytest.raises(InvalidArgument):
            generate_perturbed_grid(1, 4, 0.1, 0.1, seed=0)
        with pytest.raises(InvalidArgument):
            generate_perturbed_grid(4, 4, 0.1, -0.1, seed=0)

    def test_duplicates_rejected(self):
        dom = Domain((0.0, 0.0), (1.0, 1.0))
        with pytest.raises(DegenerateGeometry):
            PointCloud([[0.1, 0.1], [0.1, 0.1], [0.5, 0.5]], 0.5, dom)

    def test_points_outside_domain_rejected(self):
        dom = Domain((0.0, 0.0), (1.0, 1.0))
        with pytest.raises(InvalidArgument):
            PointCloud([[0.1, 0.1], [1.5, 0.5]], 0.5, dom)

    def test_periodic_wrap(self):
        dom = Domain((0.0, 0.0), (1.0, 1.0), (True, True))
        c = PointCloud([[1.25, -0.25], [0.5, 0.5]], 0.5, dom)
        np.testing.assert_allclose(c.points[0], [0.25, 0.75])


class TestKnn:
    def test_axis_neighbours_on_grid(self):
        c = generate_perturbed_grid(7, 7, 0.1, 0.0, seed=0)
        st_ = knn_stencil(c, 24, 4)
        np.testing.assert_allclose(st_.d_n, 0.1, rtol=1e-12)
        got = {tuple(np.round(o / 0.1).astype(int)) for o in st_.offsets}
        assert got == {(1, 0), (-1, 0), (0, 1), (0, -1)}

    def test_eight_neighbours_on_grid(self):
        c = generate_perturbed_grid(7, 7, 0.1, 0.0, seed=0)
        st_ = knn_stencil(c, 24, 8)
        np.testing.assert_allclose(st_.d_n, 0.1 * np.sqrt(2), rtol=1e-12)
        assert len({tuple(np.round(o / 0.1).astype(int)) for o in st_.offsets}) == 8

    def test_sorted_and_consistent(self):
        c = unit_square_cloud(1 / 16, 1.0, seed=2)
        b = knn_stencils(c, 12)
        r = np.hypot(b.offsets[..., 0], b.offsets[..., 1])
        assert np.all(np.diff(r, axis=1) >= 0)
        np.testing.assert_allclose(b.d_n, r.max(axis=1))
        assert np.all(r > 0)

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(1, 40), periodic=st.booleans(),
           eps=st.sampled_from([0.0, 0.5, 1.0]))
    def test_matches_exhaustive_sort(self, seed, n, periodic, eps):
        c = generate_perturbed_grid(9, 8, 0.1, eps, seed=seed, periodic=periodic)
        centers = np.random.default_rng(seed).choice(len(c), 5, replace=False)
        b = knn_stencils(c, n, centers)
        for k, ctr in enumerate(centers):
            np.testing.assert_array_equal(b.neighbors[k], brute_force_knn(c, ctr, n))

    def test_random_cloud_n35(self):
        c = unit_square_cloud(1 / 25, 1.0, seed=9)
        b = knn_stencils(c, 35)
        for k in range(0, len(c), 37):
            np.testing.assert_array_equal(b.neighbors[k], brute_force_knn(c, k, 35))

    def test_lattice_translation_invariance(self):
        c = unit_square_cloud(1 / 12, 1.0, seed=4)
        moved = PointCloud(c.points + np.array([1.0, -1.0]) + 0.3, c.spacing, c.domain, c.epsilon)
        a, b = knn_stencils(c, 10), knn_stencils(moved, 10)
        np.testing.assert_array_equal(a.neighbors, b.neighbors)
        np.testing.assert_allclose(a.offsets, b.offsets, atol=1e-12)

    def test_grid_d_n_values(self):
        c = generate_perturbed_grid(12, 12, 0.5, 0.0, seed=0, periodic=True)
        allowed = 0.5 * np.sqrt([1, 2, 4, 5, 8, 9, 10])
        for n in (4, 8, 12, 20, 24):
            d = knn_stencils(c, n).d_n
            assert np.all(np.min(np.abs(d[:, None] - allowed[None]), axis=1) < 1e-12)

    def test_n_too_large(self):
        c = generate_perturbed_grid(3, 3, 1.0, 0.0, seed=0)
        with pytest.raises(InvalidArgument):
            knn_stencil(c, 0, 9)


class TestRadius:
    def test_small_radius_is_empty(self):
        c = generate_perturbed_grid(5, 5, 1.0, 0.0, seed=0)
        assert len(radius_stencil(c, 12, 0.5)) == 0

    def test_grid_radius_one_and_half(self):
        c = generate_perturbed_grid(5, 5, 1.0, 0.0, seed=0)
        assert len(radius_stencil(c, 12, 1.5)) == 8

    def test_quintic_support_count(self):
        c = unit_square_cloud(1 / 30, 1.0, seed=1)
        b = radius_stencils(c, 3 * 1.5 / 30)
        assert 55 <= b.counts.mean() <= 72

    def test_sorted_then_index(self):
        c = generate_perturbed_grid(6, 6, 1.0, 0.0, seed=0)
        s = radius_stencil(c, 14, 1.5)
        r = np.hypot(s.offsets[:, 0], s.offsets[:, 1])
        key = list(zip(r.round(12), s.neighbors))
        assert key == sorted(key)

    def test_rejects_nonpositive_radius(self):
        c = generate_perturbed_grid(3, 3, 1.0, 0.0, seed=0)
        with pytest.raises(InvalidArgument):
            radius_stencil(c, 0, 0.0)


class TestNormalize:
    def test_example(self):
        ns = normalize(Stencil.from_offsets([[1.0, 0.0], [0.0, 2.0]]))
        np.testing.assert_allclose(ns.offsets_hat, [[0.5, 0.0], [0.0, 1.0]])
        assert ns.d_n == 2.0

    def test_unit_stencil_unchanged(self):
        off = np.array([[1.0, 0.0], [0.0, -0.5], [0.3, 0.2]])
        np.testing.assert_array_equal(normalize(Stencil.from_offsets(off)).offsets_hat, off)

    @given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=12))
    def test_idempotent(self, pts):
        off = np.array(pts, dtype=float)
        if np.max(np.hypot(off[:, 0], off[:, 1])) < 1e-6:
            return
        once = normalize(Stencil.from_offsets(off))
        twice = normalize(Stencil.from_offsets(once.offsets_hat))
        np.testing.assert_allclose(twice.offsets_hat, once.offsets_hat, rtol=1e-14, atol=1e-15)
        np.testing.assert_allclose(np.max(np.hypot(*once.offsets_hat.T)), 1.0, rtol=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegenerateGeometry):
            normalize(Stencil.from_offsets(np.zeros((3, 2))))


def test_cloud_csv_round_trip(tmp_path):
    c = unit_square_cloud(1 / 8, 0.7, seed=21)
    path = save_cloud(c, tmp_path / "cloud.csv")
    assert path.read_text().splitlines()[0] == "x,y"
    side = json.loads(path.with_suffix(".json").read_text())
    assert {"spacing", "epsilon", "nx", "ny", "seed", "periodic"} <= set(side)
    back = load_cloud(path)
    np.testing.assert_array_equal(back.points, c.points)
    assert back.domain == c.domain and back.epsilon == c.epsilon
