"""Primitive solids, voxel baking, point queries, and ray segments."""

from __future__ import annotations

import math

import numpy as np
import pytest

from watchforge.geometry import Ray
from watchforge.scene import (
    BakeError,
    Primitive,
    Shape,
    bake,
    occupied_segments,
    query,
    query_many,
)


def box(center, half, color=(0.5, 0.5, 0.5), density=40.0):
    return Primitive(Shape.BOX, center, half, color, density)


def sphere(center, r, color=(0.5, 0.5, 0.5), density=40.0):
    return Primitive(Shape.SPHERE, center, (r,), color, density)


def cylinder(center, r, h, color=(0.5, 0.5, 0.5), density=40.0):
    return Primitive(Shape.CYLINDER, center, (r, h), color, density)


class TestPrimitive:
    def test_dims_arity_enforced(self):
        with pytest.raises(ValueError):
            Primitive(Shape.SPHERE, (0, 0, 0), (0.1, 0.2), (0, 0, 0), 1.0)
        with pytest.raises(ValueError):
            Primitive(Shape.BOX, (0, 0, 0), (0.1,), (0, 0, 0), 1.0)
        with pytest.raises(ValueError):
            Primitive(Shape.CYLINDER, (0, 0, 0), (0.1, 0.2, 0.3), (0, 0, 0), 1.0)

    def test_extent_color_density_validation(self):
        with pytest.raises(ValueError):
            sphere((0, 0, 0), 0.0)
        with pytest.raises(ValueError):
            Primitive(Shape.SPHERE, (0, 0, 0), (0.1,), (1.2, 0, 0), 1.0)
        with pytest.raises(ValueError):
            Primitive(Shape.SPHERE, (0, 0, 0), (0.1,), (0, 0, 0), -1.0)

    def test_box_contains_boundary(self):
        p = box((0.0, 0.0, 0.0), (0.1, 0.2, 0.3))
        assert p.contains(np.array([0.1, 0.2, 0.3]))
        assert p.contains(np.array([0.0, 0.0, 0.0]))
        assert not p.contains(np.array([0.10001, 0.0, 0.0]))

    def test_sphere_contains(self):
        p = sphere((0.2, 0.0, 0.0), 0.3)
        assert p.contains(np.array([0.5, 0.0, 0.0]))
        assert not p.contains(np.array([0.50001, 0.0, 0.0]))

    def test_cylinder_contains(self):
        p = cylinder((0.0, 0.0, 0.1), 0.2, 0.4)
        assert p.contains(np.array([0.2, 0.0, 0.1]))
        assert p.contains(np.array([0.0, 0.0, 0.3]))
        assert not p.contains(np.array([0.0, 0.0, 0.30001]))
        assert not p.contains(np.array([0.15, 0.15, 0.1]))

    def test_contains_vectorized(self):
        p = sphere((0.0, 0.0, 0.0), 0.5)
        pts = np.array([[0.0, 0.0, 0.0], [0.6, 0.0, 0.0]])
        np.testing.assert_array_equal(p.contains(pts), [True, False])

    def test_aabb(self):
        lo, hi = cylinder((0.1, -0.2, 0.3), 0.2, 0.4).aabb()
        np.testing.assert_allclose(lo, [-0.1, -0.4, 0.1])
        np.testing.assert_allclose(hi, [0.3, 0.0, 0.5])

    def test_max_radius_hand_cases(self):
        assert sphere((0.3, 0.0, 0.0), 0.2).max_radius() == pytest.approx(0.5)
        b = box((0.1, -0.1, 0.0), (0.1, 0.2, 0.3))
        assert b.max_radius() == pytest.approx(np.linalg.norm([0.2, 0.3, 0.3]))
        c = cylinder((0.2, 0.0, 0.1), 0.1, 0.4)
        assert c.max_radius() == pytest.approx(math.hypot(0.3, 0.3))

    def test_max_radius_bounds_interior_points(self):
        rng = np.random.default_rng(0)
        prims = [
            box((0.2, -0.1, 0.0), (0.15, 0.1, 0.2)),
            sphere((-0.3, 0.2, 0.1), 0.25),
            cylinder((0.1, 0.3, -0.2), 0.2, 0.3),
        ]
        pts = rng.uniform(-0.8, 0.8, size=(5000, 3))
        for p in prims:
            inside = pts[p.contains(pts)]
            assert np.linalg.norm(inside, axis=1).max() <= p.max_radius() + 1e-12


class TestBakeValidation:
    def test_empty_scene_rejected(self):
        with pytest.raises(BakeError):
            bake([])

    def test_out_of_bounds_primitive_named(self):
        with pytest.raises(BakeError, match="sphere"):
            bake([sphere((0.0, 0.0, 0.0), 1.0)], bounds=1.0)

    def test_resolution_validation(self):
        with pytest.raises(BakeError):
            bake([sphere((0, 0, 0), 0.1)], coarse_res=1)


class TestBakeAndQuery:
    def test_query_inside_and_outside(self):
        scene = bake([box((0.0, 0.0, 0.0), (0.2, 0.2, 0.2), color=(0.9, 0.1, 0.3))])
        sigma, rgb = query(scene, (0.0, 0.0, 0.0))
        assert sigma == 40.0
        np.testing.assert_allclose(rgb, [0.9, 0.1, 0.3])
        sigma, rgb = query(scene, (0.5, 0.5, 0.5))
        assert sigma == 0.0
        np.testing.assert_array_equal(rgb, 0.0)

    def test_query_out_of_cube_is_empty(self):
        scene = bake([sphere((0, 0, 0), 0.2)])
        sigma, _ = query(scene, (2.0, 0.0, 0.0))
        assert sigma == 0.0

    def test_query_many_matches_scalar_query(self):
        scene = bake([sphere((0.1, 0.0, 0.0), 0.3)])
        rng = np.random.default_rng(1)
        pts = rng.uniform(-1.2, 1.2, size=(200, 3))
        sig, rgb = query_many(scene, pts)
        for i in range(0, 200, 17):
            s, c = query(scene, pts[i])
            assert s == sig[i]
            np.testing.assert_array_equal(c, rgb[i])

    def test_density_tie_keeps_first_primitive(self):
        a = box((0.0, 0.0, 0.0), (0.2, 0.2, 0.2), color=(1.0, 0.0, 0.0), density=10.0)
        b = box((0.0, 0.0, 0.0), (0.2, 0.2, 0.2), color=(0.0, 1.0, 0.0), density=10.0)
        scene = bake([a, b])
        _, rgb = query(scene, (0.0, 0.0, 0.0))
        np.testing.assert_array_equal(rgb, [1.0, 0.0, 0.0])

    def test_higher_density_wins_regardless_of_order(self):
        weak = box((0.0, 0.0, 0.0), (0.2, 0.2, 0.2), color=(1.0, 0.0, 0.0), density=5.0)
        strong = sphere((0.0, 0.0, 0.0), 0.1, color=(0.0, 0.0, 1.0), density=50.0)
        for order in ([weak, strong], [strong, weak]):
            scene = bake(order)
            sigma, rgb = query(scene, (0.0, 0.0, 0.0))
            assert sigma == 50.0
            np.testing.assert_array_equal(rgb, [0.0, 0.0, 1.0])

    def test_query_agrees_with_voxel_center_membership(self):
        """A point's value is the winner among primitives containing the
        center of its fine voxel: max density, earliest on ties."""
        prims = [
            box((0.1, 0.0, -0.1), (0.25, 0.2, 0.1), color=(0.2, 0.3, 0.4), density=30.0),
            sphere((-0.1, 0.1, 0.0), 0.2, color=(0.8, 0.1, 0.1), density=60.0),
            cylinder((0.0, -0.2, 0.1), 0.15, 0.3, color=(0.1, 0.9, 0.2), density=60.0),
        ]
        scene = bake(prims)
        voxel = 2.0 * scene.bounds / scene.fine_grid_res
        rng = np.random.default_rng(2)
        pts = rng.uniform(-0.6, 0.6, size=(500, 3))
        sig, rgb = query_many(scene, pts)
        for i in range(500):
            gi = np.floor((pts[i] + scene.bounds) / voxel)
            center = -scene.bounds + (gi + 0.5) * voxel
            best_sigma, best_rgb = 0.0, np.zeros(3)
            for p in prims:
                if p.contains(center) and p.density > best_sigma:
                    best_sigma, best_rgb = p.density, np.asarray(p.color)
            assert sig[i] == best_sigma
            np.testing.assert_array_equal(rgb[i], best_rgb)

    def test_cache_shapes(self):
        scene = bake([sphere((0, 0, 0), 0.2)], coarse_res=32, fine_res=4)
        assert scene.coarse_occ.shape == (32, 32, 32)
        assert scene.fine_slot.shape == (32, 32, 32)
        n = scene.n_occupied
        assert n > 0
        assert scene.fine_sigma.shape == (n, 4, 4, 4)
        assert scene.fine_rgb.shape == (n, 4, 4, 4, 3)
        assert (scene.fine_slot >= 0).sum() == n

    def test_occupied_box_bounds_all_density(self):
        scene = bake([sphere((0.2, -0.1, 0.3), 0.15)])
        rng = np.random.default_rng(3)
        pts = rng.uniform(-1, 1, size=(4000, 3))
        sig, _ = query_many(scene, pts)
        dense = pts[sig > 0]
        assert (dense >= scene.occ_lo).all()
        assert (dense <= scene.occ_hi).all()

    def test_arrays_frozen(self):
        scene = bake([sphere((0, 0, 0), 0.2)])
        with pytest.raises(ValueError):
            scene.coarse_occ[0, 0, 0] = True


class TestOccupiedSegments:
    def test_miss_returns_empty(self):
        scene = bake([sphere((0, 0, 0), 0.2)])
        ray = Ray(np.array([0.0, 5.0, 0.0]), np.array([1.0, 0.0, 0.0]))
        assert occupied_segments(scene, ray) == []

    def test_axis_ray_single_merged_segment(self):
        scene = bake([box((0.0, 0.0, 0.0), (0.3, 0.1, 0.1))])
        ray = Ray(np.array([-2.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]))
        segs = occupied_segments(scene, ray)
        assert len(segs) == 1
        t0, t1 = segs[0]
        # the merged cell run must cover the solid's analytic interval
        assert t0 <= 2.0 - 0.3 + 1e-9
        assert t1 >= 2.0 + 0.3 - 1e-9

    def test_two_solids_two_segments(self):
        scene = bake([
            box((-0.5, 0.0, 0.0), (0.1, 0.1, 0.1)),
            box((0.5, 0.0, 0.0), (0.1, 0.1, 0.1)),
        ])
        ray = Ray(np.array([-2.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]))
        segs = occupied_segments(scene, ray)
        assert len(segs) == 2
        assert segs[0][1] < segs[1][0]

    def test_segments_sorted_disjoint(self):
        scene = bake([
            sphere((0.0, 0.0, 0.0), 0.2),
            box((0.4, 0.4, 0.0), (0.1, 0.1, 0.3)),
        ])
        rng = np.random.default_rng(4)
        for _ in range(50):
            origin = rng.uniform(-2, 2, size=3)
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            segs = occupied_segments(scene, Ray(origin, d))
            for (a0, a1), (b0, b1) in zip(segs, segs[1:]):
                assert a0 < a1
                assert a1 < b0

    def test_segments_cover_all_density_on_ray(self):
        """Any sample point with nonzero density must fall inside a segment."""
        scene = bake([
            sphere((0.1, -0.1, 0.0), 0.25),
            cylinder((-0.3, 0.2, 0.1), 0.15, 0.3),
        ])
        rng = np.random.default_rng(5)
        for _ in range(40):
            origin = rng.uniform(-1.8, 1.8, size=3)
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            segs = occupied_segments(scene, Ray(origin, d))
            ts = np.linspace(0.0, 4.0, 600)
            pts = origin[None, :] + ts[:, None] * d[None, :]
            sig, _ = query_many(scene, pts)
            for t, s in zip(ts, sig):
                if s > 0.0:
                    assert any(a <= t <= b for a, b in segs)

    def test_segment_interiors_are_occupied_cells(self):
        scene = bake([sphere((0.0, 0.0, 0.0), 0.3)])
        ray = Ray(np.array([-2.0, 0.05, 0.02]), np.array([1.0, 0.0, 0.0]))
        cell = 2.0 * scene.bounds / scene.coarse_res
        for a, b in occupied_segments(scene, ray):
            mid = np.array(ray.origin) + 0.5 * (a + b) * np.array(ray.direction)
            gi = np.floor((mid + scene.bounds) / cell).astype(int)
            assert scene.coarse_occ[gi[0], gi[1], gi[2]]
