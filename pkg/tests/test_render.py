"""Ray marching against a scalar reference, conservation, and thread safety."""

from __future__ import annotations

import numpy as np
import pytest

from watchforge.geometry import Viewpoint, pose_from_viewpoint
from watchforge.render import (
    THREADS_ENV,
    RenderConfig,
    RenderedImage,
    march_rays,
    render,
    render_set,
    resolve_threads,
)
from watchforge.scene import Primitive, Shape, bake, query

from oracles import march_reference


@pytest.fixture(scope="module")
def small_scene():
    prims = [
        Primitive(Shape.BOX, (0.1, 0.0, -0.1), (0.25, 0.2, 0.1), (0.2, 0.3, 0.4), 30.0),
        Primitive(Shape.SPHERE, (-0.1, 0.1, 0.1), (0.2,), (0.8, 0.1, 0.1), 60.0),
    ]
    return bake(prims)


def random_rays(n, seed, spread=2.0):
    rng = np.random.default_rng(seed)
    origins = rng.uniform(-spread, spread, size=(n, 3))
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return origins, dirs


class TestRenderConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            RenderConfig(samples_per_unit=4)
        with pytest.raises(ValueError):
            RenderConfig(width=4)
        with pytest.raises(ValueError):
            RenderConfig(background=(1.5, 0.0, 0.0))


class TestRenderedImage:
    def test_validation(self):
        pose = pose_from_viewpoint(Viewpoint(0, 0, 2.5), width=8, height=8)
        good = np.zeros((8, 8, 3), dtype=np.uint8)
        img = RenderedImage(pixels=good, viewpoint=None, pose=pose)
        assert img.pixels.flags.writeable is False
        with pytest.raises(ValueError):
            RenderedImage(pixels=np.zeros((8, 8, 3), dtype=np.float64), viewpoint=None, pose=pose)
        with pytest.raises(ValueError):
            RenderedImage(pixels=np.zeros((9, 8, 3), dtype=np.uint8), viewpoint=None, pose=pose)


class TestMarchRays:
    def test_matches_scalar_reference(self, small_scene):
        cfg = RenderConfig()
        origins, dirs = random_rays(24, seed=0)
        color, wsum, t_end = march_rays(small_scene, origins, dirs, cfg)
        for i in range(24):
            ref_color, ref_wsum, ref_t = march_reference(
                lambda p: query(small_scene, p), origins[i], dirs[i],
                small_scene.bounds, cfg.samples_per_unit,
            )
            np.testing.assert_allclose(color[i], ref_color, rtol=1e-12, atol=1e-15)
            assert wsum[i] == pytest.approx(ref_wsum, rel=1e-12, abs=1e-15)
            assert t_end[i] == pytest.approx(ref_t, rel=1e-12)

    def test_dense_equals_skip(self, small_scene):
        cfg = RenderConfig()
        origins, dirs = random_rays(200, seed=1)
        c1, w1, t1 = march_rays(small_scene, origins, dirs, cfg, skip_empty=True)
        c2, w2, t2 = march_rays(small_scene, origins, dirs, cfg, skip_empty=False)
        np.testing.assert_array_equal(c1, c2)
        np.testing.assert_array_equal(w1, w2)
        np.testing.assert_array_equal(t1, t2)

    def test_conservation(self, small_scene):
        cfg = RenderConfig()
        origins, dirs = random_rays(500, seed=2)
        _, wsum, t_end = march_rays(small_scene, origins, dirs, cfg)
        np.testing.assert_allclose(wsum + t_end, 1.0, atol=1e-12)

    def test_missing_rays_keep_background(self, small_scene):
        cfg = RenderConfig()
        origins = np.array([[0.0, 3.0, 0.0]])
        dirs = np.array([[1.0, 0.0, 0.0]])
        color, wsum, t_end = march_rays(small_scene, origins, dirs, cfg)
        np.testing.assert_array_equal(color, 0.0)
        assert wsum[0] == 0.0
        assert t_end[0] == 1.0

    def test_weights_monotone_with_density(self):
        weak = bake([Primitive(Shape.SPHERE, (0, 0, 0), (0.3,), (0.5, 0.5, 0.5), 5.0)])
        strong = bake([Primitive(Shape.SPHERE, (0, 0, 0), (0.3,), (0.5, 0.5, 0.5), 50.0)])
        cfg = RenderConfig()
        origins = np.array([[-2.0, 0.0, 0.0]])
        dirs = np.array([[1.0, 0.0, 0.0]])
        _, w_weak, _ = march_rays(weak, origins, dirs, cfg)
        _, w_strong, _ = march_rays(strong, origins, dirs, cfg)
        assert 0.0 < w_weak[0] < w_strong[0] < 1.0


class TestRender:
    def test_dimensions_must_match_pose(self, small_scene):
        pose = pose_from_viewpoint(Viewpoint(0, 0, 2.5), width=32, height=32)
        with pytest.raises(ValueError):
            render(small_scene, pose, RenderConfig(width=64, height=64))

    def test_background_pixels_exact_white(self, small_scene):
        pose = pose_from_viewpoint(Viewpoint(0.0, 0.0, 2.5))
        img = render(small_scene, pose, RenderConfig())
        np.testing.assert_array_equal(img.pixels[0, 0], [255, 255, 255])

    def test_object_visible_at_center(self, small_scene):
        pose = pose_from_viewpoint(Viewpoint(0.0, 0.0, 2.5))
        img = render(small_scene, pose, RenderConfig())
        assert (img.pixels[28:36, 28:36] < 250).any()

    def test_repeat_renders_identical(self, small_scene):
        pose = pose_from_viewpoint(Viewpoint(33.0, 21.0, 2.5))
        a = render(small_scene, pose, RenderConfig())
        b = render(small_scene, pose, RenderConfig())
        np.testing.assert_array_equal(a.pixels, b.pixels)

    def test_zero_density_scene_is_pure_background(self):
        scene = bake([Primitive(Shape.BOX, (0, 0, 0), (0.3, 0.3, 0.3), (0.1, 0.1, 0.1), 0.0)])
        pose = pose_from_viewpoint(Viewpoint(10.0, 20.0, 2.5))
        img = render(scene, pose, RenderConfig())
        np.testing.assert_array_equal(img.pixels, 255)


class TestResolveThreads:
    def test_explicit_argument_wins(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "7")
        assert resolve_threads(3) == 3

    def test_env_variable(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "5")
        assert resolve_threads() == 5

    def test_bad_env_raises(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "many")
        with pytest.raises(ValueError):
            resolve_threads()

    def test_clamped(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert resolve_threads(0) == 1
        assert resolve_threads(1000) == 64


class TestRenderSet:
    def test_order_preserved(self, small_scene):
        vps = [Viewpoint(t, 15.0, 2.5) for t in (0.0, 45.0, 90.0, 135.0)]
        images = render_set(small_scene, vps, RenderConfig(), threads=1)
        assert [im.viewpoint.theta for im in images] == [0.0, 45.0, 90.0, 135.0]

    def test_thread_count_does_not_change_bytes(self, small_scene):
        vps = [Viewpoint(t, 30.0, 2.5) for t in range(0, 360, 45)]
        serial = render_set(small_scene, vps, RenderConfig(), threads=1)
        parallel = render_set(small_scene, vps, RenderConfig(), threads=4)
        for a, b in zip(serial, parallel):
            np.testing.assert_array_equal(a.pixels, b.pixels)

    def test_empty_viewpoints_rejected(self, small_scene):
        with pytest.raises(ValueError):
            render_set(small_scene, [], RenderConfig())
