"""Session fixtures: the locomotive fixture scene, a Loop-144 sweep over it,
and the synthesized annotations.  Renders run single-threaded so every test
sees the same bytes."""

from __future__ import annotations

from pathlib import Path

import pytest

from watchforge.dataset import load_scene
from watchforge.labelgen import LabelGenConfig, annotate_set
from watchforge.render import RenderConfig, render_set
from watchforge.sampling import StrategyKind, StrategySpec, generate
from watchforge.scene import bake

SCENE_PATH = Path(__file__).resolve().parent.parent / "scenes" / "locomotive.json"
GAMMA = 2.5


@pytest.fixture(scope="session")
def primitives():
    prims, _ = load_scene(SCENE_PATH)
    return prims


@pytest.fixture(scope="session")
def voxel_scene(primitives):
    return bake(primitives, bounds=1.0)


@pytest.fixture(scope="session")
def render_cfg():
    return RenderConfig()


@pytest.fixture(scope="session")
def loop_viewpoints():
    spec = StrategySpec(kind=StrategyKind.LOOP, gamma=GAMMA, theta_step=10.0, phi_step=30.0)
    return generate(spec)


@pytest.fixture(scope="session")
def loop_renders(voxel_scene, loop_viewpoints, render_cfg):
    return render_set(voxel_scene, loop_viewpoints, render_cfg, threads=1)


@pytest.fixture(scope="session")
def loop_labels(loop_renders):
    """(occupied region, annotations) for the Loop-144 render set."""
    return annotate_set(loop_renders, LabelGenConfig())
