"""Volume rendering of voxel scenes by ray marching.

Sample positions live on a global t-grid t_k = (k + 0.5) * delta shared by
every ray, where delta = 1 / samples_per_unit.  Because skipped samples
carry exactly zero density, marching only the samples inside occupied
coarse cells accumulates bit-identical transmittance and color to marching
every sample in the bounding cube; both paths use strictly sequential
prefix sums to keep that equivalence exact.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraPose, Viewpoint, pose_from_viewpoint, rays_for_pose
from .scene import VoxelScene

THREADS_ENV = "WATCHFORGE_THREADS"
_CHUNK = 4096


@dataclass(frozen=True)
class RenderConfig:
    samples_per_unit: int = 128
    background: tuple[float, float, float] = (1.0, 1.0, 1.0)
    width: int = 64
    height: int = 64

    def __post_init__(self) -> None:
        if self.samples_per_unit < 8:
            raise ValueError("samples_per_unit must be >= 8")
        if self.width < 8 or self.height < 8:
            raise ValueError("image dimensions must be >= 8")
        if any(not 0.0 <= c <= 1.0 for c in self.background):
            raise ValueError("background channels must lie in [0, 1]")


@dataclass(frozen=True)
class RenderedImage:
    pixels: np.ndarray = field(repr=False)
    viewpoint: Viewpoint | None
    pose: CameraPose

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8 or px.ndim != 3 or px.shape[2] != 3:
            raise ValueError("pixels must be an (H, W, 3) uint8 array")
        if px.shape[:2] != (self.pose.height, self.pose.width):
            raise ValueError("pixel dimensions disagree with the pose intrinsics")
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)


def _clip_to_box(
    origins: np.ndarray, dirs: np.ndarray, box_lo: np.ndarray, box_hi: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-ray (entry, exit) parameters against an axis-aligned box; entry is
    clamped to 0 and exit <= entry marks a miss."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t_a = (box_lo - origins) / dirs
        t_b = (box_hi - origins) / dirs
    zero = dirs == 0.0
    inside = (origins >= box_lo) & (origins <= box_hi)
    lo = np.where(zero, np.where(inside, -np.inf, np.inf), np.minimum(t_a, t_b))
    hi = np.where(zero, np.where(inside, np.inf, -np.inf), np.maximum(t_a, t_b))
    t0 = np.maximum(lo.max(axis=1), 0.0)
    t1 = hi.min(axis=1)
    return t0, t1


def _gather_voxels(
    scene: VoxelScene, gi: np.ndarray, active: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Fetch (sigma, rgb) for the active entries of an (N, K, 3) fine-index
    array; inactive entries stay exactly zero."""
    n, k = active.shape
    sigma = np.zeros((n, k), dtype=np.float64)
    rgb = np.zeros((n, k, 3), dtype=np.float64)
    w = np.nonzero(active)
    if w[0].size:
        g = gi[w]
        c = g // scene.fine_res
        f = g - c * scene.fine_res
        slots = scene.fine_slot[c[:, 0], c[:, 1], c[:, 2]]
        sigma[w] = scene.fine_sigma[slots, f[:, 0], f[:, 1], f[:, 2]]
        rgb[w] = scene.fine_rgb[slots, f[:, 0], f[:, 1], f[:, 2]]
    return sigma, rgb


def _accumulate(
    sigma: np.ndarray, rgb: np.ndarray, delta: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Front-to-back quadrature along axis 1 using sequential prefix sums.
    Returns (color sum, weight sum, end transmittance)."""
    n = sigma.shape[0]
    if sigma.shape[1] == 0:
        return np.zeros((n, 3)), np.zeros(n), np.ones(n)
    depth = sigma * delta
    cum = np.cumsum(depth, axis=1)
    before = np.concatenate([np.zeros((n, 1)), cum[:, :-1]], axis=1)
    weight = np.exp(-before) * (1.0 - np.exp(-depth))
    weight_sum = np.cumsum(weight, axis=1)[:, -1]
    color = np.cumsum(weight[:, :, None] * rgb, axis=1)[:, -1, :]
    t_end = np.exp(-cum[:, -1])
    return color, weight_sum, t_end


def march_rays(
    scene: VoxelScene,
    origins: np.ndarray,
    dirs: np.ndarray,
    cfg: RenderConfig,
    skip_empty: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """March (N, 3) rays through the scene.  Returns per-ray accumulated
    color (without background), weight sum, and end-to-end transmittance.

    skip_empty=False marches every grid sample inside the bounding cube;
    skip_empty=True first clips each ray to the padded occupied-cell box and
    compacts it to the samples inside occupied coarse cells.  Skipped samples
    carry exactly zero density, so the two produce bit-identical results.
    """
    o = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    d = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    n = o.shape[0]
    spp = float(cfg.samples_per_unit)
    delta = 1.0 / spp
    b = scene.bounds
    res = scene.fine_grid_res

    if skip_empty:
        box_lo, box_hi = scene.occ_lo, scene.occ_hi
    else:
        box_lo = np.array([-b, -b, -b])
        box_hi = np.array([b, b, b])
    t0, t1 = _clip_to_box(o, d, box_lo, box_hi)
    kk0 = np.ceil(t0 * spp - 0.5)
    kk1 = np.floor(t1 * spp - 0.5)
    ok = (t1 > t0) & np.isfinite(kk0) & np.isfinite(kk1)
    k0 = np.where(ok, kk0, 0.0).astype(np.int64)
    k1 = np.where(ok, kk1, -1.0).astype(np.int64)
    count = np.maximum(k1 - k0 + 1, 0)

    color = np.zeros((n, 3), dtype=np.float64)
    wsum = np.zeros(n, dtype=np.float64)
    t_end = np.ones(n, dtype=np.float64)
    rows = np.flatnonzero(count > 0)
    if rows.size == 0:
        return color, wsum, t_end

    k_max = int(count[rows].max())
    ks = k0[rows][:, None] + np.arange(k_max, dtype=np.int64)[None, :]
    valid = ks <= k1[rows][:, None]
    t = (ks.astype(np.float64) + 0.5) * delta
    pts = o[rows][:, None, :] + d[rows][:, None, :] * t[:, :, None]

    gi = np.floor((pts + b) * (res / (2.0 * b))).astype(np.int64)
    in_cube = ((gi >= 0) & (gi < res)).all(axis=-1)
    gi = np.clip(gi, 0, res - 1)
    ci = gi // scene.fine_res
    occupied = scene.coarse_occ[ci[..., 0], ci[..., 1], ci[..., 2]]
    active = occupied & in_cube & valid

    if skip_empty:
        order = np.argsort(~active, axis=1, kind="stable")
        k_active = int(active.sum(axis=1).max())
        take = order[:, :k_active]
        active = np.take_along_axis(active, take, axis=1)
        gi = np.take_along_axis(gi, take[:, :, None], axis=1)

    sigma, rgb = _gather_voxels(scene, gi, active)
    c, w, te = _accumulate(sigma, rgb, delta)
    color[rows] = c
    wsum[rows] = w
    t_end[rows] = te
    return color, wsum, t_end


def render(
    scene: VoxelScene,
    pose: CameraPose,
    cfg: RenderConfig,
    viewpoint: Viewpoint | None = None,
    skip_empty: bool = True,
) -> RenderedImage:
    """Render one image.  Pixel color is the accumulated sample color plus
    the residual background weight, quantized round-half-up to 8 bits."""
    if (pose.width, pose.height) != (cfg.width, cfg.height):
        raise ValueError(
            f"pose intrinsics {pose.width}x{pose.height} do not match "
            f"config {cfg.width}x{cfg.height}"
        )
    origins, dirs = rays_for_pose(pose)
    o = origins.reshape(-1, 3)
    d = dirs.reshape(-1, 3)
    n = o.shape[0]

    color = np.empty((n, 3), dtype=np.float64)
    wsum = np.empty(n, dtype=np.float64)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        c, w, _ = march_rays(scene, o[lo:hi], d[lo:hi], cfg, skip_empty=skip_empty)
        color[lo:hi] = c
        wsum[lo:hi] = w

    bg = np.asarray(cfg.background, dtype=np.float64)
    final = color + (1.0 - wsum)[:, None] * bg
    quant = np.clip(np.floor(final * 255.0 + 0.5), 0, 255).astype(np.uint8)
    return RenderedImage(
        pixels=quant.reshape(cfg.height, cfg.width, 3),
        viewpoint=viewpoint,
        pose=pose,
    )


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit argument, else the WATCHFORGE_THREADS
    environment variable, else the CPU count."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env is not None:
            try:
                threads = int(env)
            except ValueError:
                raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}")
        else:
            threads = os.cpu_count() or 1
    return max(1, min(64, threads))


def render_set(
    scene: VoxelScene,
    viewpoints: list[Viewpoint],
    cfg: RenderConfig,
    focal: float = 64.0,
    threads: int | None = None,
    skip_empty: bool = True,
) -> list[RenderedImage]:
    """Render one image per viewpoint, preserving order.  Images are
    mutually independent, so the result does not depend on the worker
    count."""
    if not viewpoints:
        raise ValueError("no viewpoints to render")

    def one(v: Viewpoint) -> RenderedImage:
        pose = pose_from_viewpoint(v, focal=focal, width=cfg.width, height=cfg.height)
        return render(scene, pose, cfg, viewpoint=v, skip_empty=skip_empty)

    workers = resolve_threads(threads)
    if workers == 1 or len(viewpoints) == 1:
        return [one(v) for v in viewpoints]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(one, viewpoints))
