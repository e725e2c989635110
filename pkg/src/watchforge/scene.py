"""Procedural object description and a two-level voxel cache.

A scene is baked from primitive solids (boxes, spheres, z-axis cylinders)
into a coarse occupancy grid whose occupied cells own dense fine subgrids
of (density, color) voxels.  Lookups are nearest-voxel: a point maps to
the fine voxel containing it.  The coarse level answers "can anything be
here" cheaply, which is what makes empty-space skipping lossless.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Ray


class Shape(enum.Enum):
    BOX = "box"
    SPHERE = "sphere"
    CYLINDER = "cylinder"


class BakeError(ValueError):
    pass


_DIMS_ARITY = {Shape.BOX: 3, Shape.SPHERE: 1, Shape.CYLINDER: 2}


@dataclass(frozen=True)
class Primitive:
    """One solid: dims is (hx, hy, hz) half-extents for a box, (radius,)
    for a sphere, (radius, height) for a cylinder whose axis is +z."""

    shape: Shape
    center: tuple[float, float, float]
    dims: tuple[float, ...]
    color: tuple[float, float, float]
    density: float

    def __post_init__(self) -> None:
        if len(self.center) != 3:
            raise ValueError("center must have 3 components")
        if len(self.dims) != _DIMS_ARITY[self.shape]:
            raise ValueError(
                f"{self.shape.value} needs {_DIMS_ARITY[self.shape]} dims, got {len(self.dims)}"
            )
        if any(d <= 0 for d in self.dims):
            raise ValueError("all extents must be > 0")
        if any(not 0.0 <= c <= 1.0 for c in self.color):
            raise ValueError("color channels must lie in [0, 1]")
        if not math.isfinite(self.density) or self.density < 0:
            raise ValueError("density must be finite and >= 0")

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Boolean containment mask for an (..., 3) array of points.
        Boundaries count as inside."""
        p = np.asarray(pts, dtype=np.float64)
        c = np.asarray(self.center, dtype=np.float64)
        d = p - c
        if self.shape is Shape.BOX:
            h = np.asarray(self.dims, dtype=np.float64)
            return (np.abs(d) <= h).all(axis=-1)
        if self.shape is Shape.SPHERE:
            r = self.dims[0]
            return (d**2).sum(axis=-1) <= r * r
        r, h = self.dims
        radial = d[..., 0] ** 2 + d[..., 1] ** 2 <= r * r
        return radial & (np.abs(d[..., 2]) <= h / 2.0)

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=np.float64)
        if self.shape is Shape.BOX:
            h = np.asarray(self.dims, dtype=np.float64)
        elif self.shape is Shape.SPHERE:
            h = np.full(3, self.dims[0])
        else:
            r, hh = self.dims
            h = np.array([r, r, hh / 2.0])
        return c - h, c + h

    def max_radius(self) -> float:
        """Largest distance from the world origin to any point of the solid."""
        c = np.asarray(self.center, dtype=np.float64)
        if self.shape is Shape.SPHERE:
            return float(np.linalg.norm(c)) + self.dims[0]
        if self.shape is Shape.BOX:
            h = np.asarray(self.dims, dtype=np.float64)
            # farthest corner: push each coordinate away from the origin
            far = np.abs(c) + h
            return float(np.linalg.norm(far))
        r, h = self.dims
        rho = math.hypot(c[0], c[1]) + r
        z = abs(c[2]) + h / 2.0
        return math.hypot(rho, z)


@dataclass(frozen=True)
class VoxelScene:
    """Baked two-level cache.  coarse_occ/coarse_max index coarse cells;
    fine_slot maps an occupied cell to a row of fine_sigma/fine_rgb.
    occ_lo/occ_hi bound the occupied cells, padded by half a fine voxel,
    so no point outside that box can carry density."""

    bounds: float
    coarse_res: int
    fine_res: int
    coarse_occ: np.ndarray = field(repr=False)
    coarse_max: np.ndarray = field(repr=False)
    fine_slot: np.ndarray = field(repr=False)
    fine_sigma: np.ndarray = field(repr=False)
    fine_rgb: np.ndarray = field(repr=False)
    occ_lo: np.ndarray = field(repr=False)
    occ_hi: np.ndarray = field(repr=False)

    @property
    def fine_grid_res(self) -> int:
        return self.coarse_res * self.fine_res

    @property
    def n_occupied(self) -> int:
        return int(self.fine_sigma.shape[0])


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def bake(
    primitives: list[Primitive],
    coarse_res: int = 64,
    fine_res: int = 8,
    bounds: float = 1.0,
) -> VoxelScene:
    """Sample the primitive union onto the fine grid and derive the coarse
    occupancy.  Where solids overlap, the highest density wins and ties keep
    the earliest primitive's color."""
    if not primitives:
        raise BakeError("no primitives to bake")
    if coarse_res < 2 or fine_res < 2:
        raise BakeError("resolutions must be >= 2")
    if bounds <= 0:
        raise BakeError("bounds must be > 0")
    offenders = [p for p in primitives if p.max_radius() >= bounds]
    if offenders:
        names = ", ".join(f"{p.shape.value}@{p.center}" for p in offenders)
        raise BakeError(f"primitives reach outside the radius-{bounds} sphere: {names}")

    res = coarse_res * fine_res
    voxel = 2.0 * bounds / res

    # working block: the union of primitive AABBs, widened to whole coarse cells
    lo = np.full(3, np.inf)
    hi = np.full(3, -np.inf)
    for p in primitives:
        a, b = p.aabb()
        lo = np.minimum(lo, a)
        hi = np.maximum(hi, b)
    lo_idx = np.clip(np.floor((lo + bounds) / voxel).astype(int), 0, res - 1)
    hi_idx = np.clip(np.floor((hi + bounds) / voxel).astype(int), 0, res - 1)
    lo_cell = lo_idx // fine_res
    hi_cell = hi_idx // fine_res
    v0 = lo_cell * fine_res
    v1 = (hi_cell + 1) * fine_res  # exclusive
    nx, ny, nz = (v1 - v0).astype(int)

    sigma = np.zeros((nx, ny, nz), dtype=np.float64)
    rgb = np.zeros((nx, ny, nz, 3), dtype=np.float64)
    axes = [
        -bounds + (np.arange(v0[i], v1[i], dtype=np.float64) + 0.5) * voxel
        for i in range(3)
    ]

    for p in primitives:
        a, b = p.aabb()
        s = []
        for i in range(3):
            i0 = max(int(np.floor((a[i] + bounds) / voxel)) - v0[i], 0)
            i1 = min(int(np.floor((b[i] + bounds) / voxel)) - v0[i] + 1, int(v1[i] - v0[i]))
            s.append(slice(i0, i1))
        xs, ys, zs = (axes[i][s[i]] for i in range(3))
        pts = np.stack(np.meshgrid(xs, ys, zs, indexing="ij"), axis=-1)
        mask = p.contains(pts)
        sig_view = sigma[s[0], s[1], s[2]]
        rgb_view = rgb[s[0], s[1], s[2]]
        take = mask & (p.density > sig_view)
        sig_view[take] = p.density
        rgb_view[take] = p.color

    f = fine_res
    ncx, ncy, ncz = nx // f, ny // f, nz // f
    cells_sig = sigma.reshape(ncx, f, ncy, f, ncz, f).transpose(0, 2, 4, 1, 3, 5)
    cells_rgb = rgb.reshape(ncx, f, ncy, f, ncz, f, 3).transpose(0, 2, 4, 1, 3, 5, 6)
    cell_max = cells_sig.max(axis=(3, 4, 5))
    occ_sub = cell_max > 0.0

    coarse_occ = np.zeros((coarse_res,) * 3, dtype=bool)
    coarse_max = np.zeros((coarse_res,) * 3, dtype=np.float64)
    fine_slot = np.full((coarse_res,) * 3, -1, dtype=np.int32)

    cx, cy, cz = np.nonzero(occ_sub)
    gx, gy, gz = cx + lo_cell[0], cy + lo_cell[1], cz + lo_cell[2]
    coarse_occ[gx, gy, gz] = True
    coarse_max[gx, gy, gz] = cell_max[cx, cy, cz]
    fine_slot[gx, gy, gz] = np.arange(cx.size, dtype=np.int32)
    fine_sigma = np.ascontiguousarray(cells_sig[cx, cy, cz])
    fine_rgb = np.ascontiguousarray(cells_rgb[cx, cy, cz])

    if cx.size:
        # Pad by half a fine voxel so boundary samples cannot be culled.
        cell = voxel * fine_res
        gmin = np.array([gx.min(), gy.min(), gz.min()], dtype=np.float64)
        gmax = np.array([gx.max(), gy.max(), gz.max()], dtype=np.float64)
        occ_lo = np.maximum(-bounds + gmin * cell - 0.5 * voxel, -bounds)
        occ_hi = np.minimum(-bounds + (gmax + 1.0) * cell + 0.5 * voxel, bounds)
    else:
        occ_lo = np.zeros(3, dtype=np.float64)
        occ_hi = np.zeros(3, dtype=np.float64)

    return VoxelScene(
        bounds=float(bounds),
        coarse_res=int(coarse_res),
        fine_res=int(fine_res),
        coarse_occ=_freeze(coarse_occ),
        coarse_max=_freeze(coarse_max),
        fine_slot=_freeze(fine_slot),
        fine_sigma=_freeze(fine_sigma),
        fine_rgb=_freeze(fine_rgb),
        occ_lo=_freeze(occ_lo),
        occ_hi=_freeze(occ_hi),
    )


def query_many(scene: VoxelScene, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (sigma, rgb) lookup for an (N, 3) array of points.
    Out-of-bounds points and coarse-empty cells yield (0, black)."""
    p = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    res = scene.fine_grid_res
    gi = np.floor((p + scene.bounds) * (res / (2.0 * scene.bounds))).astype(np.int64)
    inside = ((gi >= 0) & (gi < res)).all(axis=-1)
    gi_safe = np.clip(gi, 0, res - 1)
    ci = gi_safe // scene.fine_res
    slot = scene.fine_slot[ci[:, 0], ci[:, 1], ci[:, 2]]
    hit = inside & (slot >= 0)

    sigma = np.zeros(p.shape[0], dtype=np.float64)
    rgb = np.zeros((p.shape[0], 3), dtype=np.float64)
    if hit.any():
        fi = gi_safe[hit] - ci[hit] * scene.fine_res
        s = slot[hit]
        sigma[hit] = scene.fine_sigma[s, fi[:, 0], fi[:, 1], fi[:, 2]]
        rgb[hit] = scene.fine_rgb[s, fi[:, 0], fi[:, 1], fi[:, 2]]
    return sigma, rgb


def query(scene: VoxelScene, x) -> tuple[float, np.ndarray]:
    """Point lookup: (sigma, rgb) of the fine voxel containing x."""
    sigma, rgb = query_many(scene, np.asarray(x, dtype=np.float64).reshape(1, 3))
    return float(sigma[0]), rgb[0]


def _cube_clip(origin: np.ndarray, direction: np.ndarray, b: float) -> tuple[float, float] | None:
    """Entry/exit parameters of a ray against the cube [-b, b]^3, entry
    clamped to t >= 0, or None on a miss."""
    t0, t1 = -np.inf, np.inf
    for i in range(3):
        o, d = origin[i], direction[i]
        if d == 0.0:
            if not (-b <= o <= b):
                return None
            continue
        ta = (-b - o) / d
        tb = (b - o) / d
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
    t0 = max(t0, 0.0)
    if t0 >= t1:
        return None
    return float(t0), float(t1)


def occupied_segments(scene: VoxelScene, ray: Ray) -> list[tuple[float, float]]:
    """Sorted, non-overlapping t-intervals where the ray crosses occupied
    coarse cells.  Adjacent occupied cells merge into one interval, so the
    union covers every point along the ray that could carry density."""
    clip = _cube_clip(ray.origin, ray.direction, scene.bounds)
    if clip is None:
        return []
    t_enter, t_exit = clip
    b = scene.bounds
    n = scene.coarse_res
    cell_size = 2.0 * b / n
    o, d = ray.origin, ray.direction

    entry = o + t_enter * d
    cell = np.clip(np.floor((entry + b) / cell_size).astype(int), 0, n - 1)
    step = np.sign(d).astype(int)
    t_max = np.full(3, np.inf)
    t_delta = np.full(3, np.inf)
    for i in range(3):
        if d[i] != 0.0:
            nxt = cell[i] + (1 if step[i] > 0 else 0)
            t_max[i] = (-b + nxt * cell_size - o[i]) / d[i]
            t_delta[i] = cell_size / abs(d[i])

    out: list[tuple[float, float]] = []
    t_cur = t_enter
    while t_cur < t_exit:
        axis = int(np.argmin(t_max))
        t_next = min(float(t_max[axis]), t_exit)
        if scene.coarse_occ[cell[0], cell[1], cell[2]] and t_next > t_cur:
            if out and out[-1][1] == t_cur:
                out[-1] = (out[-1][0], t_next)
            else:
                out.append((t_cur, t_next))
        t_cur = float(t_max[axis])
        cell[axis] += step[axis]
        if not 0 <= cell[axis] < n:
            break
        t_max[axis] += t_delta[axis]
    return out
