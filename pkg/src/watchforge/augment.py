"""In-plane augmentation and composite-scene synthesis.

Object patches are cut from renders together with a thresholded object
mask; compositing overwrites background pixels only where the mask is
true, so an empty mask leaves the background byte-identical.  All
randomness derives from the seed in the spec; sample i of a synthesis run
gets its own child seed, which keeps the mapping stable however the work
is scheduled.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Viewpoint
from .imgproc import PixelBox, bbox, close, gray, round_half_up
from .labelgen import Annotation
from .render import RenderedImage

log = logging.getLogger(__name__)

_FUSE_RETRIES = 10


class PlacementError(ValueError):
    """Placement would put the patch outside the background."""


class RejectedSampleError(RuntimeError):
    """The transformed box left the image entirely."""


@dataclass(frozen=True)
class AugmentSpec:
    shift_range: float = 0.25
    scale_range: tuple[float, float] = (0.5, 1.5)
    background_color_random: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.shift_range < 0:
            raise ValueError("shift_range must be >= 0")
        lo, hi = self.scale_range
        if lo <= 0 or hi < lo:
            raise ValueError("scale_range must satisfy 0 < min <= max")


@dataclass(frozen=True)
class Rect:
    """Cut-out object patch: pixels plus a boolean object mask."""

    patch: np.ndarray = field(repr=False)
    mask: np.ndarray = field(repr=False)
    source_viewpoint: Viewpoint | None

    def __post_init__(self) -> None:
        if self.patch.shape[:2] != self.mask.shape:
            raise ValueError("patch and mask dimensions disagree")


@dataclass(frozen=True)
class Placement:
    """Top-left corner (x, y) in background pixels and a patch scale."""

    x: int
    y: int
    scale: float

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ValueError("scale must be > 0")


@dataclass(frozen=True)
class CompositeSample:
    image: np.ndarray = field(repr=False)
    box: PixelBox | None
    source_viewpoint: Viewpoint | None

    def __post_init__(self) -> None:
        if self.box is not None:
            h, w = self.image.shape[:2]
            b = self.box
            if b.x_min < 0 or b.y_min < 0 or b.x_max >= w or b.y_max >= h:
                raise ValueError(f"box {b} outside {w}x{h} image")


def _nearest_indices(n_out: int, n_src: int) -> np.ndarray:
    """Source row/column index per output position for nearest resampling."""
    return np.minimum(
        (np.floor((np.arange(n_out) + 0.5) * n_src / n_out)).astype(np.int64),
        n_src - 1,
    )


def _map_box(box: PixelBox, s: float, dx: float, dy: float, cx: float, cy: float,
             width: int, height: int) -> PixelBox | None:
    """Pixel box under x' = cx + s*(x - cx) + dx, matching the nearest
    resample exactly: an output pixel shows the box iff its center falls
    inside the forward-mapped half-open pixel span."""
    e = lambda v, c, d: c + s * (v - c) + d
    x0 = math.ceil(e(box.x_min - 0.5, cx, dx))
    x1 = math.ceil(e(box.x_max + 0.5, cx, dx)) - 1
    y0 = math.ceil(e(box.y_min - 0.5, cy, dy))
    y1 = math.ceil(e(box.y_max + 0.5, cy, dy)) - 1
    x0, y0 = max(x0, 0), max(y0, 0)
    x1, y1 = min(x1, width - 1), min(y1, height - 1)
    if x0 > x1 or y0 > y1:
        return None
    return PixelBox(x0, y0, x1, y1)


def augment_simple(img: RenderedImage, ann: Annotation, spec: AugmentSpec) -> CompositeSample:
    """Shift and scale the whole image about its center, exposing a solid
    background color where the source leaves the frame.  Draw order from the
    seed: scale, shift x, shift y, then background RGB when randomized."""
    if not ann.valid or ann.box is None:
        raise ValueError("annotation must be valid")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    lo, hi = spec.scale_range
    s = lo + (hi - lo) * rng.random()
    h, w = img.pixels.shape[:2]
    dx = (2.0 * rng.random() - 1.0) * spec.shift_range * w
    dy = (2.0 * rng.random() - 1.0) * spec.shift_range * h
    if spec.background_color_random:
        bg = np.minimum((rng.random(3) * 256).astype(np.uint8), 255)
    else:
        bg = np.array([255, 255, 255], dtype=np.uint8)

    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    xs = np.floor((np.arange(w) - cx - dx) / s + cx + 0.5).astype(np.int64)
    ys = np.floor((np.arange(h) - cy - dy) / s + cy + 0.5).astype(np.int64)
    x_ok = (xs >= 0) & (xs < w)
    y_ok = (ys >= 0) & (ys < h)
    out = np.empty_like(img.pixels)
    out[:] = bg
    if x_ok.any() and y_ok.any():
        sub = img.pixels[np.ix_(ys[y_ok], xs[x_ok])]
        out[np.ix_(np.flatnonzero(y_ok), np.flatnonzero(x_ok))] = sub

    box = _map_box(ann.box, s, dx, dy, cx, cy, w, h)
    if box is None:
        raise RejectedSampleError("transformed box left the image")
    return CompositeSample(image=out, box=box, source_viewpoint=img.viewpoint)


def cut_rect(img: RenderedImage, box: PixelBox, t_single_factor: float = 0.9) -> Rect:
    """Copy the box region and derive its object mask: pixels of the closed
    grayscale image darker than t_single_factor of the image maximum."""
    h, w = img.pixels.shape[:2]
    if box.x_min < 0 or box.y_min < 0 or box.x_max >= w or box.y_max >= h:
        raise ValueError(f"box {box} outside {w}x{h} image")
    g = gray(img.pixels)
    t = round_half_up(t_single_factor * int(g.max()))
    cleaned = close(g, 3)
    mask_full = cleaned < t
    sl = (slice(box.y_min, box.y_max + 1), slice(box.x_min, box.x_max + 1))
    return Rect(
        patch=img.pixels[sl].copy(),
        mask=mask_full[sl].copy(),
        source_viewpoint=img.viewpoint,
    )


def fuse(rect: Rect, background: np.ndarray, placement: Placement) -> CompositeSample:
    """Paste the scaled patch onto a copy of the background, overwriting
    pixels only where the scaled mask is true.  The ground-truth box is the
    tight box of the placed mask, absent when the mask is empty."""
    bg = np.asarray(background)
    if bg.ndim != 3 or bg.shape[2] != 3:
        raise ValueError("background must be an (H, W, 3) image")
    bh, bw = bg.shape[:2]
    ph, pw = rect.mask.shape
    sh = max(1, round_half_up(ph * placement.scale))
    sw = max(1, round_half_up(pw * placement.scale))
    if placement.x < 0 or placement.y < 0 or placement.x + sw > bw or placement.y + sh > bh:
        raise PlacementError(
            f"patch {sw}x{sh} at ({placement.x}, {placement.y}) exceeds {bw}x{bh} background"
        )

    rows = _nearest_indices(sh, ph)
    cols = _nearest_indices(sw, pw)
    patch_s = rect.patch[np.ix_(rows, cols)]
    mask_s = rect.mask[np.ix_(rows, cols)]

    out = bg.copy()
    region = out[placement.y : placement.y + sh, placement.x : placement.x + sw]
    region[mask_s] = patch_s[mask_s]

    placed = bbox(mask_s.astype(np.uint8) * 255)
    box = None
    if placed is not None:
        box = PixelBox(
            placed.x_min + placement.x,
            placed.y_min + placement.y,
            placed.x_max + placement.x,
            placed.y_max + placement.y,
        )
    return CompositeSample(image=out, box=box, source_viewpoint=rect.source_viewpoint)


def synthesize_checking_set(
    pairs: list[tuple[RenderedImage, Annotation]],
    backgrounds: list[np.ndarray],
    n: int,
    spec: AugmentSpec,
) -> list[CompositeSample]:
    """Draw n composites over (source image, background, placement).  Sample
    i is generated from the i-th spawned child of the seed, so results do
    not depend on evaluation order.  Per attempt the draw order is: source
    index, background index, scale, x, y."""
    usable = [(im, ann) for im, ann in pairs if ann.valid and ann.box is not None]
    if not usable:
        raise ValueError("no valid annotations to cut from")
    if not backgrounds:
        raise ValueError("no backgrounds")

    rects: dict[int, Rect] = {}
    children = np.random.SeedSequence(spec.seed).spawn(n)
    out: list[CompositeSample] = []
    skipped = 0
    lo, hi = spec.scale_range
    for child in children:
        rng = np.random.Generator(np.random.PCG64(child))
        sample = None
        for _ in range(_FUSE_RETRIES):
            si = int(rng.integers(len(usable)))
            bi = int(rng.integers(len(backgrounds)))
            if si not in rects:
                im, ann = usable[si]
                rects[si] = cut_rect(im, ann.box)
            rect = rects[si]
            bg = backgrounds[bi]
            bh, bw = bg.shape[:2]
            s = lo + (hi - lo) * rng.random()
            sh = max(1, round_half_up(rect.mask.shape[0] * s))
            sw = max(1, round_half_up(rect.mask.shape[1] * s))
            if sw > bw or sh > bh:
                continue
            x = int(rng.integers(0, bw - sw + 1))
            y = int(rng.integers(0, bh - sh + 1))
            candidate = fuse(rect, bg, Placement(x, y, s))
            if candidate.box is not None:
                sample = candidate
                break
        if sample is None:
            skipped += 1
        else:
            out.append(sample)
    if skipped:
        log.warning("skipped %d of %d composite samples after retries", skipped, n)
    return out
