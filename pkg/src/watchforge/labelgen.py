"""Bounding-box label synthesis from rendered view sets.

The occupied region is the foreground box of the mean image over all
views: pixels the object covers often enough to darken the average below
a fraction of the blurred maximum.  Per-image boxes are then extracted by
closing the grayscale image with growing kernels until the thresholded
foreground box overlaps the occupied region strongly enough.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Viewpoint
from .imgproc import PixelBox, bbox, binarize, close, gauss, gray, round_half_up
from .render import RenderedImage


class LabelError(RuntimeError):
    """Raised when the view set yields no usable occupied region."""


@dataclass(frozen=True)
class LabelGenConfig:
    t_occ_factor: float = 0.95
    t_single_factor: float = 0.9
    t_rect: float = 0.75
    kernel_start: int = 3
    kernel_step: int = 2
    kernel_max: int = 31

    def __post_init__(self) -> None:
        if not (0.0 < self.t_occ_factor < 1.0 and 0.0 < self.t_single_factor < 1.0):
            raise ValueError("threshold factors must lie strictly between 0 and 1")
        if not 0.0 <= self.t_rect < 1.0:
            raise ValueError("t_rect must lie in [0, 1)")
        if self.kernel_start % 2 == 0 or self.kernel_max % 2 == 0:
            raise ValueError("kernel bounds must be odd")
        if self.kernel_step < 2 or self.kernel_step % 2 != 0:
            raise ValueError("kernel_step must be a positive even number")
        if self.kernel_start < 1 or self.kernel_start > self.kernel_max:
            raise ValueError("kernel_start must lie in [1, kernel_max]")

    def kernels(self) -> range:
        return range(self.kernel_start, self.kernel_max + 1, self.kernel_step)


@dataclass(frozen=True)
class Annotation:
    viewpoint: Viewpoint | None
    box: PixelBox | None
    valid: bool
    kernel_used: int | None = None

    def __post_init__(self) -> None:
        if self.valid != (self.box is not None):
            raise ValueError("valid annotations carry a box, invalid ones do not")
        if self.valid and self.kernel_used is None:
            raise ValueError("valid annotations record the kernel that produced them")


def _mean_image(images: list[RenderedImage]) -> np.ndarray:
    first = images[0].pixels
    acc = np.zeros(first.shape, dtype=np.float64)
    for im in images:
        if im.pixels.shape != first.shape:
            raise ValueError("images must share dimensions")
        acc += im.pixels
    mean = acc / len(images)
    return np.clip(np.floor(mean + 0.5), 0, 255).astype(np.uint8)


def occupied_threshold(images: list[RenderedImage], cfg: LabelGenConfig) -> int:
    """Binarization threshold for the mean image: round(t_occ_factor * max
    of the blurred grayscale mean)."""
    blurred = gauss(gray(_mean_image(images)))
    return round_half_up(cfg.t_occ_factor * int(blurred.max()))


def occupied_region(images: list[RenderedImage], cfg: LabelGenConfig) -> PixelBox:
    """Foreground bounding box of the mean image over all views."""
    if not images:
        raise ValueError("need at least one image")
    blurred = gauss(gray(_mean_image(images)))
    t = round_half_up(cfg.t_occ_factor * int(blurred.max()))
    box = bbox(binarize(blurred, t))
    if box is None:
        raise LabelError("empty occupied region")
    return box


def rect_region(image: RenderedImage, occ: PixelBox, cfg: LabelGenConfig) -> Annotation:
    """Per-image box: close with growing kernels until the thresholded
    foreground box overlaps occ by more than t_rect of its own area."""
    g = gray(image.pixels)
    t = round_half_up(cfg.t_single_factor * int(g.max()))
    for kernel in cfg.kernels():
        candidate = bbox(binarize(close(g, kernel), t))
        if candidate is None:
            break
        inter = candidate.intersect(occ)
        ratio = (inter.area() if inter else 0) / candidate.area()
        if ratio > cfg.t_rect:
            return Annotation(image.viewpoint, candidate, True, kernel)
    return Annotation(image.viewpoint, None, False, None)


def annotate_set(
    images: list[RenderedImage], cfg: LabelGenConfig
) -> tuple[PixelBox, list[Annotation]]:
    """Occupied region over the whole set, then one annotation per image."""
    occ = occupied_region(images, cfg)
    return occ, [rect_region(im, occ, cfg) for im in images]
