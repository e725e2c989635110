"""Small image-processing kernel set: grayscale conversion, Gaussian blur,
thresholding, grayscale morphological close, and foreground bounding boxes.

Images are numpy uint8 arrays, (H, W) for single channel and (H, W, 3)
for RGB.  All border handling is clamp-to-edge replication.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


def round_half_up(x: float) -> int:
    """Round to nearest integer, ties away from zero-point-five upward."""
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class PixelBox:
    """Inclusive pixel-coordinate rectangle."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self) -> None:
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"inverted box {self}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    def area(self) -> int:
        """Pixel count covered by the box (inclusive coordinates)."""
        return self.width * self.height

    def intersect(self, other: "PixelBox") -> "PixelBox | None":
        x0 = max(self.x_min, other.x_min)
        y0 = max(self.y_min, other.y_min)
        x1 = min(self.x_max, other.x_max)
        y1 = min(self.y_max, other.y_max)
        if x0 > x1 or y0 > y1:
            return None
        return PixelBox(x0, y0, x1, y1)

    def to_list(self) -> list[int]:
        return [int(self.x_min), int(self.y_min), int(self.x_max), int(self.y_max)]


def _check_2d(img: np.ndarray) -> np.ndarray:
    a = np.asarray(img)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("expected a non-empty single-channel image")
    return a


def gray(rgb: np.ndarray) -> np.ndarray:
    """Convert an (H, W, 3) uint8 image to luma, round-half-up to uint8."""
    a = np.asarray(rgb)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) image")
    luma = 0.299 * a[..., 0] + 0.587 * a[..., 1] + 0.114 * a[..., 2]
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


def _gauss_kernel() -> np.ndarray:
    offs = np.arange(-2, 3, dtype=np.float64)
    g = np.exp(-0.5 * offs**2)
    k = np.outer(g, g)
    return k / k.sum()


_GAUSS_5X5 = _gauss_kernel()
_GAUSS_5X5.setflags(write=False)


def gauss(img: np.ndarray) -> np.ndarray:
    """5x5 Gaussian blur, sigma 1.0, clamp-to-edge borders, uint8 output."""
    a = _check_2d(img).astype(np.float64)
    out = ndimage.correlate(a, _GAUSS_5X5, mode="nearest")
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def binarize(img: np.ndarray, t: int) -> np.ndarray:
    """Mark pixels strictly below t as foreground (255), the rest 0."""
    a = _check_2d(img)
    return np.where(a < t, 255, 0).astype(np.uint8)


def close(img: np.ndarray, kernel: int) -> np.ndarray:
    """Grayscale morphological close (dilate then erode) with a square
    structuring element.  Removes dark features smaller than the kernel on a
    bright background; kernel 1 is the identity."""
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError(f"kernel must be odd and >= 1, got {kernel}")
    a = _check_2d(img)
    if kernel == 1:
        return a.copy()
    return ndimage.grey_closing(a, size=(kernel, kernel), mode="nearest")


def bbox(binary: np.ndarray) -> PixelBox | None:
    """Tight box over nonzero pixels, or None when the image is empty."""
    a = _check_2d(binary)
    cols = np.flatnonzero(a.any(axis=0))
    if cols.size == 0:
        return None
    rows = np.flatnonzero(a.any(axis=1))
    return PixelBox(int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1]))
