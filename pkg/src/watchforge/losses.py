"""Scalar losses for pose and box regression plus pixel MSE.

The pose loss treats (theta, phi) as the width and height of a rectangle
anchored at the origin and scores one minus their rectangle IoU.  Azimuth
wraparound is intentionally not applied here; the circular comparison
lives in the evaluation metrics instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ANGLE_IOU_EPS = 1e-9


@dataclass(frozen=True)
class PoseAngles:
    """Pose triple in degrees / scene units."""

    theta: float
    phi: float
    gamma: float

    def __post_init__(self) -> None:
        for name in ("theta", "phi", "gamma"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")


@dataclass(frozen=True)
class NormBox:
    """Axis-aligned box in normalized [0, 1] continuous coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_min <= self.x_max and self.y_min <= self.y_max):
            raise ValueError(f"inverted box {self}")
        for v in (self.x_min, self.y_min, self.x_max, self.y_max):
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"coordinates must lie in [0, 1], got {v}")

    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


def angle_iou_loss(prd: PoseAngles, trt: PoseAngles) -> float:
    """Rectangle-IoU pose loss over (theta, phi); 0 for identical poses."""
    if min(prd.theta, prd.phi, trt.theta, trt.phi) < 0:
        raise ValueError("angles must be non-negative")
    area_p = prd.theta * prd.phi
    area_t = trt.theta * trt.phi
    if area_p == 0.0 and area_t == 0.0:
        return 0.0
    inter = min(prd.theta, trt.theta) * min(prd.phi, trt.phi)
    return 1.0 - inter / (area_p + area_t - inter + ANGLE_IOU_EPS)


def box_iou(a: NormBox, b: NormBox) -> float:
    """Intersection over union with continuous areas; 0 when union is empty."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def giou_loss(a: NormBox, b: NormBox) -> float:
    """1 minus generalized IoU; 0 for identical boxes, approaches 2 for
    distant ones."""
    hull_w = max(a.x_max, b.x_max) - min(a.x_min, b.x_min)
    hull_h = max(a.y_max, b.y_max) - min(a.y_min, b.y_min)
    hull = hull_w * hull_h
    if hull == 0.0:
        return 0.0
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area() + b.area() - inter
    iou = inter / union if union > 0.0 else 0.0
    giou = iou - (hull - union) / hull
    return 1.0 - giou


def l1_loss(prd: float, trt: float) -> float:
    return abs(prd - trt)


def cross_entropy(logits: np.ndarray, target_class: int) -> float:
    """Negative log softmax probability of the target class, computed with
    the max-shift trick for stability."""
    z = np.asarray(logits, dtype=np.float64).ravel()
    if not 0 <= target_class < z.size:
        raise IndexError(f"target class {target_class} out of range for {z.size} logits")
    z = z - z.max()
    return float(np.log(np.exp(z).sum()) - z[target_class])


def mse_pixels(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared difference over pixels and channels, intensities scaled
    to [0, 1].  uint8 inputs are divided by 255; float inputs pass through."""
    xa, xb = np.asarray(a), np.asarray(b)
    if xa.shape != xb.shape:
        raise ValueError(f"shape mismatch {xa.shape} vs {xb.shape}")
    if xa.dtype == np.uint8:
        xa = xa.astype(np.float64) / 255.0
    if xb.dtype == np.uint8:
        xb = xb.astype(np.float64) / 255.0
    return float(np.mean((xa.astype(np.float64) - xb.astype(np.float64)) ** 2))
