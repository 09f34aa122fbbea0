"""Landmark geometry: least-squares similarity alignment and inverse warping.

A similarity transform maps a point p through scale, rotation, and translation:

    T(p) = s * R(theta) * p + (dx, dy)

estimate_alignment finds the transform minimizing the summed squared distance
from T(detected_i) to canonical_i, in closed form. warp resamples an image so
that output pixel q takes the value of the input at T^-1(q), with bilinear
interpolation and zeros outside the input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateLandmarks, TooFewPoints
from .image import GrayImage, _bilinear_sample

N_LANDMARKS = 5

# Canonical positions of (left eye, right eye, nose, left mouth, right mouth)
# in the 160x160 aligned face frame.
CANONICAL_LANDMARKS = np.array(
    [
        [54.0, 58.0],
        [106.0, 58.0],
        [80.0, 92.0],
        [60.0, 120.0],
        [100.0, 120.0],
    ]
)


@dataclass(frozen=True)
class Landmarks:
    """Five (x, y) points: eyes, nose tip, mouth corners."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (N_LANDMARKS, 2):
            raise ValueError(f"landmarks must be {N_LANDMARKS} (x, y) points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("landmark coordinates must be finite")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class SimilarityTransform:
    scale: float
    theta: float
    dx: float
    dy: float

    def __post_init__(self) -> None:
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        if not -math.pi < self.theta <= math.pi:
            raise ValueError(f"theta must lie in (-pi, pi], got {self.theta}")

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return self.scale * np.array([[c, -s], [s, c]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix().T + np.array([self.dx, self.dy])

    def inverse(self) -> "SimilarityTransform":
        inv_scale = 1.0 / self.scale
        inv_theta = _wrap_angle(-self.theta)
        c, s = math.cos(inv_theta), math.sin(inv_theta)
        tx = -inv_scale * (c * self.dx - s * self.dy)
        ty = -inv_scale * (s * self.dx + c * self.dy)
        return SimilarityTransform(inv_scale, inv_theta, tx, ty)


def _wrap_angle(theta: float) -> float:
    """Wrap into (-pi, pi]."""
    wrapped = math.remainder(theta, 2 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2 * math.pi
    return wrapped


def estimate_alignment(detected: Landmarks, canonical: Landmarks) -> SimilarityTransform:
    """Closed-form least-squares similarity fit from detected onto canonical.

    With both point sets centered, the best rotation angle is
    atan2(sum(a x b), sum(a . b)) and the best scale is the projection of the
    rotated source onto the target over the source energy.
    """
    src = detected.points
    dst = canonical.points
    if src.shape[0] < 2:
        raise TooFewPoints("similarity fit needs at least two points")
    src_mean = src.mean(axis=0)
    dst_mean = dst.mean(axis=0)
    a = src - src_mean
    b = dst - dst_mean
    energy = float((a * a).sum())
    if energy < 1e-12:
        raise DegenerateLandmarks("all landmark points coincide")
    dot = float((a * b).sum())
    cross = float((a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]).sum())
    theta = math.atan2(cross, dot)
    scale = math.hypot(dot, cross) / energy
    if scale <= 0 or not math.isfinite(scale):
        raise DegenerateLandmarks("degenerate landmark geometry (zero best-fit scale)")
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    t = dst_mean - scale * (rot @ src_mean)
    return SimilarityTransform(scale, _wrap_angle(theta), float(t[0]), float(t[1]))


def alignment_residual(
    transform: SimilarityTransform, detected: Landmarks, canonical: Landmarks
) -> float:
    """Root-mean-square distance of transformed detected points to canonical."""
    moved = transform.apply(detected.points)
    return float(np.sqrt(((moved - canonical.points) ** 2).sum(axis=1).mean()))


def warp(
    img: GrayImage, transform: SimilarityTransform, out_width: int, out_height: int
) -> GrayImage:
    """Resample via the inverse mapping; samples outside the input read as 0."""
    if out_width < 1 or out_height < 1:
        raise ValueError("output size must be at least 1x1")
    inv = transform.inverse()
    grid_x, grid_y = np.meshgrid(
        np.arange(out_width, dtype=np.float64), np.arange(out_height, dtype=np.float64)
    )
    coords = np.stack([grid_x.ravel(), grid_y.ravel()], axis=1)
    src = inv.apply(coords)
    sampled = _bilinear_sample(
        img.pixels, src[:, 0].reshape(out_height, out_width),
        src[:, 1].reshape(out_height, out_width),
    )
    return GrayImage(np.clip(sampled, 0.0, 1.0))
