"""Grayscale images, binary PGM io, bilinear resampling, and the image pyramid.

Pixels live in [0, 1] as float64. Resampling maps pixel centers with the
half-pixel convention src = (dst + 0.5) * (in / out) - 0.5, so a same-size
resize reproduces the input exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ImageTooSmall, UnsupportedFormat


@dataclass
class GrayImage:
    """A 2-D float64 pixel grid with values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2:
            raise ValueError("GrayImage expects a 2-D pixel array")
        if self.pixels.size == 0:
            raise ValueError("GrayImage cannot be empty")
        lo, hi = float(self.pixels.min()), float(self.pixels.max())
        if lo < -1e-12 or hi > 1 + 1e-12:
            raise ValueError(f"pixel values must lie in [0, 1], got [{lo}, {hi}]")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


# -- PGM io --------------------------------------------------------------------

def load_pgm(path: str | Path) -> GrayImage:
    """Read a binary PGM (P5, maxval 255). Anything else is rejected."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise UnsupportedFormat(f"{path}: not a binary PGM (P5) file")
    # Header: magic, width, height, maxval as ASCII tokens; '#' starts a comment.
    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            eol = data.find(b"\n", pos)
            pos = len(data) if eol < 0 else eol + 1
            continue
        match = re.match(rb"\d+", data[pos:])
        if not match:
            raise UnsupportedFormat(f"{path}: malformed PGM header")
        tokens.append(int(match.group()))
        pos += match.end()
    width, height, maxval = tokens
    if maxval != 255:
        raise UnsupportedFormat(f"{path}: only 8-bit PGM (maxval 255) is supported")
    pos += 1  # single whitespace byte separates header and raster
    raster = data[pos:pos + width * height]
    if len(raster) != width * height:
        raise UnsupportedFormat(f"{path}: truncated PGM raster")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return GrayImage(pixels / 255.0)


def save_pgm(img: GrayImage, path: str | Path) -> None:
    levels = np.clip(np.rint(img.pixels * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{img.width} {img.height}\n255\n".encode()
    Path(path).write_bytes(header + levels.tobytes())


# -- resampling ------------------------------------------------------------------

def _bilinear_sample(pixels: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample at float coordinates; out-of-range contributions are zero."""
    h, w = pixels.shape
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    fx = xs - x0
    fy = ys - y0

    def fetch(yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
        inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        vals = np.zeros(yy.shape)
        vals[inside] = pixels[yy[inside], xx[inside]]
        return vals

    top = fetch(y0, x0) * (1 - fx) + fetch(y0, x0 + 1) * fx
    bottom = fetch(y0 + 1, x0) * (1 - fx) + fetch(y0 + 1, x0 + 1) * fx
    return top * (1 - fy) + bottom * fy


def bilinear_resize(img: GrayImage, new_width: int, new_height: int) -> GrayImage:
    """Bilinear resample to the requested size (identity when sizes match)."""
    if new_width < 1 or new_height < 1:
        raise ValueError("target size must be at least 1x1")
    if new_width == img.width and new_height == img.height:
        return GrayImage(img.pixels.copy())
    sx = img.width / new_width
    sy = img.height / new_height
    xs = (np.arange(new_width) + 0.5) * sx - 0.5
    ys = (np.arange(new_height) + 0.5) * sy - 0.5
    grid_x, grid_y = np.meshgrid(xs, ys)
    # Interior coordinates are clipped into range so edges replicate rather
    # than fade to zero (zero-fill is for warping, not resizing).
    grid_x = np.clip(grid_x, 0, img.width - 1)
    grid_y = np.clip(grid_y, 0, img.height - 1)
    out = _bilinear_sample(img.pixels, grid_x, grid_y)
    return GrayImage(np.clip(out, 0.0, 1.0))


def crop(img: GrayImage, x: float, y: float, w: float, h: float) -> GrayImage | None:
    """Integer crop of a float rect, clipped to the image. None when empty."""
    x0 = max(0, int(np.floor(x)))
    y0 = max(0, int(np.floor(y)))
    x1 = min(img.width, int(np.ceil(x + w)))
    y1 = min(img.height, int(np.ceil(y + h)))
    if x1 - x0 < 1 or y1 - y0 < 1:
        return None
    return GrayImage(img.pixels[y0:y1, x0:x1].copy())


# -- normalization ---------------------------------------------------------------

def prewhiten(pixels: np.ndarray) -> np.ndarray:
    """(x - mean) / std with the population std. Raises on flat input."""
    from ..errors import DegenerateImage

    pixels = np.asarray(pixels, dtype=np.float64)
    std = float(pixels.std())
    if std <= 1e-6:
        raise DegenerateImage(f"pixel std {std} is too small to normalize")
    return (pixels - pixels.mean()) / std


def safe_prewhiten(pixels: np.ndarray) -> np.ndarray:
    """prewhiten, but flat inputs become zeros instead of raising.

    Detection feeds arbitrary crops to the nets; a flat crop carries no signal
    and maps to the zero input rather than aborting the whole scan.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    std = float(pixels.std())
    if std <= 1e-6:
        return np.zeros_like(pixels)
    return (pixels - pixels.mean()) / std


# -- pyramid ---------------------------------------------------------------------

def build_pyramid(img: GrayImage, alpha: float = 0.5, min_face: int = 12) -> list[GrayImage]:
    """Successively scale by alpha until a side would drop below min_face.

    Level 0 is the input itself. Each level's dimensions are
    floor(alpha * previous), and any level with min(w, h) < min_face is
    excluded.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    if min(img.width, img.height) < min_face:
        raise ImageTooSmall(
            f"image {img.width}x{img.height} is below the {min_face}px minimum"
        )
    levels = [img]
    w, h = img.width, img.height
    while True:
        w, h = int(np.floor(alpha * w)), int(np.floor(alpha * h))
        if min(w, h) < min_face or w < 1 or h < 1:
            break
        levels.append(bilinear_resize(img, w, h))
    return levels
