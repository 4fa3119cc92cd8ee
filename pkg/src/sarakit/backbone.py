"""Saliency-map acquisition: external backbone files, a built-in classical
backbone, and optional depth maps."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

# Rec.601 luma coefficients
LUMA_601 = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class SaliencyMap:
    """A 2D grid of saliency intensities in ``[0, 255]``.

    ``values`` is a float64 ``(height, width)`` array. ``levels`` is the number
    of permitted distinct intensities: 256 for raw maps, 32 once the map has
    been quantized by :func:`sarakit.normalize.normalize_map` (values are then
    the level indices ``0..31``).
    """

    values: np.ndarray
    levels: int = 256

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] == 0 or v.shape[1] == 0:
            raise ValueError(f"saliency map must be a non-empty 2D grid, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("saliency map contains non-finite values")
        if v.min() < 0 or v.max() > 255:
            raise ValueError("saliency values must lie in [0, 255]")
        if self.levels < 2:
            raise ValueError("levels must be >= 2")
        if self.levels < 256 and v.max() > self.levels - 1:
            raise ValueError(f"values exceed the {self.levels}-level range")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def max_level(self) -> int:
        """Largest representable value (255 raw, 31 quantized)."""
        return 255 if self.levels >= 256 else self.levels - 1

    def to_uint8(self) -> np.ndarray:
        """Values rescaled to the full 8-bit range, for writing PNGs."""
        v = self.values * (255.0 / self.max_level)
        return np.clip(np.rint(v), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel proximity in ``[0, 1]``; 1 means nearest to the viewer."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.size == 0:
            raise ValueError(f"depth map must be a non-empty 2D grid, got shape {v.shape}")
        if v.min() < 0 or v.max() > 1:
            raise ValueError("depth values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def bilinear_resize(arr: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resampling with half-pixel centres and edge clamping.

    Same-size input is returned unchanged. Every output value is a convex
    combination of input values, so bounds are preserved.
    """
    arr = np.asarray(arr, dtype=np.float64)
    if width <= 0 or height <= 0:
        raise ValueError(f"target dimensions must be positive, got {width}x{height}")
    h, w = arr.shape
    if (h, w) == (height, width):
        return arr.copy()

    def axis_coords(n_in, n_out):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0, n_in - 1)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, fy = axis_coords(h, height)
    x0, x1, fx = axis_coords(w, width)
    # a + (b - a) * f keeps constant regions exactly constant
    top = arr[y0][:, x0] + (arr[y0][:, x1] - arr[y0][:, x0]) * fx
    bot = arr[y1][:, x0] + (arr[y1][:, x1] - arr[y1][:, x0]) * fx
    out = top + (bot - top) * fy[:, None]
    return np.clip(out, arr.min(), arr.max())


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = LUMA_601
    return r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]


def read_gray(path) -> np.ndarray:
    """Read an 8-bit raster as a float grayscale array.

    Colour images are converted with Rec.601 luma and a warning is issued.
    """
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode == "L":
                return np.asarray(img, dtype=np.float64)
            if mode == "P":
                img = img.convert("RGBA")
                mode = "RGBA"
            if mode in ("RGB", "RGBA"):
                warnings.warn(f"{path}: {mode} image converted to grayscale via Rec.601 luma")
                return rgb_to_gray(np.asarray(img.convert("RGB")))
            if mode == "LA":
                warnings.warn(f"{path}: alpha channel discarded")
                return np.asarray(img.convert("L"), dtype=np.float64)
            if mode == "1":
                return np.asarray(img.convert("L"), dtype=np.float64)
            raise ValueError(f"{path}: unsupported image mode {mode!r}, expected 8-bit grayscale")
    except (OSError, SyntaxError) as exc:
        raise ValueError(f"cannot read image {path}: {exc}") from exc


def read_rgb(path) -> np.ndarray:
    """Read an image as an ``(h, w, 3)`` uint8 RGB array."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))
    except (OSError, SyntaxError) as exc:
        raise ValueError(f"cannot read image {path}: {exc}") from exc


def image_size(path) -> tuple[int, int]:
    """``(width, height)`` of an image file without decoding pixels."""
    try:
        with Image.open(path) as img:
            return img.size
    except (OSError, SyntaxError) as exc:
        raise ValueError(f"cannot read image {path}: {exc}") from exc


def load_saliency_map(path, target_w: int, target_h: int) -> SaliencyMap:
    """Load an exported backbone map and resample it to ``target_w x target_h``."""
    if target_w <= 0 or target_h <= 0:
        raise ValueError(f"target dimensions must be positive, got {target_w}x{target_h}")
    gray = read_gray(path)
    return SaliencyMap(bilinear_resize(gray, target_w, target_h))


def load_depth_map(path, target_w: int, target_h: int) -> DepthMap:
    """Load an 8-bit depth raster (255 = nearest) as proximity in [0, 1]."""
    if target_w <= 0 or target_h <= 0:
        raise ValueError(f"target dimensions must be positive, got {target_w}x{target_h}")
    gray = read_gray(path)
    return DepthMap(bilinear_resize(gray, target_w, target_h) / 255.0)


def minmax_to_255(arr: np.ndarray) -> np.ndarray:
    """Linear rescale to [0, 255]; a constant array maps to all zeros."""
    arr = np.asarray(arr, dtype=np.float64)
    lo, hi = arr.min(), arr.max()
    if hi <= lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo) * 255.0


def spectral_residual_saliency(image: np.ndarray, smooth_sigma: float = 3.0) -> SaliencyMap:
    """Spectral-residual saliency at full resolution.

    ``image`` is an RGB ``(h, w, 3)`` or grayscale ``(h, w)`` array. The log
    amplitude spectrum minus its 3x3 local mean is recombined with the
    original phase, inverted, squared, Gaussian-smoothed and min-max scaled.
    """
    img = np.asarray(image)
    if img.size == 0:
        raise ValueError("image is empty")
    gray = rgb_to_gray(img) if img.ndim == 3 else img.astype(np.float64)
    if gray.shape == (1, 1) or gray.max() == gray.min():
        return SaliencyMap(np.zeros(gray.shape))

    spectrum = np.fft.fft2(gray)
    amplitude = np.abs(spectrum)
    phase = np.angle(spectrum)
    # log1p: synthetic rasters have exact spectral zeros
    log_amp = np.log1p(amplitude)
    residual = log_amp - ndimage.uniform_filter(log_amp, size=3, mode="wrap")
    recon = np.abs(np.fft.ifft2(np.exp(residual + 1j * phase))) ** 2
    smoothed = ndimage.gaussian_filter(recon, sigma=smooth_sigma, mode="reflect")
    return SaliencyMap(minmax_to_255(smoothed))


def save_png(arr: np.ndarray, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(arr, dtype=np.uint8)).save(path)
