"""Saliency-map denoising and bit-depth reduction.

Blur with a large Gaussian, stretch to the 8-bit range, then integer-divide
down to 32 levels. Low-amplitude noise in non-salient regions otherwise
inflates per-segment entropy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .backbone import SaliencyMap


@dataclass(frozen=True)
class NormalizeConfig:
    kernel_size: int = 31
    sigma: float = 5.0
    out_min: int = 0
    out_max: int = 255
    divisor: int = 8

    def __post_init__(self):
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd and >= 1, got {self.kernel_size}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.divisor < 1:
            raise ValueError(f"divisor must be >= 1, got {self.divisor}")
        if not 0 <= self.out_min < self.out_max <= 255:
            raise ValueError(f"need 0 <= out_min < out_max <= 255, got {self.out_min}, {self.out_max}")

    @property
    def levels(self) -> int:
        return self.out_max // self.divisor + 1


def gaussian_blur(values: np.ndarray, kernel_size: int, sigma: float) -> np.ndarray:
    """Separable Gaussian with a hard ``kernel_size`` support and reflect borders."""
    radius = kernel_size // 2
    if radius == 0:
        return np.asarray(values, dtype=np.float64).copy()
    return ndimage.gaussian_filter(
        np.asarray(values, dtype=np.float64), sigma=sigma, mode="reflect", radius=radius
    )


def normalize_map(smap: SaliencyMap, cfg: NormalizeConfig | None = None) -> SaliencyMap:
    """Blur, min-max stretch and quantize a map.

    The result holds level indices ``0 .. cfg.levels - 1`` (32 levels with the
    defaults). A map that is constant after blurring carries no signal and
    becomes all ``out_min // divisor``.
    """
    cfg = cfg or NormalizeConfig()
    blurred = gaussian_blur(smap.values, cfg.kernel_size, cfg.sigma)

    lo, hi = blurred.min(), blurred.max()
    if hi - lo <= 1e-12 * max(abs(hi), 1.0):
        stretched = np.full(blurred.shape, float(cfg.out_min))
    else:
        stretched = cfg.out_min + (blurred - lo) / (hi - lo) * (cfg.out_max - cfg.out_min)
    # stage 2 produces an 8-bit map; stage 3 is integer division on it
    as_int = np.clip(np.rint(stretched), cfg.out_min, cfg.out_max).astype(np.int64)
    quantized = as_int // cfg.divisor
    return SaliencyMap(quantized.astype(np.float64), levels=cfg.levels)


def histogram_entropy(values: np.ndarray) -> float:
    """Shannon entropy (bits) of the histogram of distinct values."""
    _, counts = np.unique(np.asarray(values).ravel(), return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())
