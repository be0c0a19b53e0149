# SPDX-License-Identifier: MIT
# Copyright (c) 2026 Mat McGowan
"""Image numerics shared by the cue extractors.

Images are numpy float64 arrays: H×W (gray) or H×W×3 (RGB), values in
[0, 1]. Every spatial filter uses edge-replicate padding ("nearest" in
scipy.ndimage terms), so constant images stay constant.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import InputError

logger = logging.getLogger(__name__)

MIN_SIDE = 8

# BT.601 luma
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

_LAPLACIAN = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])
_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def as_image(img, min_side: int = MIN_SIDE) -> np.ndarray:
    """Validate an image buffer and return it as float64.

    Accepts H×W, H×W×1 or H×W×3. Raises InputError if the buffer is too
    small, has the wrong channel count, or holds values outside [0, 1].
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
        raise InputError(f"expected H×W or H×W×3 image, got shape {arr.shape}")
    h, w = arr.shape[:2]
    if h < min_side or w < min_side:
        raise InputError(f"image {h}×{w} is smaller than {min_side}×{min_side}")
    if not np.all(np.isfinite(arr)):
        raise InputError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise InputError("image values must lie in [0, 1]")
    return arr


def channels(img: np.ndarray) -> int:
    return 1 if img.ndim == 2 else img.shape[2]


def to_gray(img: np.ndarray) -> np.ndarray:
    """BT.601 luma; single-channel images pass through."""
    if img.ndim == 2:
        return img
    if img.shape[2] == 1:
        return img[:, :, 0]
    return img @ LUMA_WEIGHTS


def to_ycbcr(img: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full-range BT.601 YCbCr, chroma centered on 0.5."""
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 0.5 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 0.5 + 0.5 * r - 0.418688 * g - 0.081312 * b
    return y, cb, cr


def hsv_saturation(img: np.ndarray) -> np.ndarray:
    """Hexcone saturation (max − min) / max, 0 where max is 0."""
    hi = img.max(axis=2)
    lo = img.min(axis=2)
    sat = np.zeros_like(hi)
    np.divide(hi - lo, hi, out=sat, where=hi > 0)
    return sat


# ── Filters ──────────────────────────────────────────────────────


def sobel_gradients(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """3×3 Sobel responses (gx along columns, gy along rows) and magnitude."""
    gx = ndimage.sobel(g, axis=1, mode="nearest")
    gy = ndimage.sobel(g, axis=0, mode="nearest")
    return gx, gy, np.hypot(gx, gy)


def box_mean(g: np.ndarray, k: int = 3) -> np.ndarray:
    if k < 1 or k % 2 == 0:
        raise InputError(f"box window must be a positive odd size, got {k}")
    return ndimage.uniform_filter(g, size=k, mode="nearest")


def laplacian(g: np.ndarray) -> np.ndarray:
    """5-point Laplacian [[0,1,0],[1,-4,1],[0,1,0]]."""
    return ndimage.correlate(g, _LAPLACIAN, mode="nearest")


def gaussian_blur(g: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian blur truncated at radius ceil(3σ)."""
    if sigma <= 0:
        return g.copy()
    radius = math.ceil(3.0 * sigma)
    return ndimage.gaussian_filter(g, sigma, mode="nearest", truncate=radius / sigma)


def orientation_histogram(gx: np.ndarray, gy: np.ndarray, magnitude: np.ndarray,
                          num_bins: int = 36) -> np.ndarray:
    """Magnitude-weighted histogram of gradient orientation over [0, π)."""
    if num_bins < 2:
        raise InputError(f"num_bins must be >= 2, got {num_bins}")
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    idx = np.floor(theta * (num_bins / np.pi)).astype(np.int64)
    np.clip(idx, 0, num_bins - 1, out=idx)
    return np.bincount(idx.ravel(), weights=magnitude.ravel(), minlength=num_bins)


# ── Statistics ───────────────────────────────────────────────────


def quantile(values, q: float) -> float:
    """Linear-interpolation quantile between order statistics."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise InputError("quantile of an empty sequence")
    if not 0.0 <= q <= 1.0:
        raise InputError(f"quantile fraction must be in [0, 1], got {q}")
    return float(np.quantile(arr, q))


def connected_components(mask: np.ndarray) -> list[int]:
    """Areas of the 8-connected components of a binary mask."""
    labels, count = ndimage.label(np.asarray(mask) > 0, structure=_EIGHT_CONNECTED)
    if count == 0:
        return []
    return [int(a) for a in np.bincount(labels.ravel())[1:]]


# ── Spectrum ─────────────────────────────────────────────────────


@dataclass
class SpectrumBin:
    r_lo: float
    r_hi: float
    mean_power: float
    count: int


@dataclass
class RadialSpectrum:
    """Mean power per annulus of the mean-subtracted image's 2-D DFT.

    Radii are fractions of the sampling rate. An annulus whose upper edge is
    0.5 also absorbs the corner frequencies beyond 0.5, so annuli covering
    (0, 0.5] account for the whole AC power.
    """

    bins: list[SpectrumBin]
    total_power: float
    flags: list[str] = field(default_factory=list)

    def mean_power(self, index: int) -> float:
        return self.bins[index].mean_power


def frequency_radius(shape: tuple[int, int]) -> np.ndarray:
    """Normalized radius sqrt((u/H)² + (v/W)²) for each DFT sample."""
    fu = np.fft.fftfreq(shape[0])
    fv = np.fft.fftfreq(shape[1])
    return np.hypot(fu[:, None], fv[None, :])


def radial_power_spectrum(g: np.ndarray,
                          annuli: Sequence[tuple[float, float]]) -> RadialSpectrum:
    for lo, hi in annuli:
        if not 0.0 <= lo < hi <= 0.5:
            raise InputError(f"annulus ({lo}, {hi}] must satisfy 0 <= lo < hi <= 0.5")
    ordered = sorted(annuli)
    for (_, hi), (lo, _) in zip(ordered, ordered[1:]):
        if lo < hi:
            raise InputError("annuli overlap")

    power = np.abs(np.fft.fft2(g - g.mean())) ** 2
    radius = frequency_radius(g.shape)
    bins = []
    flags = []
    for i, (lo, hi) in enumerate(annuli):
        if hi >= 0.5:
            sel = radius > lo
        else:
            sel = (radius > lo) & (radius <= hi)
        count = int(sel.sum())
        if count == 0:
            flags.append(f"empty_annulus:{i}")
            mean = 0.0
        else:
            mean = float(power[sel].mean())
        bins.append(SpectrumBin(lo, hi, mean, count))
    return RadialSpectrum(bins=bins, total_power=float(power.sum()), flags=flags)
