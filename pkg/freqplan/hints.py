# SPDX-License-Identifier: MIT
# Copyright (c) 2026 Mat McGowan
"""Label-free degradation hints.

One pass over an image yields the cue vector the planner reasons about:
rain (oriented streaks), snow (small bright blobs), noise (flat-region
residuals), blur (Laplacian/spectral/edge strength), haze (dark channel,
saturation, depth proxy), exposure (luma) and image size. No labels and no
learned components are involved.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields

import attr
import numpy as np
from scipy.special import expit

from . import imgstats
from .errors import ConfigError, InputError

logger = logging.getLogger(__name__)


def _positive(instance, attribute, value):
    if not value > 0:
        raise ConfigError(f"{attribute.name} must be positive, got {value}")


def _annulus(value) -> tuple[float, float]:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    lo, hi = (float(v) for v in value)
    return (lo, hi)


def _valid_annulus(instance, attribute, value):
    lo, hi = value
    if not 0.0 <= lo < hi <= 0.5:
        raise ConfigError(f"{attribute.name} must satisfy 0 <= lo < hi <= 0.5, got {value}")


def _int_range(value) -> tuple[int, int]:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    lo, hi = (int(v) for v in value)
    return (lo, hi)


@attr.s(frozen=True)
class HintThresholds:
    """Decision thresholds for each cue family.

    Defaults are the recommended values for disambiguation; sr_min_side is
    the side length below which an image counts as undersampled.
    """

    line_score_min = attr.ib(default=0.16, converter=float, validator=_positive)
    anisotropy_min = attr.ib(default=0.40, converter=float, validator=_positive)
    freq_ratio_min = attr.ib(default=1.05, converter=float, validator=_positive)
    small_blobs_min = attr.ib(default=25.0, converter=float, validator=_positive)
    snow_anisotropy_max = attr.ib(default=0.42, converter=float, validator=_positive)
    noise_score_min = attr.ib(default=0.45, converter=float, validator=_positive)
    grad95_max = attr.ib(default=0.17, converter=float, validator=_positive)
    lap_var_max = attr.ib(default=0.27, converter=float, validator=_positive)
    hf_energy_max = attr.ib(default=0.052, converter=float, validator=_positive)
    haze_score_min = attr.ib(default=0.50, converter=float, validator=_positive)
    depth_grad_min = attr.ib(default=0.03, converter=float, validator=_positive)
    mean_y_max = attr.ib(default=0.32, converter=float, validator=_positive)
    p50_max = attr.ib(default=0.26, converter=float, validator=_positive)
    sr_min_side = attr.ib(default=256, converter=int)

    @sr_min_side.validator
    def _check_sr(self, attribute, value):
        if value < 8:
            raise ConfigError(f"sr_min_side must be >= 8, got {value}")


@attr.s(frozen=True)
class CueParams:
    """Extraction constants the cue formulas leave open."""

    num_bins = attr.ib(default=36, converter=int)
    low_annulus = attr.ib(default=(0.0, 0.10), converter=_annulus, validator=_valid_annulus)
    mid_annulus = attr.ib(default=(0.10, 0.30), converter=_annulus, validator=_valid_annulus)
    inner_annulus = attr.ib(default=(0.0, 0.10), converter=_annulus, validator=_valid_annulus)
    outer_annulus = attr.ib(default=(0.30, 0.50), converter=_annulus, validator=_valid_annulus)
    eps = attr.ib(default=1e-8, converter=float, validator=_positive)
    freq_ratio_cap = attr.ib(default=1e4, converter=float, validator=_positive)
    blob_threshold = attr.ib(default=0.78, converter=float, validator=_positive)
    blob_area = attr.ib(default=(3, 200), converter=_int_range)
    flat_quantile = attr.ib(default=0.25, converter=float, validator=_positive)
    edge_sigma = attr.ib(default=1.0, converter=float, validator=_positive)

    @num_bins.validator
    def _check_bins(self, attribute, value):
        if value < 2:
            raise ConfigError(f"num_bins must be >= 2, got {value}")


DEFAULT_PARAMS = CueParams()


@dataclass
class DegradationHints:
    """The full cue vector for one image."""

    line_score: float = 0.0
    anisotropy: float = 0.0
    freq_ratio: float = 0.0
    small_blobs: int = 0
    snow_anisotropy: float = 0.0
    noise_mad: float = 0.0
    chroma_std: float = 0.0
    noise_score: float = 0.0
    lap_var: float = 0.0
    hf_energy: float = 0.0
    grad95: float = 0.0
    dark_mean: float = 0.0
    sat_mean: float = 0.0
    depth_grad: float = 0.0
    haze_score: float = 0.0
    mean_y: float = 0.0
    p50_y: float = 0.0
    height: int = 0
    width: int = 0
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "DegradationHints":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown hint fields: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "DegradationHints":
        return cls.from_dict(json.loads(text))


# ── Closed-form scores ───────────────────────────────────────────


def noise_score(noise_mad: float, chroma_std: float) -> float:
    return float(0.6 * expit(50.0 * (noise_mad - 0.0050))
                 + 0.4 * expit(50.0 * (chroma_std - 0.0095)))


def haze_score(dark_mean: float, sat_mean: float, depth_grad: float) -> float:
    return float(0.4 * expit(7.0 * (dark_mean - 0.33))
                 + 0.3 * expit(7.0 * (0.30 - sat_mean))
                 + 0.3 * expit(8.0 * (depth_grad - 0.03)))


# ── Cue extractors ───────────────────────────────────────────────


def _orientation_scores(hist: np.ndarray) -> tuple[float, float] | None:
    total = float(hist.sum())
    if total < 1e-12:
        return None
    mean = total / hist.size
    peak = float(hist.max())
    return peak / total, (peak - mean) / mean


def rain_cues(g: np.ndarray, params: CueParams = DEFAULT_PARAMS,
              flags: list[str] | None = None) -> tuple[float, float, float]:
    """(line_score, anisotropy, freq_ratio)."""
    flags = flags if flags is not None else []
    gx, gy, mag = imgstats.sobel_gradients(g)
    hist = imgstats.orientation_histogram(gx, gy, mag, params.num_bins)
    scores = _orientation_scores(hist)
    if scores is None:
        flags.append("flat_image")
        line_score, anisotropy = 0.0, 0.0
    else:
        line_score, anisotropy = scores

    spec = imgstats.radial_power_spectrum(g, [params.low_annulus, params.mid_annulus])
    flags.extend(spec.flags)
    p_low, p_mid = spec.mean_power(0), spec.mean_power(1)
    if p_low < params.eps ** 2:
        if p_mid <= params.eps ** 2:
            freq_ratio = 0.0
        else:
            flags.append("low_power_saturated")
            freq_ratio = params.freq_ratio_cap
    else:
        freq_ratio = min(p_mid / (p_low + params.eps), params.freq_ratio_cap)
    return line_score, anisotropy, freq_ratio


def snow_cues(g: np.ndarray, params: CueParams = DEFAULT_PARAMS) -> tuple[int, float]:
    """(small_blobs, snow_anisotropy)."""
    lo, hi = params.blob_area
    areas = imgstats.connected_components(g > params.blob_threshold)
    small = sum(1 for a in areas if lo <= a <= hi)
    gx, gy, mag = imgstats.sobel_gradients(g)
    scores = _orientation_scores(imgstats.orientation_histogram(gx, gy, mag, params.num_bins))
    return small, (0.0 if scores is None else scores[1])


def _flat_mask(g: np.ndarray, params: CueParams, flags: list[str]) -> np.ndarray:
    _, _, mag = imgstats.sobel_gradients(g)
    mask = mag < imgstats.quantile(mag, params.flat_quantile)
    if not mask.any():
        flags.append("empty_flat_mask")
        mask = np.ones_like(mask)
    return mask


def noise_cues(img: np.ndarray, params: CueParams = DEFAULT_PARAMS,
               flags: list[str] | None = None) -> tuple[float, float, float]:
    """(noise_mad, chroma_std, noise_score)."""
    flags = flags if flags is not None else []
    g = imgstats.to_gray(img)
    mask = _flat_mask(g, params, flags)
    resid = (g - imgstats.box_mean(g, 3))[mask]
    mad = float(np.median(np.abs(resid - np.median(resid))))
    if imgstats.channels(img) == 3:
        _, cb, cr = imgstats.to_ycbcr(img)
        chroma = 0.5 * (float(cb[mask].std()) + float(cr[mask].std()))
    else:
        chroma = 0.0
    return mad, chroma, noise_score(mad, chroma)


def blur_cues(g: np.ndarray, params: CueParams = DEFAULT_PARAMS,
              flags: list[str] | None = None) -> tuple[float, float, float]:
    """(lap_var, hf_energy, grad95)."""
    flags = flags if flags is not None else []
    lap_var = float(imgstats.laplacian(g).var())
    spec = imgstats.radial_power_spectrum(g, [params.inner_annulus, params.outer_annulus])
    flags.extend(spec.flags)
    hf_energy = spec.mean_power(1) / (spec.mean_power(0) + params.eps)
    _, _, mag = imgstats.sobel_gradients(imgstats.gaussian_blur(g, params.edge_sigma))
    grad95 = imgstats.quantile(mag, 0.95)
    return lap_var, float(hf_energy), grad95


def haze_cues(img: np.ndarray) -> tuple[float, float, float, float]:
    """(dark_mean, sat_mean, depth_grad, haze_score); needs an RGB image."""
    if imgstats.channels(img) != 3:
        raise InputError("haze cues need a 3-channel image")
    dark_mean = float(img.min(axis=2).mean())
    sat_mean = float(imgstats.hsv_saturation(img).mean())
    y = imgstats.to_gray(img)
    half = y.shape[0] // 2
    depth_grad = float(y[:half].mean() - y[y.shape[0] - half:].mean())
    return dark_mean, sat_mean, depth_grad, haze_score(dark_mean, sat_mean, depth_grad)


def exposure_cues(img: np.ndarray) -> tuple[float, float]:
    """(mean_y, p50_y)."""
    y = imgstats.to_gray(img)
    return float(y.mean()), float(np.median(y))


def extract_hints(img, params: CueParams = DEFAULT_PARAMS) -> DegradationHints:
    """Compute every cue for one image."""
    img = imgstats.as_image(img)
    flags: list[str] = []
    if imgstats.channels(img) == 1:
        flags.append("grayscale_replicated")
        rgb = np.repeat(img[:, :, None], 3, axis=2)
    else:
        rgb = img
    g = imgstats.to_gray(rgb)

    line_score, anisotropy, freq_ratio = rain_cues(g, params, flags)
    small_blobs, snow_aniso = snow_cues(g, params)
    mad, chroma, n_score = noise_cues(rgb, params, flags)
    lap_var, hf_energy, grad95 = blur_cues(g, params, flags)
    dark_mean, sat_mean, depth_grad, h_score = haze_cues(rgb)
    mean_y, p50_y = exposure_cues(rgb)

    hints = DegradationHints(
        line_score=line_score, anisotropy=anisotropy, freq_ratio=freq_ratio,
        small_blobs=small_blobs, snow_anisotropy=snow_aniso,
        noise_mad=mad, chroma_std=chroma, noise_score=n_score,
        lap_var=lap_var, hf_energy=hf_energy, grad95=grad95,
        dark_mean=dark_mean, sat_mean=sat_mean, depth_grad=depth_grad,
        haze_score=h_score, mean_y=mean_y, p50_y=p50_y,
        height=int(img.shape[0]), width=int(img.shape[1]),
        flags=sorted(set(flags)),
    )
    logger.debug("hints %dx%d: %s", hints.height, hints.width, render_hints(hints))
    return hints


def render_hints(h: DegradationHints) -> str:
    """The runtime feature block, one line."""
    return (
        f"Rain: line={h.line_score:.2f}, aniso={h.anisotropy:.2f}, freq={h.freq_ratio:.2f}; "
        f"Snow: blobs={h.small_blobs}, aniso={h.snow_anisotropy:.2f}; "
        f"Noise: mad={h.noise_mad:.4f}, chroma={h.chroma_std:.4f}, score={h.noise_score:.2f}; "
        f"Blur: lapVar={h.lap_var:.3f}, hf={h.hf_energy:.3f}, grad95={h.grad95:.3f}; "
        f"Haze: score={h.haze_score:.2f}, depth_grad={h.depth_grad:.3f}, "
        f"dark_mean={h.dark_mean:.2f}, sat_mean={h.sat_mean:.2f}; "
        f"Exposure: meanY={h.mean_y:.2f}, p50={h.p50_y:.2f}; "
        f"Size: H={h.height}, W={h.width}"
    )
