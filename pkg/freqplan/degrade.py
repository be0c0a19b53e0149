# SPDX-License-Identifier: MIT
# Copyright (c) 2026 Mat McGowan
"""Synthetic degradations and the labeled corpus built from them.

Each generator corrupts a clean base with one impairment so that the
matching cue crosses its threshold. Randomness is drawn per corpus item from
(seed, index), so serial and threaded generation produce identical output.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import attr
import numpy as np
from scipy import ndimage

from . import imgstats, pngio
from .errors import ConfigError, CorpusError, InputError
from .hints import CueParams, HintThresholds, extract_hints
from .planner import TASKS, severity_scores

logger = logging.getLogger(__name__)

KINDS = TASKS
SR_MODES = ("sample", "box")

# rain and snow counts are drawn per this many pixels
_REFERENCE_AREA = 512 * 512


def _pair(cast):
    def convert(value):
        if isinstance(value, str):
            value = [v for v in value.split(",") if v.strip()]
        lo, hi = (cast(v) for v in value)
        if lo > hi:
            raise ConfigError(f"range {value!r} has lo > hi")
        return (lo, hi)
    return convert


def _float_list(value):
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    out = tuple(float(v) for v in value)
    if not out or min(out) < 0:
        raise ConfigError(f"expected non-negative values, got {value!r}")
    return out


@attr.s(frozen=True)
class DegradeRanges:
    """Parameter ranges the corpus samples from."""

    rain_count = attr.ib(default=(800, 1200), converter=_pair(int))
    rain_length = attr.ib(default=(20, 50), converter=_pair(int))
    rain_intensity = attr.ib(default=(0.10, 0.16), converter=_pair(float))
    rain_width = attr.ib(default=0.8, converter=float)
    rain_jitter = attr.ib(default=5.0, converter=float)
    rain_tilt = attr.ib(default=20.0, converter=float)
    snow_count = attr.ib(default=(150, 400), converter=_pair(int))
    snow_radius = attr.ib(default=(1.5, 4.0), converter=_pair(float))
    snow_intensity = attr.ib(default=(0.75, 0.95), converter=_pair(float))
    # in 8-bit code values, divided by 255 when sampled
    noise_sigmas = attr.ib(default=(15.0, 25.0), converter=_float_list)
    blur_sigma = attr.ib(default=(1.5, 3.0), converter=_pair(float))
    motion_length = attr.ib(default=(9, 21), converter=_pair(int))
    motion_fraction = attr.ib(default=0.0, converter=float)
    # airlight below the 0.78 blob threshold
    haze_airlight = attr.ib(default=(0.62, 0.72), converter=_pair(float))
    haze_beta = attr.ib(default=(0.8, 1.2), converter=_pair(float))
    low_gain = attr.ib(default=(0.5, 0.9), converter=_pair(float))
    low_gamma = attr.ib(default=(2.0, 3.0), converter=_pair(float))
    # output min side as a fraction of sr_min_side
    sr_scale = attr.ib(default=(0.20, 0.35), converter=_pair(float))
    sr_mode = attr.ib(default="sample", validator=attr.validators.in_(SR_MODES))

    @motion_fraction.validator
    def _check_fraction(self, attribute, value):
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"motion_fraction must lie in [0, 1], got {value}")

    @rain_width.validator
    def _check_width(self, attribute, value):
        if value <= 0:
            raise ConfigError(f"rain_width must be positive, got {value}")

    @sr_scale.validator
    def _check_scale(self, attribute, value):
        if not 0.0 < value[0] <= value[1] < 1.0:
            raise ConfigError(f"sr_scale must lie in (0, 1), got {value}")


@dataclass
class DegradationSpec:
    """One degradation: kind, its parameters and the seed for its randomness."""

    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown degradation kind: {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, data: dict) -> "DegradationSpec":
        return cls(kind=data["kind"], params=dict(data.get("params", {})), seed=int(data.get("seed", 0)))


# ── Clean bases ──────────────────────────────────────────────────

_TILE = 16
_LEVEL = 0.38
_FIELD_AMP = 0.05
_GRATING_AMP = 0.10
_GRATING_FREQ = 0.18
_CHECKER_AMP = 0.085
_HEAVY_BINS = 10
_HEAVY_WEIGHT = 1.5


def _bin_allocation(total: int, num_bins: int) -> list[int]:
    """Largest-remainder split of texture tiles across orientation bins."""
    light = (num_bins - _HEAVY_BINS * _HEAVY_WEIGHT) / (num_bins - _HEAVY_BINS)
    weights = np.array([_HEAVY_WEIGHT] * _HEAVY_BINS + [light] * (num_bins - _HEAVY_BINS))
    quotas = total * weights / weights.sum()
    counts = np.floor(quotas).astype(int)
    short = total - counts.sum()
    for k in np.argsort(-(quotas - counts), kind="stable")[:short]:
        counts[k] += 1
    return counts.tolist()


def mosaic_base(size: int = 512, seed: int = 0, num_bins: int = 36) -> np.ndarray:
    """A sharp, well-exposed, haze-free RGB base image.

    A grid of tiles: 3/8 flat, the rest oriented gratings plus a Nyquist
    checker. Gratings cover every orientation bin with a mild bias toward
    the first bins, so the gradient histogram is neither flat nor peaked.
    """
    if size % _TILE or size < 4 * _TILE:
        raise InputError(f"base size must be a multiple of {_TILE} and >= {4 * _TILE}")
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    g = _LEVEL + _FIELD_AMP * np.cos(2.0 * math.pi * 3.0 * xx / size)
    checker = _CHECKER_AMP * np.where((yy + xx) % 2 == 0, 1.0, -1.0)

    per_side = size // _TILE
    n_tiles = per_side * per_side
    n_flat = 3 * n_tiles // 8
    order = rng.permutation(n_tiles)
    bins = np.repeat(np.arange(num_bins), _bin_allocation(n_tiles - n_flat, num_bins))
    rng.shuffle(bins)
    step = math.pi / num_bins

    for tile, k in zip(order[n_flat:], bins):
        r, c = divmod(int(tile), per_side)
        sl = (slice(r * _TILE, (r + 1) * _TILE), slice(c * _TILE, (c + 1) * _TILE))
        theta = (k + 0.5) * step
        phase = rng.uniform(0.0, 2.0 * math.pi)
        wave = np.sin(2.0 * math.pi * _GRATING_FREQ
                      * (xx[sl] * math.cos(theta) + yy[sl] * math.sin(theta)) + phase)
        g[sl] += _GRATING_AMP * wave + checker[sl]

    return np.repeat(np.clip(g, 0.0, 1.0)[:, :, None], 3, axis=2)


def default_bases(n: int = 3, size: int = 512, seed: int = 0) -> list[np.ndarray]:
    return [mosaic_base(size, seed + i) for i in range(n)]


def base_margins(base: np.ndarray, thresholds: HintThresholds | None = None,
                 params: CueParams | None = None) -> dict[str, float]:
    hints = extract_hints(base, params or CueParams())
    return severity_scores(hints, thresholds)


# ── Generators ───────────────────────────────────────────────────


def _streak_layer(shape, params: dict, rng: np.random.Generator) -> np.ndarray:
    """Max-composited Gaussian-profile line segments."""
    h, w = shape
    layer = np.zeros((h, w))
    width = params["width"]
    reach = int(math.ceil(3.0 * width))
    base_angle = math.radians(params["angle"])
    jitter = math.radians(params["jitter"])
    for _ in range(params["count"]):
        angle = base_angle + rng.uniform(-jitter, jitter)
        length = rng.uniform(*params["length"])
        peak = rng.uniform(*params["intensity"])
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        dy, dx = math.sin(angle), math.cos(angle)
        half = length / 2.0
        y0, y1 = int(max(cy - half * abs(dy) - reach, 0)), int(min(cy + half * abs(dy) + reach + 1, h))
        x0, x1 = int(max(cx - half * abs(dx) - reach, 0)), int(min(cx + half * abs(dx) + reach + 1, w))
        if y0 >= y1 or x0 >= x1:
            continue
        py, px = np.mgrid[y0:y1, x0:x1].astype(np.float64)
        ry, rx = py - cy, px - cx
        t = np.clip(rx * dx + ry * dy, -half, half)
        dist2 = (rx - t * dx) ** 2 + (ry - t * dy) ** 2
        streak = peak * np.exp(-dist2 / (2.0 * width * width))
        np.maximum(layer[y0:y1, x0:x1], streak, out=layer[y0:y1, x0:x1])
    return layer


def _snow_layer(shape, params: dict, rng: np.random.Generator) -> np.ndarray:
    """Disjoint soft discs; overlapping candidates are dropped."""
    h, w = shape
    layer = np.zeros((h, w))
    placed: list[tuple[float, float, float]] = []
    lo, hi = params["radius"]
    for _ in range(params["count"]):
        r = rng.uniform(lo, hi)
        cy, cx = rng.uniform(r, h - r), rng.uniform(r, w - r)
        value = rng.uniform(*params["intensity"])
        if any(math.hypot(cy - y, cx - x) < r + q + 2.0 for y, x, q in placed):
            continue
        placed.append((cy, cx, r))
        y0, y1 = int(max(cy - r - 2, 0)), int(min(cy + r + 3, h))
        x0, x1 = int(max(cx - r - 2, 0)), int(min(cx + r + 3, w))
        py, px = np.mgrid[y0:y1, x0:x1].astype(np.float64)
        d = np.hypot(py - cy, px - cx)
        layer[y0:y1, x0:x1] += value * np.clip(r + 0.5 - d, 0.0, 1.0)
    return layer


def _motion_kernel(length: int, angle_deg: float) -> np.ndarray:
    size = length if length % 2 else length + 1
    kernel = np.zeros((size, size))
    c = size // 2
    a = math.radians(angle_deg)
    for t in np.linspace(-(length - 1) / 2.0, (length - 1) / 2.0, 4 * length):
        kernel[int(round(c + t * math.sin(a))), int(round(c + t * math.cos(a)))] += 1.0
    return kernel / kernel.sum()


def _per_channel(img: np.ndarray, fn) -> np.ndarray:
    if img.ndim == 2:
        return fn(img)
    return np.stack([fn(img[:, :, ch]) for ch in range(img.shape[2])], axis=2)


def _check_factor(img: np.ndarray, factor: int) -> tuple[int, int]:
    if factor < 1:
        raise InputError(f"downscale factor must be >= 1, got {factor}")
    h, w = img.shape[0] // factor, img.shape[1] // factor
    if h < 1 or w < 1:
        raise InputError(f"factor {factor} is too large for image {img.shape[:2]}")
    return h, w


def box_downscale(img: np.ndarray, factor: int) -> np.ndarray:
    """Mean over factor×factor blocks."""
    h, w = _check_factor(img, factor)
    crop = img[: h * factor, : w * factor]
    shape = (h, factor, w, factor) + crop.shape[2:]
    return crop.reshape(shape).mean(axis=(1, 3))


def point_downscale(img: np.ndarray, factor: int) -> np.ndarray:
    """Every factor-th pixel of every factor-th row, starting at the origin."""
    h, w = _check_factor(img, factor)
    return img[: h * factor : factor, : w * factor : factor].copy()


def sr_factor(min_side: int, sr_min_side: int, scale: float, mode: str = "sample") -> int:
    """Downscale factor that brings min_side to about scale·sr_min_side.

    Point sampling uses odd factors so the pixel checker keeps its phase.
    The output never drops below imgstats.MIN_SIDE.
    """
    limit = max(1, min_side // imgstats.MIN_SIDE)
    factor = min(max(1, math.ceil(min_side / (scale * sr_min_side))), limit)
    if mode == "sample" and factor % 2 == 0:
        factor = factor + 1 if factor + 1 <= limit else factor - 1
    return factor


def apply(base, spec: DegradationSpec) -> np.ndarray:
    """Corrupt a clean image with one degradation. Output is clipped to [0, 1]."""
    img = imgstats.as_image(base)
    p = spec.params
    rng = np.random.default_rng(spec.seed)
    h, w = img.shape[:2]

    if spec.kind == "deraining":
        layer = _streak_layer((h, w), p, rng)
        out = img + (layer[:, :, None] if img.ndim == 3 else layer)
    elif spec.kind == "desnowing":
        layer = _snow_layer((h, w), p, rng)
        out = img + (layer[:, :, None] if img.ndim == 3 else layer)
    elif spec.kind == "denoise":
        out = img + rng.normal(0.0, p["sigma"], img.shape)
    elif spec.kind == "deblur":
        if "motion_length" in p:
            kernel = _motion_kernel(int(p["motion_length"]), p.get("angle", 0.0))
            out = _per_channel(img, lambda ch: ndimage.convolve(ch, kernel, mode="nearest"))
        else:
            out = _per_channel(img, lambda ch: imgstats.gaussian_blur(ch, p["sigma"]))
    elif spec.kind == "dehazing":
        depth = np.linspace(1.0, 0.0, h)[:, None] * np.ones((1, w))
        t = np.exp(-p["beta"] * depth)
        if img.ndim == 3:
            t = t[:, :, None]
        out = img * t + p["airlight"] * (1.0 - t)
    elif spec.kind == "light_enhancement":
        out = p["gain"] * img ** p["gamma"]
    elif p.get("mode", "box") == "box":
        out = box_downscale(img, int(p["factor"]))
    else:
        out = point_downscale(img, int(p["factor"]))
    return np.clip(out, 0.0, 1.0)


def _area_count(count_range, shape, rng: np.random.Generator) -> int:
    n = int(rng.integers(count_range[0], count_range[1] + 1))
    return max(1, round(n * shape[0] * shape[1] / _REFERENCE_AREA))


def sample_spec(kind: str, rng: np.random.Generator, ranges: DegradeRanges,
                shape: tuple[int, int], sr_min_side: int = 256) -> DegradationSpec:
    """Draw parameters for one kind within the configured ranges."""
    if kind == "deraining":
        params = {
            "angle": 90.0 + rng.uniform(-ranges.rain_tilt, ranges.rain_tilt),
            "jitter": ranges.rain_jitter,
            "count": _area_count(ranges.rain_count, shape, rng),
            "length": list(ranges.rain_length),
            "intensity": list(ranges.rain_intensity),
            "width": ranges.rain_width,
        }
    elif kind == "desnowing":
        params = {
            "count": _area_count(ranges.snow_count, shape, rng),
            "radius": list(ranges.snow_radius),
            "intensity": list(ranges.snow_intensity),
        }
    elif kind == "denoise":
        params = {"sigma": float(rng.choice(ranges.noise_sigmas)) / 255.0}
    elif kind == "deblur":
        if rng.uniform() < ranges.motion_fraction:
            params = {
                "motion_length": int(rng.integers(ranges.motion_length[0], ranges.motion_length[1] + 1)),
                "angle": float(rng.uniform(0.0, 180.0)),
            }
        else:
            params = {"sigma": float(rng.uniform(*ranges.blur_sigma))}
    elif kind == "dehazing":
        params = {"airlight": float(rng.uniform(*ranges.haze_airlight)),
                  "beta": float(rng.uniform(*ranges.haze_beta))}
    elif kind == "light_enhancement":
        params = {"gain": float(rng.uniform(*ranges.low_gain)),
                  "gamma": float(rng.uniform(*ranges.low_gamma))}
    elif kind == "super_resolution":
        factor = sr_factor(min(shape), sr_min_side, float(rng.uniform(*ranges.sr_scale)), ranges.sr_mode)
        params = {"factor": factor, "mode": ranges.sr_mode}
    else:
        raise InputError(f"unknown degradation kind: {kind!r}")
    return DegradationSpec(kind=kind, params=params, seed=int(rng.integers(0, 2**31 - 1)))


# ── Corpus ───────────────────────────────────────────────────────


@dataclass
class CorpusItem:
    image: np.ndarray
    task: str
    spec: DegradationSpec

    def __iter__(self):
        yield self.image
        yield self.task


def validate_bases(bases, thresholds: HintThresholds | None = None,
                   params: CueParams | None = None) -> list[np.ndarray]:
    """Keep only bases on which no rule fires."""
    kept = []
    for i, base in enumerate(bases):
        margins = base_margins(base, thresholds, params)
        fired = {t: m for t, m in margins.items() if m > 0.0}
        if fired:
            detail = ", ".join(f"{t}={m:.3f}" for t, m in sorted(fired.items()))
            logger.warning("base %d rejected: rules fire (%s)", i, detail)
            continue
        kept.append(imgstats.as_image(base))
    return kept


def make_corpus(bases, n_per_class: int, seed: int = 0, *,
                ranges: DegradeRanges | None = None,
                thresholds: HintThresholds | None = None,
                params: CueParams | None = None,
                check_bases: bool = True,
                jobs: int = 1) -> list[CorpusItem]:
    """n_per_class degraded images per task, in task priority order."""
    if n_per_class < 0:
        raise InputError(f"n_per_class must be >= 0, got {n_per_class}")
    if not bases:
        raise CorpusError("no base images given")
    ranges = ranges or DegradeRanges()
    thresholds = thresholds or HintThresholds()
    pool = validate_bases(bases, thresholds, params) if check_bases else [imgstats.as_image(b) for b in bases]
    if not pool:
        raise CorpusError("every base image fires a degradation rule")

    def build(index: int) -> CorpusItem:
        kind = KINDS[index // n_per_class]
        rng = np.random.default_rng([seed, index])
        base = pool[int(rng.integers(len(pool)))]
        spec = sample_spec(kind, rng, ranges, base.shape[:2], thresholds.sr_min_side)
        logger.debug("corpus item %d: %s %s", index, kind, spec.params)
        return CorpusItem(apply(base, spec), kind, spec)

    indices = range(len(KINDS) * n_per_class)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            return list(executor.map(build, indices))
    return [build(i) for i in indices]


def write_corpus(items: list[CorpusItem], out_dir: str | Path) -> Path:
    """Write PNGs plus manifest.jsonl; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.jsonl"
    lines = []
    for i, item in enumerate(items):
        name = f"{i:05d}_{item.task}.png"
        pngio.save_png(out_dir / name, item.image)
        lines.append(json.dumps({"path": name, "task": item.task, "spec": item.spec.to_dict()},
                                sort_keys=True))
    manifest.write_text("\n".join(lines) + ("\n" if lines else ""))
    logger.info("wrote %d images to %s", len(items), out_dir)
    return manifest


def read_manifest(path: str | Path) -> list[tuple[Path, str, DegradationSpec]]:
    """Parse a manifest; image paths resolve against its directory."""
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"manifest not found: {path}")
    entries = []
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            entry = (path.parent / rec["path"], rec["task"], DegradationSpec.from_dict(rec["spec"]))
        except (ValueError, KeyError, TypeError) as exc:
            raise CorpusError(f"{path}:{lineno}: bad manifest line ({exc})") from None
        if entry[1] not in KINDS:
            raise CorpusError(f"{path}:{lineno}: unknown task {entry[1]!r}")
        if not entry[0].is_file():
            logger.warning("%s:%d: missing image %s", path, lineno, entry[0])
        entries.append(entry)
    return entries
