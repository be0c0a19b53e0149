# SPDX-License-Identifier: MIT
# Copyright (c) 2026 Mat McGowan
"""Frequency-aware routing between a low-band and a high-band LoRA expert.

Token sequences are float64 arrays shaped B×L×D. A Gaussian FIR along the
token axis splits each sequence into a low band and its high-pass residue;
the relative band energy gives a visual gate, a token-wise linear map over
the planner's text tokens gives a text gate, and the two are mixed by a
scalar λ_s before a top-1 selection picks the expert.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import attr
import numpy as np
from scipy.special import expit, softmax

from .errors import ConfigError, InputError

logger = logging.getLogger(__name__)

ENERGY_EPS = 1e-12
GRANULARITIES = ("sequence", "token")
MODES = ("fused", "text", "visual")


@dataclass(frozen=True)
class FirKernel:
    taps: np.ndarray

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.size % 2 == 0:
            raise InputError(f"FIR kernel needs an odd number of taps, got {taps.size}")
        object.__setattr__(self, "taps", taps)

    @property
    def size(self) -> int:
        return self.taps.size


def gaussian_kernel(size: int = 9, sigma: float = 2.0) -> FirKernel:
    """Symmetric Gaussian taps, renormalized after truncation to `size`."""
    if size < 1 or size % 2 == 0:
        raise InputError(f"kernel size must be odd and positive, got {size}")
    if sigma <= 0:
        raise InputError(f"kernel sigma must be positive, got {sigma}")
    k = np.arange(size) - size // 2
    taps = np.exp(-(k * k) / (2.0 * sigma * sigma))
    return FirKernel(taps / taps.sum())


def delta_kernel() -> FirKernel:
    return FirKernel(np.array([1.0]))


def _odd_positive(instance, attribute, value):
    if value < 1 or value % 2 == 0:
        raise ConfigError(f"{attribute.name} must be odd and positive, got {value}")


def _positive(instance, attribute, value):
    if not value > 0:
        raise ConfigError(f"{attribute.name} must be positive, got {value}")


@attr.s(frozen=True)
class RouterConfig:
    """Router settings. λ_s is stored unconstrained and squashed on use."""

    lambda_s_raw = attr.ib(default=0.0, converter=float)
    temperature = attr.ib(default=1.0, converter=float, validator=_positive)
    kernel_size = attr.ib(default=9, converter=int, validator=_odd_positive)
    kernel_sigma = attr.ib(default=2.0, converter=float, validator=_positive)
    num_experts = attr.ib(default=2, converter=int)
    granularity = attr.ib(default="sequence", validator=attr.validators.in_(GRANULARITIES))
    mode = attr.ib(default="fused", validator=attr.validators.in_(MODES))

    @num_experts.validator
    def _check_experts(self, attribute, value):
        if value < 1:
            raise ConfigError(f"num_experts must be >= 1, got {value}")
        if value != 2 and self.mode != "text":
            raise ConfigError("the spectral gate routes between exactly 2 experts")

    @property
    def lambda_s(self) -> float:
        return float(expit(self.lambda_s_raw))

    @property
    def kernel(self) -> FirKernel:
        return gaussian_kernel(self.kernel_size, self.kernel_sigma)


@dataclass
class GateWeights:
    """Gate values, B×L×N token-wise or B×N per sequence."""

    values: np.ndarray
    granularity: str = "token"


def as_tokens(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[1] < 1 or arr.shape[2] < 1:
        raise InputError(f"expected a B×L×D token tensor, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("token tensor contains non-finite values")
    return arr


# ── Band split ───────────────────────────────────────────────────


def fir_matrix(length: int, g: FirKernel) -> np.ndarray:
    """The L×L operator of fir_lowpass on one (batch, channel) column."""
    c = g.size // 2
    m = np.zeros((length, length))
    rows = np.arange(length)
    for k, tap in enumerate(g.taps):
        cols = np.clip(rows + k - c, 0, length - 1)
        np.add.at(m, (rows, cols), tap)
    return m


def fir_lowpass(x, g: FirKernel) -> np.ndarray:
    """Depthwise convolution along tokens with edge-replicate padding."""
    x = as_tokens(x)
    length = x.shape[1]
    if g.size > 2 * length + 1:
        raise InputError(f"kernel size {g.size} exceeds 2L+1 = {2 * length + 1}")
    c = g.size // 2
    padded = np.pad(x, ((0, 0), (c, c), (0, 0)), mode="edge")
    out = np.zeros_like(x)
    for k, tap in enumerate(g.taps):
        out += tap * padded[:, k:k + length, :]
    return out


def fir_highpass(x, g: FirKernel) -> np.ndarray:
    x = as_tokens(x)
    return x - fir_lowpass(x, g)


def band_energy(x, g: FirKernel) -> tuple[np.ndarray, np.ndarray]:
    """Per-token (p_low, p_high), each B×L."""
    x = as_tokens(x)
    low = fir_lowpass(x, g)
    e_low = np.sum(low * low, axis=2)
    high = x - low
    e_high = np.sum(high * high, axis=2)
    total = e_low + e_high
    p_low = np.where(total > ENERGY_EPS, e_low / (total + ENERGY_EPS), 0.5)
    return p_low, 1.0 - p_low


def spectral_gate(x, cfg: RouterConfig | None = None) -> GateWeights:
    """w_visual: softmax([p_low, p_high] / τ) per token."""
    cfg = cfg or RouterConfig()
    p_low, p_high = band_energy(x, cfg.kernel)
    logits = np.stack([p_low, p_high], axis=2) / cfg.temperature
    return GateWeights(softmax(logits, axis=2))


def spectral_gate_grad(x, cfg: RouterConfig | None = None, cotangent=None) -> np.ndarray:
    """Gradient of Σ cotangent·p_low with respect to x (cotangent defaults to ones)."""
    cfg = cfg or RouterConfig()
    x = as_tokens(x)
    m = fir_matrix(x.shape[1], cfg.kernel)
    low = np.einsum("ij,bjd->bid", m, x)
    high = x - low
    e_low = np.sum(low * low, axis=2)
    e_high = np.sum(high * high, axis=2)
    total = e_low + e_high
    s = total + ENERGY_EPS
    c = np.ones_like(e_low) if cotangent is None else np.asarray(cotangent, dtype=np.float64)
    live = total > ENERGY_EPS
    d_low = np.where(live, c * (e_high + ENERGY_EPS) / (s * s), 0.0)
    d_high = np.where(live, -c * e_low / (s * s), 0.0)
    g_low = 2.0 * d_low[:, :, None] * low
    g_high = 2.0 * d_high[:, :, None] * high
    return np.einsum("ji,bjd->bid", m, g_low - g_high) + g_high


# ── Text gate and fusion ─────────────────────────────────────────


def text_gate(h_text, target_len: int, weight) -> GateWeights:
    """Right-pad K text tokens to L, map D→N token-wise, softmax over experts."""
    h_text = as_tokens(h_text)
    weight = np.asarray(weight, dtype=np.float64)
    b, k, d = h_text.shape
    if k > target_len:
        raise InputError(f"text length {k} exceeds target length {target_len}")
    if weight.ndim != 2 or weight.shape[0] != d:
        raise InputError(f"weight must be {d}×N, got shape {weight.shape}")
    padded = np.zeros((b, target_len, d))
    padded[:, :k, :] = h_text
    return GateWeights(softmax(padded @ weight, axis=2))


def fuse_and_route(w_text: GateWeights, w_visual: GateWeights, cfg: RouterConfig | None = None,
                   lambda_s: float | None = None) -> tuple[GateWeights, np.ndarray]:
    """Mix the gates token-wise and pick one expert.

    Returns the token-wise fused gate and a one-hot selection, B×N for
    sequence granularity (token mean first) or B×L×N per token. Ties go to
    the lower expert index.
    """
    cfg = cfg or RouterConfig()
    lam = cfg.lambda_s if lambda_s is None else float(lambda_s)
    if not 0.0 <= lam <= 1.0:
        raise InputError(f"lambda_s must lie in [0, 1], got {lam}")
    if cfg.mode == "text":
        fused = np.array(w_text.values, dtype=np.float64)
    elif cfg.mode == "visual":
        fused = np.array(w_visual.values, dtype=np.float64)
    else:
        if np.shape(w_text.values) != np.shape(w_visual.values):
            raise InputError(f"gate shapes differ: {np.shape(w_text.values)} vs {np.shape(w_visual.values)}")
        fused = lam * w_text.values + (1.0 - lam) * w_visual.values

    scores = fused.mean(axis=1) if cfg.granularity == "sequence" else fused
    choice = np.argmax(scores, axis=-1)
    selection = np.zeros_like(scores)
    np.put_along_axis(selection, choice[..., None], 1.0, axis=-1)
    return GateWeights(fused, "token"), selection


@dataclass
class RoutingResult:
    w_text: GateWeights
    w_visual: GateWeights
    fused: GateWeights
    selection: np.ndarray
    p_low: np.ndarray

    @property
    def chosen(self) -> np.ndarray:
        return np.argmax(self.selection, axis=-1)

    def to_dict(self) -> dict:
        return {
            "p_low": self.p_low.tolist(),
            "w_text": self.w_text.values.tolist(),
            "w_visual": self.w_visual.values.tolist(),
            "fused": self.fused.values.tolist(),
            "selection": self.selection.tolist(),
            "chosen": self.chosen.tolist(),
        }


def route(x, h_text, weight, cfg: RouterConfig | None = None) -> RoutingResult:
    """Text gate, spectral gate, fusion and top-1 in one call."""
    cfg = cfg or RouterConfig()
    x = as_tokens(x)
    w_text = text_gate(h_text, x.shape[1], weight)
    w_visual = spectral_gate(x, cfg)
    p_low, _ = band_energy(x, cfg.kernel)
    fused, selection = fuse_and_route(w_text, w_visual, cfg)
    result = RoutingResult(w_text, w_visual, fused, selection, p_low)
    logger.debug("route: mode=%s lambda_s=%.3f chosen=%s", cfg.mode, cfg.lambda_s, result.chosen.tolist())
    return result


# ── LoRA experts ─────────────────────────────────────────────────


@dataclass
class LoraExpert:
    a_matrix: np.ndarray
    b_matrix: np.ndarray

    def __post_init__(self):
        self.a_matrix = np.asarray(self.a_matrix, dtype=np.float64)
        self.b_matrix = np.asarray(self.b_matrix, dtype=np.float64)
        if self.a_matrix.ndim != 2 or self.b_matrix.ndim != 2 \
                or self.a_matrix.shape[1] != self.b_matrix.shape[0]:
            raise InputError(f"LoRA factors do not conform: {self.a_matrix.shape} · {self.b_matrix.shape}")

    @property
    def rank(self) -> int:
        return self.a_matrix.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.a_matrix.shape[0], self.b_matrix.shape[1]

    def delta(self) -> np.ndarray:
        return self.a_matrix @ self.b_matrix


def lora_merge(base, experts: list[LoraExpert], alpha) -> np.ndarray:
    """W + Σ α_i A_i B_i. `base` is left untouched."""
    base = np.asarray(base, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64).ravel()
    if alpha.size != len(experts):
        raise InputError(f"{alpha.size} coefficients for {len(experts)} experts")
    merged = base.copy()
    for i, (expert, a) in enumerate(zip(experts, alpha)):
        if expert.shape != base.shape:
            raise InputError(f"expert {i} is {expert.shape}, base is {base.shape}")
        merged += a * expert.delta()
    return merged


def lora_apply(x, base, experts: list[LoraExpert], alpha) -> np.ndarray:
    """Token rows (..., d_in) through the merged weight."""
    x = np.asarray(x, dtype=np.float64)
    return x @ lora_merge(base, experts, alpha).T


# ── Band regularizer ─────────────────────────────────────────────


def freq_regularizer(y_low, y_high, g: FirKernel) -> float:
    """mean[‖highpass(y_low)‖² + ‖lowpass(y_high)‖²] over elements."""
    y_low, y_high = as_tokens(y_low), as_tokens(y_high)
    if y_low.shape != y_high.shape:
        raise InputError(f"band outputs differ in shape: {y_low.shape} vs {y_high.shape}")
    leak_high = fir_highpass(y_low, g)
    leak_low = fir_lowpass(y_high, g)
    return float(np.sum(leak_high ** 2 + leak_low ** 2) / y_low.size)


def freq_regularizer_grad(y_low, y_high, g: FirKernel) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of freq_regularizer with respect to y_low and y_high."""
    y_low, y_high = as_tokens(y_low), as_tokens(y_high)
    m = fir_matrix(y_low.shape[1], g)
    hp = np.eye(m.shape[0]) - m
    scale = 2.0 / y_low.size
    leak_high = np.einsum("ij,bjd->bid", hp, y_low)
    leak_low = np.einsum("ij,bjd->bid", m, y_high)
    return (scale * np.einsum("ji,bjd->bid", hp, leak_high),
            scale * np.einsum("ji,bjd->bid", m, leak_low))


def freq_regularizer_layers(layers, g: FirKernel) -> float:
    """Sum of the regularizer over (y_low, y_high) pairs, one per layer."""
    return math.fsum(freq_regularizer(lo, hi, g) for lo, hi in layers)
