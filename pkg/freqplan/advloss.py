# SPDX-License-Identifier: MIT
# Copyright (c) 2026 Mat McGowan
"""Adversarial objective: critic head, discriminator and generator losses.

The critic emits raw scores. discriminator_loss squashes them through the
logistic before taking logs; generator_loss uses the raw fake score in its
linear adversarial term. Feature maps are C×H×W float64 arrays.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import attr
import numpy as np
from scipy import ndimage
from scipy.special import expit

from .errors import ConfigError, InputError

logger = logging.getLogger(__name__)

LOG_CLAMP = 1e-7
_BINOMIAL = np.array([1.0, 2.0, 1.0]) / 4.0


def _non_negative(instance, attribute, value):
    if value < 0:
        raise ConfigError(f"{attribute.name} must be >= 0, got {value}")


@attr.s(frozen=True)
class LossConfig:
    """Weights of the pixel, perceptual, adversarial and frequency terms."""

    alpha = attr.ib(default=50.0, converter=float, validator=_non_negative)
    beta = attr.ib(default=5.0, converter=float, validator=_non_negative)
    lam = attr.ib(default=0.5, converter=float, validator=_non_negative)
    gamma = attr.ib(default=1e-3, converter=float, validator=_non_negative)
    power_iterations = attr.ib(default=1, converter=int)

    @power_iterations.validator
    def _check_iterations(self, attribute, value):
        if value < 1:
            raise ConfigError(f"power_iterations must be >= 1, got {value}")


# ── Spectral normalization ───────────────────────────────────────


def _l2normalize(v: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    return v / (np.linalg.norm(v) + eps)


class SpectralNorm:
    """Power-iteration estimate of a matrix's top singular value.

    The left/right vectors persist between calls so repeated calls on a
    slowly changing weight warm-start. Not safe for concurrent use.
    """

    def __init__(self, shape: tuple[int, int], seed: int = 0):
        rng = np.random.default_rng(seed)
        self.u = _l2normalize(rng.normal(size=shape[0]))
        self.v = _l2normalize(rng.normal(size=shape[1]))
        self.flags: list[str] = []

    def __call__(self, weight, iterations: int = 1) -> tuple[np.ndarray, float]:
        w = np.asarray(weight, dtype=np.float64)
        if w.ndim != 2 or w.shape != (self.u.size, self.v.size):
            raise InputError(f"weight shape {w.shape} does not match ({self.u.size}, {self.v.size})")
        if iterations < 1:
            raise InputError(f"iterations must be >= 1, got {iterations}")
        if not np.any(w):
            if "zero_matrix" not in self.flags:
                self.flags.append("zero_matrix")
            return w.copy(), 0.0
        for _ in range(iterations):
            self.v = _l2normalize(w.T @ self.u)
            self.u = _l2normalize(w @ self.v)
        sigma = float(self.u @ w @ self.v)
        return w / sigma, sigma


def spectral_normalize(weight, iterations: int = 1,
                       state: SpectralNorm | None = None) -> tuple[np.ndarray, float]:
    """weight / σ̂ and σ̂. Pass `state` to carry the iteration vectors across calls."""
    w = np.asarray(weight, dtype=np.float64)
    if w.ndim != 2:
        raise InputError(f"expected a matrix, got shape {w.shape}")
    state = state or SpectralNorm(w.shape)
    return state(w, iterations)


# ── Anti-aliased downsampling ────────────────────────────────────


def blurpool_downsample(fmap) -> np.ndarray:
    """1-2-1 binomial blur per channel, then keep every second row and column."""
    fmap = np.asarray(fmap, dtype=np.float64)
    if fmap.ndim != 3 or fmap.shape[1] < 2 or fmap.shape[2] < 2:
        raise InputError(f"expected a C×H×W map with H, W >= 2, got shape {fmap.shape}")
    out = ndimage.correlate1d(fmap, _BINOMIAL, axis=1, mode="nearest")
    out = ndimage.correlate1d(out, _BINOMIAL, axis=2, mode="nearest")
    return out[:, ::2, ::2]


# ── Critic ───────────────────────────────────────────────────────


@dataclass
class CriticFeatures:
    levels: list[np.ndarray]
    pooled: np.ndarray

    def __post_init__(self):
        if not self.levels:
            raise InputError("critic features need at least one level")
        self.levels = [np.asarray(f, dtype=np.float64) for f in self.levels]
        self.pooled = np.asarray(self.pooled, dtype=np.float64).ravel()
        for i, f in enumerate(self.levels):
            if f.ndim != 3:
                raise InputError(f"level {i} must be C×H×W, got shape {f.shape}")
        if not all(np.all(np.isfinite(f)) for f in self.levels) or not np.all(np.isfinite(self.pooled)):
            raise InputError("critic features contain non-finite values")


@dataclass
class CriticScore:
    level_means: list[float]
    pooled_score: float

    @property
    def aggregate(self) -> float:
        return (sum(self.level_means) + self.pooled_score) / (len(self.level_means) + 1)


class CriticHead:
    """Shallow per-level 1×1 mixes plus a pooled linear path, all spectrally normalized."""

    def __init__(self, level_weights, pooled_weight, level_bias=None, pooled_bias: float = 0.0,
                 iterations: int = 1, seed: int = 0):
        self.level_weights = [np.atleast_2d(np.asarray(w, dtype=np.float64)) for w in level_weights]
        self.pooled_weight = np.atleast_2d(np.asarray(pooled_weight, dtype=np.float64))
        self.level_bias = list(level_bias) if level_bias is not None else [0.0] * len(self.level_weights)
        if len(self.level_bias) != len(self.level_weights):
            raise InputError("one bias per level is required")
        self.pooled_bias = float(pooled_bias)
        self.iterations = iterations
        self._norms = [SpectralNorm(w.shape, seed + i) for i, w in enumerate(self.level_weights)]
        self._pooled_norm = SpectralNorm(self.pooled_weight.shape, seed + len(self.level_weights))

    @classmethod
    def random(cls, channels: list[int], pooled_dim: int, seed: int = 0,
               iterations: int = 1) -> "CriticHead":
        rng = np.random.default_rng(seed)
        return cls([rng.normal(size=(1, c)) for c in channels], rng.normal(size=(1, pooled_dim)),
                   iterations=iterations, seed=seed)

    def normalized(self) -> tuple[list[np.ndarray], np.ndarray]:
        mixes = [norm(w, self.iterations)[0] for norm, w in zip(self._norms, self.level_weights)]
        pooled = self._pooled_norm(self.pooled_weight, self.iterations)[0]
        return mixes, pooled

    def mix(self, level: int, channels_vec) -> np.ndarray:
        """The normalized 1×1 map of one level applied to channel vectors (..., C)."""
        w, _ = self._norms[level](self.level_weights[level], self.iterations)
        return np.asarray(channels_vec, dtype=np.float64) @ w.T


def critic_score(f: CriticFeatures, head: CriticHead) -> CriticScore:
    if len(f.levels) != len(head.level_weights):
        raise InputError(f"{len(f.levels)} feature levels for a {len(head.level_weights)}-level head")
    mixes, pooled_w = head.normalized()
    means = []
    for i, (fmap, w, b) in enumerate(zip(f.levels, mixes, head.level_bias)):
        if w.shape[1] != fmap.shape[0]:
            raise InputError(f"level {i}: head expects {w.shape[1]} channels, features have {fmap.shape[0]}")
        score_map = np.tensordot(w, fmap, axes=([1], [0])) + b
        means.append(float(blurpool_downsample(score_map).mean()))
    if pooled_w.shape[1] != f.pooled.size:
        raise InputError(f"pooled head expects {pooled_w.shape[1]} values, got {f.pooled.size}")
    pooled = float((pooled_w @ f.pooled)[0]) + head.pooled_bias
    return CriticScore(means, pooled)


class RandomFeatureStack:
    """Fixed, seeded random multi-scale conv features standing in for a frozen encoder."""

    def __init__(self, channels: tuple[int, ...] = (8, 16), pooled_dim: int = 16, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.kernels = []
        c_in = 3
        for c_out in channels:
            self.kernels.append(rng.normal(scale=1.0 / (3.0 * np.sqrt(c_in)), size=(c_out, c_in, 3, 3)))
            c_in = c_out
        self.projection = rng.normal(scale=1.0 / np.sqrt(c_in), size=(pooled_dim, c_in))

    @property
    def channels(self) -> list[int]:
        return [k.shape[0] for k in self.kernels]

    def features(self, img) -> CriticFeatures:
        img = np.asarray(img, dtype=np.float64)
        x = np.repeat(img[None], 3, axis=0) if img.ndim == 2 else np.moveaxis(img, 2, 0)
        levels = []
        for i, kernel in enumerate(self.kernels):
            if i:
                x = blurpool_downsample(x)
            out = np.zeros((kernel.shape[0],) + x.shape[1:])
            for o in range(kernel.shape[0]):
                for c in range(kernel.shape[1]):
                    out[o] += ndimage.correlate(x[c], kernel[o, c], mode="nearest")
            x = np.tanh(out)
            levels.append(x)
        pooled = self.projection @ x.mean(axis=(1, 2))
        return CriticFeatures(levels, pooled)

    def perceptual(self, img) -> np.ndarray:
        """φ(img): per-level channel means followed by the pooled vector."""
        f = self.features(img)
        return np.concatenate([lvl.mean(axis=(1, 2)) for lvl in f.levels] + [f.pooled])


# ── Losses ───────────────────────────────────────────────────────


def discriminator_loss(d_real, d_fake) -> float:
    """−E[log σ(d_real)] − E[log(1 − σ(d_fake))], logs clamped at 1e-7."""
    real = np.atleast_1d(np.asarray(d_real, dtype=np.float64))
    fake = np.atleast_1d(np.asarray(d_fake, dtype=np.float64))
    p_real = np.maximum(expit(real), LOG_CLAMP)
    q_fake = np.maximum(expit(-fake), LOG_CLAMP)
    return float(-np.log(p_real).mean() - np.log(q_fake).mean())


def discriminator_loss_grad(d_real, d_fake) -> tuple[np.ndarray, np.ndarray]:
    real = np.atleast_1d(np.asarray(d_real, dtype=np.float64))
    fake = np.atleast_1d(np.asarray(d_fake, dtype=np.float64))
    g_real = np.where(expit(real) > LOG_CLAMP, -expit(-real), 0.0) / real.size
    g_fake = np.where(expit(-fake) > LOG_CLAMP, expit(fake), 0.0) / fake.size
    return g_real, g_fake


@dataclass
class GeneratorTerms:
    total: float
    mse: float
    perceptual: float
    adversarial: float

    def to_dict(self) -> dict:
        return {"total": self.total, "mse": self.mse, "perceptual": self.perceptual,
                "adversarial": self.adversarial}


def generator_loss(x_hat, x, features_hat, features_x, d_fake,
                   cfg: LossConfig | None = None) -> GeneratorTerms:
    """α·MSE(x̂, x) + β·MSE(φ(x̂), φ(x)) − λ·E[d_fake] on raw scores."""
    cfg = cfg or LossConfig()
    x_hat, x = np.asarray(x_hat, dtype=np.float64), np.asarray(x, dtype=np.float64)
    f_hat, f_x = np.asarray(features_hat, dtype=np.float64), np.asarray(features_x, dtype=np.float64)
    if x_hat.shape != x.shape:
        raise InputError(f"image shapes differ: {x_hat.shape} vs {x.shape}")
    if f_hat.shape != f_x.shape:
        raise InputError(f"feature shapes differ: {f_hat.shape} vs {f_x.shape}")
    mse = float(np.mean((x_hat - x) ** 2))
    perceptual = float(np.mean((f_hat - f_x) ** 2)) if f_hat.size else 0.0
    adversarial = -cfg.lam * float(np.mean(d_fake))
    total = cfg.alpha * mse + cfg.beta * perceptual + adversarial
    return GeneratorTerms(total, mse, perceptual, adversarial)


def generator_loss_grad(x_hat, x, features_hat, features_x, d_fake,
                        cfg: LossConfig | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of the total with respect to x̂, φ(x̂) and d_fake."""
    cfg = cfg or LossConfig()
    x_hat, x = np.asarray(x_hat, dtype=np.float64), np.asarray(x, dtype=np.float64)
    f_hat, f_x = np.asarray(features_hat, dtype=np.float64), np.asarray(features_x, dtype=np.float64)
    d_fake = np.atleast_1d(np.asarray(d_fake, dtype=np.float64))
    g_x = 2.0 * cfg.alpha * (x_hat - x) / x_hat.size
    g_f = 2.0 * cfg.beta * (f_hat - f_x) / max(f_hat.size, 1)
    g_d = np.full(d_fake.shape, -cfg.lam / d_fake.size)
    return g_x, g_f, g_d


def total_objective(gen_terms: GeneratorTerms, freq_term: float, cfg: LossConfig | None = None) -> float:
    cfg = cfg or LossConfig()
    return gen_terms.total + cfg.gamma * float(freq_term)


def evaluate_pair(x_hat, x, cfg: LossConfig | None = None, seed: int = 0,
                  freq_term: float = 0.0) -> dict:
    """Every loss component for a restored/reference image pair."""
    cfg = cfg or LossConfig()
    stack = RandomFeatureStack(seed=seed)
    head = CriticHead.random(stack.channels, stack.projection.shape[0], seed=seed,
                             iterations=cfg.power_iterations)
    f_hat, f_x = stack.features(x_hat), stack.features(x)
    d_fake = critic_score(f_hat, head).aggregate
    d_real = critic_score(f_x, head).aggregate
    terms = generator_loss(x_hat, x, stack.perceptual(x_hat), stack.perceptual(x), d_fake, cfg)
    logger.debug("critic: d_real=%.4f d_fake=%.4f", d_real, d_fake)
    return {
        "d_real": d_real,
        "d_fake": d_fake,
        "discriminator": discriminator_loss(d_real, d_fake),
        "generator": terms.to_dict(),
        "total": total_objective(terms, freq_term, cfg),
    }
