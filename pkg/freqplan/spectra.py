# SPDX-License-Identifier: MIT
# Copyright (c) 2026 Mat McGowan
"""Spectral weights of linear-Gaussian restoration and two transport bounds.

Frequencies are radial norms ‖ω‖ ≥ 0. The clean-image prior is the power
law S_xx(ω) = ‖ω‖^(−κ), floored at omega_min so tabulations stay finite.
"""

from __future__ import annotations

import csv
import io
import logging
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import attr
import numpy as np

from .errors import ConfigError, InputError

logger = logging.getLogger(__name__)

OPERATORS = {"identity": 0, "gaussian_blur": 1, "ideal_lowpass": 1, "mask_band": 2}
_OP_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\(([^)]*)\))?\s*$")


@dataclass(frozen=True)
class Operator:
    """Radial frequency response |Ĥ(ω)| of a named degradation."""

    name: str
    args: tuple[float, ...] = ()

    def __post_init__(self):
        if self.name not in OPERATORS:
            raise ConfigError(f"unknown operator {self.name!r}; known: {', '.join(OPERATORS)}")
        if len(self.args) != OPERATORS[self.name]:
            raise ConfigError(f"{self.name} takes {OPERATORS[self.name]} argument(s), got {len(self.args)}")
        if self.name == "mask_band" and self.args[0] > self.args[1]:
            raise ConfigError(f"mask_band needs lo <= hi, got {self.args}")
        if any(a < 0 for a in self.args):
            raise ConfigError(f"{self.name} arguments must be >= 0, got {self.args}")

    def __call__(self, omega) -> np.ndarray:
        w = np.asarray(omega, dtype=np.float64)
        if self.name == "identity":
            return np.ones_like(w)
        if self.name == "gaussian_blur":
            s = self.args[0]
            return np.exp(-0.5 * (s * w) ** 2)
        if self.name == "ideal_lowpass":
            return np.where(w <= self.args[0], 1.0, 0.0)
        lo, hi = self.args
        return np.where((w >= lo) & (w <= hi), 0.0, 1.0)

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(repr(a) for a in self.args)})"


def parse_operator(text) -> Operator:
    """'ideal_lowpass(0.25)' -> Operator('ideal_lowpass', (0.25,))."""
    if isinstance(text, Operator):
        return text
    m = _OP_RE.match(str(text))
    if not m:
        raise ConfigError(f"cannot parse operator {text!r}")
    raw = m.group(2)
    try:
        args = tuple(float(a) for a in raw.split(",")) if raw and raw.strip() else ()
    except ValueError:
        raise ConfigError(f"bad operator arguments in {text!r}") from None
    return Operator(m.group(1), args)


def _positive(instance, attribute, value):
    if not value > 0:
        raise ConfigError(f"{attribute.name} must be positive, got {value}")


@attr.s(frozen=True)
class SpectralConfig:
    kappa = attr.ib(default=2.0, converter=float, validator=_positive)
    sigma_eta = attr.ib(default=0.1, converter=float, validator=_positive)
    sigma_t = attr.ib(default=1.0, converter=float)
    h_hat = attr.ib(default="identity", converter=parse_operator)
    omega_min = attr.ib(default=1.0 / 1024.0, converter=float, validator=_positive)

    @sigma_t.validator
    def _check_sigma_t(self, attribute, value):
        if value < 0:
            raise ConfigError(f"sigma_t must be >= 0, got {value}")


def power_spectrum(omega, cfg: SpectralConfig) -> np.ndarray:
    w = np.maximum(np.asarray(omega, dtype=np.float64), cfg.omega_min)
    return w ** (-cfg.kappa)


def xi_lg(omega, cfg: SpectralConfig | None = None, h=None, flags: list[str] | None = None):
    """|Ĥ|² / (σ_η² + |Ĥ|² S_xx); zero at DC.

    `h` overrides the configured response with explicit |Ĥ(ω)| values.
    """
    cfg = cfg or SpectralConfig()
    w = np.asarray(omega, dtype=np.float64)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InputError("frequencies must be finite and >= 0")
    h2 = (cfg.h_hat(w) if h is None else np.asarray(h, dtype=np.float64)) ** 2
    xi = h2 / (cfg.sigma_eta ** 2 + h2 * power_spectrum(w, cfg))
    dc = w == 0
    if np.any(dc):
        if flags is not None and "dc_excluded" not in flags:
            flags.append("dc_excluded")
        xi = np.where(dc, 0.0, xi)
    return float(xi) if np.ndim(xi) == 0 else xi


def fm_weight(omega, xi, sigma_t: float):
    """W̃ = ω² exp(−σ_t² ω²) Ξ."""
    w = np.asarray(omega, dtype=np.float64)
    out = w * w * np.exp(-(sigma_t * w) ** 2) * np.asarray(xi, dtype=np.float64)
    return float(out) if np.ndim(out) == 0 else out


def tabulate(cfg: SpectralConfig, omegas: Iterable[float]) -> list[tuple[float, float, float, float]]:
    """(omega, h_hat, xi, w_tilde) per grid point."""
    w = np.asarray(list(omegas), dtype=np.float64)
    if w.size == 0:
        return []
    h = cfg.h_hat(w)
    flags: list[str] = []
    xi = np.atleast_1d(xi_lg(w, cfg, h=h, flags=flags))
    wt = np.atleast_1d(fm_weight(w, xi, cfg.sigma_t))
    if flags:
        logger.debug("tabulate: %s", ", ".join(flags))
    return [(float(a), float(b), float(c), float(d)) for a, b, c, d in zip(w, h, xi, wt)]


def to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["omega", "h_hat", "xi", "w_tilde"])
    for row in rows:
        writer.writerow([f"{v:.10g}" for v in row])
    return buf.getvalue()


def parse_grid(text: str) -> list[float]:
    """'start:stop:count' (inclusive linspace) or a comma list. Empty gives []."""
    text = text.strip()
    if not text:
        return []
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            return np.linspace(float(start), float(stop), int(count)).tolist()
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"bad frequency grid {text!r}") from None


# ── Accumulation and transport ───────────────────────────────────


def tv_accumulation(eps: Sequence[float]) -> tuple[float, float]:
    """(1 − Π(1 − ε_t), Σ ε_t)."""
    e = np.asarray(list(eps), dtype=np.float64)
    if np.any((e < 0) | (e > 1)) or not np.all(np.isfinite(e)):
        raise InputError("every deviation must lie in [0, 1]")
    return float(1.0 - np.prod(1.0 - e)), float(e.sum())


@dataclass
class DiscreteDist1D:
    support: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=np.float64).ravel()
        self.masses = np.asarray(self.masses, dtype=np.float64).ravel()
        if self.support.size == 0 or self.support.size != self.masses.size:
            raise InputError("support and masses must be non-empty and the same length")
        if np.any(np.diff(self.support) <= 0):
            raise InputError("support must be strictly increasing")
        if np.any(self.masses < 0) or abs(self.masses.sum() - 1.0) > 1e-12:
            raise InputError(f"masses must be non-negative and sum to 1, got {self.masses.sum()!r}")

    @classmethod
    def point(cls, x: float) -> "DiscreteDist1D":
        return cls(np.array([x]), np.array([1.0]))

    @classmethod
    def from_weights(cls, support, weights) -> "DiscreteDist1D":
        """Sort the support and normalize the weights."""
        support = np.asarray(support, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        order = np.argsort(support, kind="stable")
        return cls(support[order], weights[order] / weights.sum())

    def cdf(self, x) -> np.ndarray:
        idx = np.searchsorted(self.support, x, side="right")
        cum = np.concatenate([[0.0], np.cumsum(self.masses)])
        return cum[idx]


def w1_distance(p: DiscreteDist1D, q: DiscreteDist1D) -> float:
    """Exact 1-D W1: ∫ |F_p − F_q| over the merged support."""
    grid = np.union1d(p.support, q.support)
    if grid.size < 2:
        return 0.0
    diff = np.abs(p.cdf(grid[:-1]) - q.cdf(grid[:-1]))
    return float(np.sum(diff * np.diff(grid)))


@dataclass
class TubeCheck:
    w1: float
    lower_bound: float
    holds: bool


def tube_bound_check(p: DiscreteDist1D, q: DiscreteDist1D, manifold, alpha: float) -> TubeCheck:
    """W1(p, q) against α times q's mass strictly outside the α-tube of `manifold`."""
    if not alpha > 0:
        raise InputError(f"alpha must be positive, got {alpha}")
    points = np.asarray(sorted(manifold), dtype=np.float64)
    if points.size == 0:
        raise InputError("manifold needs at least one point")
    dist = np.min(np.abs(q.support[:, None] - points[None, :]), axis=1)
    mu = float(q.masses[dist > alpha].sum())
    w1 = w1_distance(p, q)
    bound = alpha * mu
    return TubeCheck(w1, bound, w1 >= bound - 1e-12)
