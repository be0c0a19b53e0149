#!/usr/bin/env python3
# SPDX-License-Identifier: MIT
# Copyright (c) 2026 Mat McGowan
"""Tests for freqplan.hints: label-free degradation cues."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
from freqplan import hints, imgstats
from freqplan.errors import ConfigError, InputError
from freqplan.hints import CueParams, DegradationHints, HintThresholds


def _logistic(z):
    return 1.0 / (1.0 + math.exp(-z))


def _stripes(freq=0.1, size=64, amp=0.2):
    x = np.arange(size)
    return np.tile(0.5 + amp * np.sin(2 * np.pi * freq * x), (size, 1))


# ── Thresholds ───────────────────────────────────────────────────


class TestThresholds:
    def test_defaults(self):
        th = HintThresholds()
        assert (th.line_score_min, th.anisotropy_min, th.freq_ratio_min) == (0.16, 0.40, 1.05)
        assert (th.small_blobs_min, th.snow_anisotropy_max) == (25, 0.42)
        assert th.noise_score_min == 0.45
        assert (th.grad95_max, th.lap_var_max, th.hf_energy_max) == (0.17, 0.27, 0.052)
        assert (th.haze_score_min, th.depth_grad_min) == (0.50, 0.03)
        assert (th.mean_y_max, th.p50_max) == (0.32, 0.26)
        assert th.sr_min_side == 256

    def test_string_values_convert(self):
        th = HintThresholds(line_score_min="0.2", sr_min_side="128")
        assert th.line_score_min == 0.2
        assert th.sr_min_side == 128

    def test_rejects_non_positive(self):
        with pytest.raises(ConfigError):
            HintThresholds(noise_score_min=0.0)

    def test_cue_params_annulus(self):
        p = CueParams(mid_annulus="0.1,0.25")
        assert p.mid_annulus == (0.1, 0.25)
        with pytest.raises(ConfigError):
            CueParams(outer_annulus=(0.3, 0.7))


# ── Closed-form scores ───────────────────────────────────────────


class TestScores:
    def test_noise_score_matches_formula(self):
        rng = np.random.default_rng(0)
        for mad, chroma in rng.uniform(0.0, 0.05, size=(1000, 2)):
            expected = 0.6 * _logistic(50 * (mad - 0.0050)) + 0.4 * _logistic(50 * (chroma - 0.0095))
            assert hints.noise_score(mad, chroma) == pytest.approx(expected, abs=1e-12)

    def test_haze_score_matches_formula(self):
        rng = np.random.default_rng(1)
        for dark, sat, depth in rng.uniform(-0.2, 1.0, size=(1000, 3)):
            expected = (0.4 * _logistic(7 * (dark - 0.33)) + 0.3 * _logistic(7 * (0.30 - sat))
                        + 0.3 * _logistic(8 * (depth - 0.03)))
            assert hints.haze_score(dark, sat, depth) == pytest.approx(expected, abs=1e-12)

    def test_scores_bounded(self):
        assert 0.0 < hints.noise_score(0.0, 0.0) < 1.0
        assert 0.0 < hints.haze_score(1.0, 0.0, 1.0) < 1.0

    def test_noise_score_increases_in_each_input(self):
        h = 1e-6
        for mad in np.linspace(0.0, 0.02, 5):
            for chroma in np.linspace(0.0, 0.03, 5):
                assert hints.noise_score(mad + h, chroma) > hints.noise_score(mad - h, chroma)
                assert hints.noise_score(mad, chroma + h) > hints.noise_score(mad, chroma - h)

    def test_haze_score_monotone_in_each_input(self):
        h = 1e-6
        grid = np.linspace(0.0, 0.8, 5)
        for dark in grid:
            for sat in grid:
                for depth in np.linspace(-0.2, 0.2, 5):
                    base = (dark, sat, depth)
                    assert hints.haze_score(dark + h, sat, depth) > hints.haze_score(dark - h, sat, depth), base
                    assert hints.haze_score(dark, sat + h, depth) < hints.haze_score(dark, sat - h, depth), base
                    assert hints.haze_score(dark, sat, depth + h) > hints.haze_score(dark, sat, depth - h), base


# ── Cue extractors ───────────────────────────────────────────────


class TestRainCues:
    def test_vertical_stripes_are_oriented(self):
        line, aniso, _ = hints.rain_cues(_stripes())
        assert line == pytest.approx(1.0)
        assert aniso == pytest.approx(35.0)

    def test_flat_image_zeroed(self):
        flags = []
        line, aniso, freq = hints.rain_cues(np.full((32, 32), 0.5), flags=flags)
        assert (line, aniso, freq) == (0.0, 0.0, 0.0)
        assert "flat_image" in flags

    def test_mid_band_only_saturates(self):
        flags = []
        _, _, freq = hints.rain_cues(_stripes(freq=0.25), flags=flags)
        assert freq == CueParams().freq_ratio_cap
        assert "low_power_saturated" in flags


class TestSnowCues:
    def test_counts_small_bright_blobs(self):
        g = np.full((64, 64), 0.3)
        for r, c in [(10, 10), (10, 40), (40, 20), (50, 50)]:
            g[r:r + 2, c:c + 2] = 0.9
        g[30, 60] = 0.95
        blobs, _ = hints.snow_cues(g)
        assert blobs == 4

    def test_large_region_not_counted(self):
        g = np.full((64, 64), 0.3)
        g[10:40, 10:40] = 0.9
        blobs, _ = hints.snow_cues(g)
        assert blobs == 0

    def test_counts_thirty_one_discs(self):
        rng = np.random.default_rng(10)
        g = np.full((96, 96), 0.2)
        yy, xx = np.mgrid[-6:6, -6:6]
        # one disc per 12-pixel cell, radius at most 3.9 so neighbors stay apart
        for cell in rng.choice(64, size=31, replace=False):
            r, c = divmod(int(cell), 8)
            disc = yy ** 2 + xx ** 2 <= rng.uniform(1.5, 3.9) ** 2
            assert 5 <= disc.sum() <= 50
            g[12 * r:12 * r + 12, 12 * c:12 * c + 12][disc] = 0.95
        blobs, _ = hints.snow_cues(g)
        assert blobs == 31


class TestNoiseCues:
    def test_clean_flat_image_scores_low(self):
        img = np.full((64, 64, 3), 0.5)
        flags = []
        mad, chroma, score = hints.noise_cues(img, flags=flags)
        assert mad == 0.0 and chroma == 0.0
        assert score < HintThresholds().noise_score_min
        assert "empty_flat_mask" in flags

    def test_noise_scores_high(self):
        rng = np.random.default_rng(4)
        img = np.clip(0.5 + rng.normal(0, 25 / 255, size=(96, 96, 3)), 0, 1)
        _, _, score = hints.noise_cues(img)
        assert score > HintThresholds().noise_score_min

    def test_gray_has_no_chroma(self):
        rng = np.random.default_rng(5)
        _, chroma, _ = hints.noise_cues(np.clip(0.5 + rng.normal(0, 0.05, (32, 32)), 0, 1))
        assert chroma == 0.0


class TestBlurCues:
    def test_blur_lowers_activity(self):
        rng = np.random.default_rng(6)
        g = rng.uniform(size=(64, 64))
        sharp = hints.blur_cues(g)
        soft = hints.blur_cues(hints.imgstats.gaussian_blur(g, 2.0))
        assert all(s < h for s, h in zip(soft, sharp))


class TestHazeCues:
    def test_bright_top_gives_positive_depth_grad(self):
        ramp = np.linspace(0.9, 0.3, 32)[:, None] * np.ones((1, 32))
        img = np.repeat(ramp[:, :, None], 3, axis=2)
        _, sat, depth, _ = hints.haze_cues(img)
        assert sat == 0.0
        assert depth > 0.03

    def test_needs_rgb(self):
        with pytest.raises(InputError):
            hints.haze_cues(np.full((16, 16), 0.5))


class TestExposureCues:
    def test_mean_and_median(self):
        img = np.zeros((10, 10, 3))
        img[:3] = 1.0
        mean_y, p50 = hints.exposure_cues(img)
        assert mean_y == pytest.approx(0.3)
        assert p50 == 0.0

    def test_gray_passes_through(self):
        assert hints.exposure_cues(np.full((8, 8), 0.25)) == (0.25, 0.25)


# ── Invariants ───────────────────────────────────────────────────


def _grating(degrees, size=96, period=16.0):
    y, x = np.mgrid[0:size, 0:size]
    t = np.deg2rad(degrees)
    return 0.5 + 0.2 * np.sin(2 * np.pi * (x * np.cos(t) + y * np.sin(t)) / period)


class TestInvariants:
    def test_noise_mad_grows_with_sigma(self):
        y, x = np.mgrid[0:128, 0:128]
        base = 0.5 + 0.1 * np.sin(2 * np.pi * x / 128) * np.cos(2 * np.pi * y / 128)
        z = np.random.default_rng(11).normal(size=base.shape)
        mads = [hints.noise_cues(base + s / 255 * z)[0] for s in (2, 6, 18, 40)]
        assert np.all(np.diff(mads) >= 0.0)

    @pytest.mark.parametrize("degrees", [22.5, 67.5, 112.5])
    def test_quarter_turn_shifts_dominant_bin(self, degrees):
        bins = CueParams().num_bins

        def dominant(g):
            gx, gy, mag = imgstats.sobel_gradients(g)
            return int(np.argmax(imgstats.orientation_histogram(gx, gy, mag, bins)))

        g = _grating(degrees)
        assert dominant(np.rot90(g)) == (dominant(g) + bins // 2) % bins

    def test_identity_scaling_keeps_hints(self):
        img = np.stack([_grating(30.0), _grating(60.0), _grating(90.0)], axis=2)
        assert hints.extract_hints(img * 1.0) == hints.extract_hints(img)


# ── Full extraction ──────────────────────────────────────────────


class TestExtract:
    def test_constant_gray(self):
        h = hints.extract_hints(np.full((32, 40, 3), 0.5))
        assert (h.height, h.width) == (32, 40)
        assert h.line_score == 0.0 and h.small_blobs == 0 and h.lap_var == 0.0
        assert h.mean_y == pytest.approx(0.5) and h.p50_y == pytest.approx(0.5)
        assert "flat_image" in h.flags

    def test_grayscale_flagged(self):
        h = hints.extract_hints(np.full((16, 16), 0.5))
        assert "grayscale_replicated" in h.flags

    def test_flags_sorted_unique(self):
        h = hints.extract_hints(np.full((16, 16), 0.5))
        assert h.flags == sorted(set(h.flags))

    def test_too_small_rejected(self):
        with pytest.raises(InputError):
            hints.extract_hints(np.zeros((4, 4, 3)))

    def test_deterministic(self):
        img = np.random.default_rng(7).uniform(size=(48, 48, 3))
        assert hints.extract_hints(img) == hints.extract_hints(img)


class TestSerialization:
    def test_json_round_trip(self):
        h = hints.extract_hints(np.random.default_rng(8).uniform(size=(32, 32, 3)))
        assert DegradationHints.from_json(h.to_json()) == h

    def test_unknown_field(self):
        with pytest.raises(InputError):
            DegradationHints.from_dict({"line_score": 0.1, "bogus": 1})

    def test_render_is_one_line(self):
        h = DegradationHints(line_score=0.21, anisotropy=0.45, freq_ratio=1.08, small_blobs=31,
                             snow_anisotropy=0.38, height=480, width=640)
        text = hints.render_hints(h)
        assert "\n" not in text
        assert text.startswith("Rain: line=0.21, aniso=0.45, freq=1.08; Snow: blobs=31, aniso=0.38; ")
        assert text.endswith("Size: H=480, W=640")
