#!/usr/bin/env python3
# SPDX-License-Identifier: MIT
# Copyright (c) 2026 Mat McGowan
"""Tests for freqplan.degrade: synthetic degradations and corpora."""

import json
import logging
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
from freqplan import degrade
from freqplan.degrade import DegradationSpec, DegradeRanges
from freqplan.errors import ConfigError, CorpusError, InputError
from freqplan.hints import HintThresholds, extract_hints
from freqplan.planner import TASKS, plan, severity_scores

TH = HintThresholds()


@pytest.fixture(scope="module")
def base():
    return degrade.mosaic_base(512, seed=0)


def _samples(kind, base, n=4, seed=11):
    ranges = DegradeRanges()
    out = []
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        spec = degrade.sample_spec(kind, rng, ranges, base.shape[:2], TH.sr_min_side)
        out.append((spec, degrade.apply(base, spec)))
    return out


# ── Bases ────────────────────────────────────────────────────────


class TestBases:
    def test_shape_and_range(self, base):
        assert base.shape == (512, 512, 3)
        assert np.array_equal(base[..., 0], base[..., 1])
        assert base.min() >= 0.0 and base.max() <= 0.78

    def test_seeded(self):
        a = degrade.mosaic_base(64, seed=3)
        assert np.array_equal(a, degrade.mosaic_base(64, seed=3))
        assert not np.array_equal(a, degrade.mosaic_base(64, seed=4))

    def test_rejects_odd_size(self):
        with pytest.raises(InputError):
            degrade.mosaic_base(100)

    def test_bin_allocation(self):
        counts = degrade._bin_allocation(640, 36)
        assert sum(counts) == 640
        assert min(counts[:10]) > max(counts[10:])

    def test_bundled_bases_fire_no_rule(self):
        for b in degrade.default_bases(2, 512, seed=0):
            margins = degrade.base_margins(b, TH)
            assert all(m <= 0.0 for m in margins.values()), margins


# ── Generators ───────────────────────────────────────────────────


class TestApply:
    def test_zero_noise_is_identity(self, base):
        out = degrade.apply(base, DegradationSpec("denoise", {"sigma": 0.0}, seed=1))
        assert np.array_equal(out, base)

    def test_zero_extinction_is_identity(self, base):
        out = degrade.apply(base, DegradationSpec("dehazing", {"airlight": 0.8, "beta": 0.0}))
        assert np.array_equal(out, base)

    def test_dense_haze_goes_to_airlight(self):
        img = np.random.default_rng(0).uniform(0.1, 0.6, size=(64, 64, 3))
        out = degrade.apply(img, DegradationSpec("dehazing", {"airlight": 0.8, "beta": 50.0}))
        assert np.allclose(out[:32], 0.8, atol=1e-6)
        assert out[:32].min(axis=2).mean() == pytest.approx(0.8, abs=1e-6)

    def test_rain_brightens(self, base):
        for _, out in _samples("deraining", base, n=2):
            assert out.mean() > base.mean()

    def test_low_light_darkens(self, base):
        for _, out in _samples("light_enhancement", base, n=2):
            assert out.mean() < base.mean()

    def test_outputs_clipped(self, base):
        for kind in TASKS:
            for _, out in _samples(kind, base, n=1):
                assert out.min() >= 0.0 and out.max() <= 1.0

    def test_seed_fixes_output(self, base):
        spec = DegradationSpec("denoise", {"sigma": 0.1}, seed=5)
        assert np.array_equal(degrade.apply(base, spec), degrade.apply(base, spec))

    def test_motion_blur_kernel(self):
        k = degrade._motion_kernel(9, 0.0)
        assert k.sum() == pytest.approx(1.0)
        assert np.count_nonzero(k[4]) == 9
        assert np.count_nonzero(k) == 9

    def test_box_downscale(self):
        img = np.arange(16, dtype=float).reshape(4, 4) / 16
        out = degrade.box_downscale(img, 2)
        assert out.shape == (2, 2)
        assert out[0, 0] == pytest.approx((0 + 1 + 4 + 5) / 64)

    def test_point_downscale(self):
        img = np.arange(49, dtype=float).reshape(7, 7)
        out = degrade.point_downscale(img, 3)
        assert out.shape == (2, 2)
        assert out.tolist() == [[0.0, 3.0], [21.0, 24.0]]

    def test_point_downscale_keeps_checker(self):
        checker = np.where(np.add.outer(np.arange(30), np.arange(30)) % 2 == 0, 1.0, -1.0)
        out = degrade.point_downscale(checker, 5)
        assert np.array_equal(out, checker[:6, :6])

    def test_downscale_factor_errors(self):
        with pytest.raises(InputError):
            degrade.point_downscale(np.zeros((8, 8)), 0)
        with pytest.raises(InputError):
            degrade.box_downscale(np.zeros((8, 8)), 9)

    def test_sr_modes(self, base):
        sample = degrade.apply(base, DegradationSpec("super_resolution", {"factor": 7, "mode": "sample"}))
        box = degrade.apply(base, DegradationSpec("super_resolution", {"factor": 7, "mode": "box"}))
        assert sample.shape == box.shape == (73, 73, 3)
        assert np.array_equal(sample, base[:511:7, :511:7])
        assert extract_hints(sample).lap_var > extract_hints(box).lap_var

    def test_unknown_kind(self):
        with pytest.raises(InputError):
            DegradationSpec("sharpen")


class TestCalibration:
    """Each generator pushes its own cue past the decision threshold."""

    def test_noise(self, base):
        for sigma in DegradeRanges().noise_sigmas:
            out = degrade.apply(base, DegradationSpec("denoise", {"sigma": sigma / 255}, seed=2))
            assert extract_hints(out).noise_score > TH.noise_score_min

    def test_gaussian_blur(self, base):
        for sigma in (1.5, 3.0):
            h = extract_hints(degrade.apply(base, DegradationSpec("deblur", {"sigma": sigma})))
            assert h.lap_var < TH.lap_var_max
            assert h.grad95 < TH.grad95_max

    def test_haze(self, base):
        for spec, out in _samples("dehazing", base):
            h = extract_hints(out)
            assert h.haze_score > TH.haze_score_min, spec
            assert h.depth_grad > TH.depth_grad_min, spec

    def test_low_light(self, base):
        for spec, out in _samples("light_enhancement", base):
            assert extract_hints(out).mean_y < TH.mean_y_max, spec

    def test_super_resolution(self, base):
        for spec, out in _samples("super_resolution", base):
            assert spec.params["factor"] % 2 == 1, spec
            assert min(out.shape[:2]) <= 0.35 * TH.sr_min_side, spec

    def test_sr_factor(self):
        assert degrade.sr_factor(512, 256, 0.35) == 7
        assert degrade.sr_factor(512, 256, 0.20) == 11
        assert degrade.sr_factor(512, 256, 0.35, mode="box") == 6
        assert degrade.sr_factor(64, 256, 0.2) == 3
        assert degrade.sr_factor(16, 256, 0.2) == 1

    def test_counts_scale_with_area(self):
        ranges = DegradeRanges(rain_count=(1000, 1000), snow_count=(200, 200))
        rng = np.random.default_rng(0)
        small = degrade.sample_spec("deraining", rng, ranges, (256, 256))
        large = degrade.sample_spec("deraining", rng, ranges, (1024, 1024))
        assert (small.params["count"], large.params["count"]) == (250, 4000)
        assert degrade.sample_spec("desnowing", rng, ranges, (8, 8)).params["count"] == 1

    def test_snow(self, base):
        for spec, out in _samples("desnowing", base, n=3):
            assert extract_hints(out).small_blobs > TH.small_blobs_min, spec

    def test_rain(self, base):
        for spec, out in _samples("deraining", base, n=3):
            h = extract_hints(out)
            assert h.line_score > TH.line_score_min, spec
            assert h.anisotropy > TH.anisotropy_min, spec

    def test_rain_margin_dominates(self, base):
        for spec, out in _samples("deraining", base, n=3, seed=7):
            sev = severity_scores(extract_hints(out), TH)
            best = max(sev, key=sev.get)
            assert best == "deraining"
            assert all(sev["deraining"] > m for t, m in sev.items() if t != "deraining")


# ── Corpus ───────────────────────────────────────────────────────


@pytest.fixture(scope="module")
def small_bases():
    return [degrade.mosaic_base(64, seed=s) for s in (0, 1)]


class TestCorpus:
    def test_counts_and_order(self, small_bases):
        items = degrade.make_corpus(small_bases, 2, seed=7, check_bases=False)
        assert len(items) == 2 * len(TASKS)
        assert [it.task for it in items] == [t for t in TASKS for _ in range(2)]

    def test_items_unpack(self, small_bases):
        img, task = degrade.make_corpus(small_bases, 1, seed=7, check_bases=False)[0]
        assert task == TASKS[0]
        assert img.ndim == 3

    def test_deterministic(self, small_bases):
        a = degrade.make_corpus(small_bases, 1, seed=3, check_bases=False)
        b = degrade.make_corpus(small_bases, 1, seed=3, check_bases=False)
        for x, y in zip(a, b):
            assert np.array_equal(x.image, y.image)
            assert x.spec == y.spec

    def test_threads_match_serial(self, small_bases):
        a = degrade.make_corpus(small_bases, 1, seed=5, check_bases=False)
        b = degrade.make_corpus(small_bases, 1, seed=5, check_bases=False, jobs=3)
        assert all(np.array_equal(x.image, y.image) for x, y in zip(a, b))

    def test_empty_class_count(self, small_bases):
        assert degrade.make_corpus(small_bases, 0, check_bases=False) == []

    def test_no_bases(self):
        with pytest.raises(CorpusError):
            degrade.make_corpus([], 1)

    def test_firing_base_rejected(self, caplog):
        dark = np.full((64, 64, 3), 0.1)
        with caplog.at_level(logging.WARNING, logger="freqplan.degrade"):
            with pytest.raises(CorpusError):
                degrade.make_corpus([dark], 1, thresholds=HintThresholds(sr_min_side=32))
        assert "base 0 rejected" in caplog.text
        assert "light_enhancement" in caplog.text


class TestManifest:
    def test_write_and_read(self, small_bases, tmp_path):
        items = degrade.make_corpus(small_bases, 1, seed=1, check_bases=False)
        manifest = degrade.write_corpus(items, tmp_path / "corpus")
        lines = manifest.read_text().splitlines()
        assert len(lines) == len(TASKS)
        assert set(json.loads(lines[0])) == {"path", "task", "spec"}
        entries = degrade.read_manifest(manifest)
        assert [task for _, task, _ in entries] == list(TASKS)
        assert all(path.is_file() for path, _, _ in entries)
        assert entries[3][2] == items[3].spec

    def test_empty_corpus(self, tmp_path):
        manifest = degrade.write_corpus([], tmp_path)
        assert manifest.read_text() == ""
        assert degrade.read_manifest(manifest) == []

    def test_missing_image_warns(self, tmp_path, caplog):
        manifest = tmp_path / "manifest.jsonl"
        spec = DegradationSpec("denoise", {"sigma": 0.1}).to_dict()
        manifest.write_text(json.dumps({"path": "gone.png", "task": "denoise", "spec": spec}) + "\n")
        with caplog.at_level(logging.WARNING, logger="freqplan.degrade"):
            entries = degrade.read_manifest(manifest)
        assert len(entries) == 1
        assert "missing image" in caplog.text

    def test_bad_line(self, tmp_path):
        manifest = tmp_path / "manifest.jsonl"
        manifest.write_text("{not json\n")
        with pytest.raises(CorpusError, match="manifest.jsonl:1"):
            degrade.read_manifest(manifest)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(CorpusError):
            degrade.read_manifest(tmp_path / "nope.jsonl")


class TestRanges:
    def test_comma_lists(self):
        r = DegradeRanges(noise_sigmas="10, 20", blur_sigma="1,2")
        assert r.noise_sigmas == (10.0, 20.0)
        assert r.blur_sigma == (1.0, 2.0)

    def test_rejects_inverted_range(self):
        with pytest.raises(ConfigError):
            DegradeRanges(haze_beta=(2.0, 1.0))

    def test_motion_fraction_bounds(self):
        with pytest.raises(ConfigError):
            DegradeRanges(motion_fraction=1.5)

    def test_sr_scale_bounds(self):
        with pytest.raises(ConfigError):
            DegradeRanges(sr_scale=(0.5, 1.5))
        assert DegradeRanges(sr_scale="0.1,0.2").sr_scale == (0.1, 0.2)

    def test_sr_mode(self):
        assert DegradeRanges().sr_mode == "sample"
        with pytest.raises(ValueError):
            DegradeRanges(sr_mode="bicubic")


# ── Planner on the corpus ────────────────────────────────────────


def _predict(items):
    return [plan(extract_hints(item.image)).task for item in items]


class TestPlannerOnCorpus:
    def test_default_corpus_accuracy(self):
        items = degrade.make_corpus(degrade.default_bases(3, 512, 7), 10, 7, jobs=4)
        predicted = _predict(items)
        hits = [p == item.task for p, item in zip(predicted, items)]
        assert sum(hits) / len(items) >= 0.90, list(zip([it.task for it in items], predicted))
        for task in TASKS:
            row = [h for h, item in zip(hits, items) if item.task == task]
            assert sum(row) / len(row) >= 0.80, (task, predicted)

    def test_doubling_resolution_keeps_tasks(self):
        small = degrade.make_corpus(degrade.default_bases(1, 512, 7), 1, 3)
        large = degrade.make_corpus(degrade.default_bases(1, 1024, 7), 1, 3)
        assert [min(it.image.shape[:2]) for it in large[:-1]] == [1024] * (len(TASKS) - 1)
        assert _predict(small) == _predict(large)
