# SPDX-License-Identifier: MIT
# Copyright (c) 2026 Mat McGowan
"""CLI entry point for freqplan.

Usage: python3 -m freqplan <command> [args...]

Commands:
  analyze <image.png>               Extract hints and print the restoration plan
  synth --n N --out DIR             Build a labeled synthetic corpus
  eval <manifest.jsonl>             Planner accuracy report over a corpus
  route-demo [--spec FILE]          Gate a synthetic token sequence between experts
  spectra --op NAME --grid A:B:N    Tabulate spectral weights as CSV
  loss <restored.png> <ref.png>     Adversarial objective breakdown

Common flags: --config PATH, --seed N, --verbose, --out PATH, --jobs N.
Exit status: 0 success, 1 internal error, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import advloss, degrade, freqmoe, pngio, spectra, tensorio
from .config import FreqplanConfig, config_path
from .errors import FreqplanError, InputError
from .hints import extract_hints
from .planner import TASKS, plan, render_plan

logger = logging.getLogger("freqplan")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="config file (default: $FREQPLAN_CONF)")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--verbose", action="store_true", help="debug logging; embed hints in analyze output")
    p.add_argument("--out", help="output path")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for synth/eval")
    return p


def _parser(cmd: str, description: str) -> argparse.ArgumentParser:
    return argparse.ArgumentParser(prog=f"freqplan {cmd}", description=description, parents=[_common()])


def _setup(args: argparse.Namespace) -> FreqplanConfig:
    logging.basicConfig(stream=sys.stderr, format="[freqplan] %(message)s",
                        level=logging.DEBUG if args.verbose else logging.WARNING, force=True)
    cfg = FreqplanConfig(config_path(args.config))
    if args.seed is not None:
        cfg.seed = args.seed
    if args.jobs < 1:
        raise InputError(f"--jobs must be >= 1, got {args.jobs}")
    return cfg


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _emit(text: str, out: str | None):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ── Commands ─────────────────────────────────────────────────────


def cmd_analyze(argv: list[str]) -> int:
    p = _parser("analyze", "Extract degradation hints and print the restoration plan.")
    p.add_argument("image")
    args = p.parse_args(argv)
    cfg = _setup(args)
    hints = extract_hints(pngio.load_png(args.image), cfg.cues)
    result = plan(hints, cfg.thresholds)
    doc = result.to_dict()
    if args.verbose:
        doc["hints"] = hints.to_dict()
    _emit(_dumps(doc) + "\n" + render_plan(result) + "\n", args.out)
    return 0


def cmd_synth(argv: list[str]) -> int:
    p = _parser("synth", "Build a labeled synthetic degradation corpus.")
    p.add_argument("--n", type=int, default=10, help="images per class")
    p.add_argument("--size", type=int, default=512, help="base image side")
    p.add_argument("--bases", type=int, default=3, help="number of procedural bases")
    args = p.parse_args(argv)
    cfg = _setup(args)
    if not args.out:
        raise InputError("synth needs --out DIR")
    bases = degrade.default_bases(args.bases, args.size, cfg.seed)
    items = degrade.make_corpus(bases, args.n, cfg.seed, ranges=cfg.degrade, thresholds=cfg.thresholds,
                                params=cfg.cues, jobs=args.jobs)
    manifest = degrade.write_corpus(items, args.out)
    print(manifest)
    return 0


def _evaluate(entries, cfg: FreqplanConfig, jobs: int) -> dict:
    def predict(entry):
        path, task, _ = entry
        if not path.is_file():
            return task, None
        return task, plan(extract_hints(pngio.load_png(path), cfg.cues), cfg.thresholds).task

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(predict, entries))
    else:
        results = [predict(e) for e in entries]

    index = {t: i for i, t in enumerate(TASKS)}
    confusion = np.zeros((len(TASKS), len(TASKS)), dtype=int)
    missing = 0
    for truth, predicted in results:
        if predicted is None:
            missing += 1
            continue
        confusion[index[truth], index[predicted]] += 1

    total = int(confusion.sum())
    per_class = {}
    for t, i in index.items():
        support = int(confusion[i].sum())
        predicted = int(confusion[:, i].sum())
        hit = int(confusion[i, i])
        per_class[t] = {
            "support": support,
            "precision": hit / predicted if predicted else 0.0,
            "recall": hit / support if support else 0.0,
        }
    return {
        "accuracy": float(np.trace(confusion)) / total if total else 0.0,
        "confusion": confusion.tolist(),
        "evaluated": total,
        "labels": list(TASKS),
        "missing": missing,
        "per_class": per_class,
    }


def cmd_eval(argv: list[str]) -> int:
    p = _parser("eval", "Planner accuracy over a corpus manifest.")
    p.add_argument("manifest")
    args = p.parse_args(argv)
    cfg = _setup(args)
    entries = degrade.read_manifest(args.manifest)
    report = _evaluate(entries, cfg, args.jobs)
    if report["missing"]:
        logger.warning("%d manifest entries had no image and were excluded", report["missing"])
    logger.info("accuracy %.3f over %d images", report["accuracy"], report["evaluated"])
    _emit(_dumps(report) + "\n", args.out)
    return 0


def _demo_tokens(spec: dict, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Synthetic (x, h_text, weight) from a small JSON spec."""
    b, length, d = int(spec.get("batch", 1)), int(spec.get("length", 32)), int(spec.get("dim", 8))
    k = int(spec.get("text_len", 4))
    band = spec.get("band", "low")
    rng = np.random.default_rng(seed)
    pos = np.arange(length)[None, :, None]
    amp = rng.uniform(0.5, 1.5, size=(b, 1, d))
    if band == "low":
        x = amp * np.cos(2.0 * np.pi * pos / (4.0 * length)) + amp
    elif band == "high":
        x = amp * np.where(pos % 2 == 0, 1.0, -1.0)
    elif band == "mixed":
        x = rng.normal(size=(b, length, d))
    else:
        raise InputError(f"unknown band {band!r}; expected low, high or mixed")
    h_text = rng.normal(size=(b, k, d))
    weight = float(spec.get("text_weight_scale", 0.0)) * rng.normal(size=(d, 2))
    return x, h_text, weight


def cmd_route_demo(argv: list[str]) -> int:
    p = _parser("route-demo", "Route a token sequence between the low- and high-band experts.")
    p.add_argument("--spec", help="JSON token-sequence spec (batch, length, dim, text_len, band)")
    p.add_argument("--tokens", help="tensor file B×L×D (overrides the synthetic sequence)")
    p.add_argument("--text", help="tensor file B×K×D of text tokens")
    p.add_argument("--weight", help="tensor file D×2 text-gate weight")
    args = p.parse_args(argv)
    cfg = _setup(args)
    spec = json.loads(Path(args.spec).read_text()) if args.spec else {}
    x, h_text, weight = _demo_tokens(spec, int(spec.get("seed", cfg.seed)))
    if args.tokens:
        x = tensorio.load(args.tokens)
    if args.text:
        h_text = tensorio.load(args.text)
    if args.weight:
        weight = tensorio.load(args.weight)
    result = freqmoe.route(x, h_text, weight, cfg.router)
    doc = result.to_dict()
    doc["lambda_s"] = cfg.router.lambda_s
    doc["granularity"] = cfg.router.granularity
    doc["mode"] = cfg.router.mode
    _emit(_dumps(doc) + "\n", args.out)
    return 0


def cmd_spectra(argv: list[str]) -> int:
    p = _parser("spectra", "Tabulate (omega, h_hat, xi, w_tilde) as CSV.")
    p.add_argument("--op", help="operator, e.g. ideal_lowpass(0.25)")
    p.add_argument("--grid", default="0:1:11", help="start:stop:count or comma list; empty for none")
    p.add_argument("--kappa", type=float)
    p.add_argument("--sigma-eta", type=float)
    p.add_argument("--sigma-t", type=float)
    args = p.parse_args(argv)
    cfg = _setup(args)
    cfg.override("spectral", h_hat=args.op, kappa=args.kappa, sigma_eta=args.sigma_eta,
                 sigma_t=args.sigma_t)
    rows = spectra.tabulate(cfg.spectral, spectra.parse_grid(args.grid))
    _emit(spectra.to_csv(rows), args.out)
    return 0


def cmd_loss(argv: list[str]) -> int:
    p = _parser("loss", "Evaluate the adversarial objective on a restored/reference pair.")
    p.add_argument("restored")
    p.add_argument("reference")
    p.add_argument("--freq-term", type=float, default=0.0, help="frequency regularizer value to add")
    args = p.parse_args(argv)
    cfg = _setup(args)
    x_hat, x = pngio.load_png(args.restored), pngio.load_png(args.reference)
    report = advloss.evaluate_pair(x_hat, x, cfg.loss, seed=cfg.seed, freq_term=args.freq_term)
    _emit(_dumps(report) + "\n", args.out)
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "synth": cmd_synth,
    "eval": cmd_eval,
    "route-demo": cmd_route_demo,
    "spectra": cmd_spectra,
    "loss": cmd_loss,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(__doc__.strip(), file=sys.stderr)
        return 2 if not argv else 0

    cmd = argv[0]
    if cmd not in COMMANDS:
        print(f"error: unknown command: {cmd}", file=sys.stderr)
        print(f"available: {', '.join(COMMANDS)}", file=sys.stderr)
        return 2

    try:
        return COMMANDS[cmd](argv[1:])
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except (FreqplanError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        logger.debug("internal error", exc_info=True)
        print(f"error: internal: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
