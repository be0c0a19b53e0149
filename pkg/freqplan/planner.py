# SPDX-License-Identifier: MIT
# Copyright (c) 2026 Mat McGowan
"""Rule-based restoration planner.

Maps a DegradationHints vector to a RestorationPlan: one task token, the
frequency band the restoration should focus on, a one-sentence rationale and
a fixed step template. Dominance is the largest normalized threshold margin;
a positive margin means the corresponding rule fires.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import asdict, dataclass, field

from .errors import InputError
from .hints import DegradationHints, HintThresholds

logger = logging.getLogger(__name__)

EPS = 1e-9

# Priority order; earlier wins ties.
TASKS = (
    "deraining",
    "desnowing",
    "dehazing",
    "deblur",
    "denoise",
    "light_enhancement",
    "super_resolution",
)

FOCUS = {
    "deraining": "high",
    "desnowing": "high",
    "deblur": "high",
    "denoise": "high",
    "super_resolution": "high",
    "dehazing": "low",
    "light_enhancement": "low",
}

DEFAULT_TASK = "denoise"
DEFAULT_RATIONALE = "no rule fired; conservative default"

PIPELINES = {
    "deraining": ("remove oriented streak artifacts", "restore fine edges", "refine local texture"),
    "desnowing": ("remove small bright particles", "inpaint occluded pixels", "refine local texture"),
    "dehazing": ("estimate global airlight", "recover transmission map", "restore global contrast"),
    "deblur": ("estimate blur kernel", "recover sharp edges", "suppress ringing"),
    "denoise": ("suppress flat-region residuals", "preserve edges", "refine local texture"),
    "light_enhancement": ("lift global exposure", "balance tone curve", "suppress amplified grain"),
    "super_resolution": ("upsample to target size", "synthesize fine texture", "sharpen edges"),
}


@dataclass
class RestorationPlan:
    task: str
    focus: str
    rationale: str
    pipeline: list[str]
    severities: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RestorationPlan":
        try:
            plan = cls(
                task=data["task"], focus=data["focus"], rationale=data["rationale"],
                pipeline=list(data["pipeline"]),
                severities={k: float(v) for k, v in data.get("severities", {}).items()},
            )
        except KeyError as exc:
            raise InputError(f"plan is missing field {exc.args[0]!r}") from None
        _check_plan(plan)
        return plan


def _check_plan(plan: RestorationPlan):
    if plan.task not in FOCUS:
        raise InputError(f"unknown task token: {plan.task!r}")
    if plan.focus != FOCUS[plan.task]:
        raise InputError(f"focus {plan.focus!r} does not match task {plan.task!r}")
    if not plan.pipeline:
        raise InputError("plan pipeline is empty")


def _ratio(num: float, den: float) -> float:
    return num / max(den, EPS) - 1.0


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def severity_scores(h: DegradationHints, th: HintThresholds | None = None) -> dict[str, float]:
    """Normalized threshold margin per task.

    Inverse-ratio terms (small is evidence) count as -1 on a flat image,
    where a lack of gradients says nothing about blur or blob isotropy.
    """
    th = th or HintThresholds()
    flat = "flat_image" in h.flags

    def inverse(threshold: float, value: float) -> float:
        return -1.0 if flat else _ratio(threshold, value)

    min_side = max(min(h.height, h.width), 1)
    return {
        "deraining": _mean([
            h.line_score / th.line_score_min - 1.0,
            h.anisotropy / th.anisotropy_min - 1.0,
            h.freq_ratio / th.freq_ratio_min - 1.0,
        ]),
        "desnowing": _mean([
            h.small_blobs / th.small_blobs_min - 1.0,
            inverse(th.snow_anisotropy_max, h.snow_anisotropy),
        ]),
        "dehazing": _mean([
            h.haze_score / th.haze_score_min - 1.0,
            h.depth_grad / th.depth_grad_min - 1.0,
        ]),
        "deblur": _mean([
            inverse(th.grad95_max, h.grad95),
            inverse(th.lap_var_max, h.lap_var),
            inverse(th.hf_energy_max, h.hf_energy),
        ]),
        "denoise": h.noise_score / th.noise_score_min - 1.0,
        "light_enhancement": max(_ratio(th.mean_y_max, h.mean_y), _ratio(th.p50_max, h.p50_y)),
        "super_resolution": th.sr_min_side / min_side - 1.0,
    }


def _ranked(severities: dict[str, float]) -> list[str]:
    return sorted(TASKS, key=lambda t: (-severities[t], TASKS.index(t)))


def _rationale(task: str, h: DegradationHints) -> str:
    cues = {
        "deraining": f"oriented streaks (line={h.line_score:.2f}, aniso={h.anisotropy:.2f}, "
                     f"freq={h.freq_ratio:.2f})",
        "desnowing": f"small bright blobs (blobs={h.small_blobs}, aniso={h.snow_anisotropy:.2f})",
        "dehazing": f"low-contrast veil (haze={h.haze_score:.2f}, depth_grad={h.depth_grad:.3f})",
        "deblur": f"weak edges (grad95={h.grad95:.3f}, lapVar={h.lap_var:.3f}, hf={h.hf_energy:.3f})",
        "denoise": f"flat-region residuals (score={h.noise_score:.2f}, mad={h.noise_mad:.4f})",
        "light_enhancement": f"dark exposure (meanY={h.mean_y:.2f}, p50={h.p50_y:.2f})",
        "super_resolution": f"small native size ({h.height}x{h.width})",
    }
    text = f"dominant impairment is {cues[task]}"
    if "grayscale_replicated" in h.flags:
        text += "; grayscale input, exposure cues may be spurious"
    return text


def plan(h: DegradationHints, th: HintThresholds | None = None) -> RestorationPlan:
    """Pick the dominant task. Total on any finite hints vector."""
    severities = severity_scores(h, th)
    ranked = _ranked(severities)
    if severities[ranked[0]] <= 0.0:
        task, rationale = DEFAULT_TASK, DEFAULT_RATIONALE
    else:
        task, rationale = ranked[0], _rationale(ranked[0], h)
    logger.debug("plan: %s (margin %.3f)", task, severities[task])
    return RestorationPlan(
        task=task,
        focus=FOCUS[task],
        rationale=rationale,
        pipeline=list(PIPELINES[task]),
        severities=severities,
    )


def runners_up(p: RestorationPlan, k: int = 2) -> list[tuple[str, float]]:
    """The next k tasks by margin after the chosen one."""
    if not p.severities:
        return []
    rest = [t for t in _ranked(p.severities) if t != p.task]
    return [(t, p.severities[t]) for t in rest[:k]]


# ── One-line format ──────────────────────────────────────────────

_LINE = re.compile(
    r"^Task: (?P<task>[a-z_]+), Focus: (?P<focus>high|low), "
    r"Rationale: (?P<rationale>.*), Pipeline: (?P<pipeline>.+)$"
)


def render_plan(p: RestorationPlan) -> str:
    """Task: <token>, Focus: <high|low>, Rationale: <...>, Pipeline: <s1 -> s2>."""
    rationale = " ".join(p.rationale.split())
    return (
        f"Task: {p.task}, Focus: {p.focus}, Rationale: {rationale}, "
        f"Pipeline: {' -> '.join(p.pipeline)}"
    )


def parse_plan(line: str) -> RestorationPlan:
    """Inverse of render_plan. Severities are not part of the line."""
    m = _LINE.match(line.strip())
    if not m:
        raise InputError(f"not a plan line: {line!r}")
    p = RestorationPlan(
        task=m.group("task"),
        focus=m.group("focus"),
        rationale=m.group("rationale"),
        pipeline=[s.strip() for s in m.group("pipeline").split(" -> ")],
    )
    _check_plan(p)
    return p
