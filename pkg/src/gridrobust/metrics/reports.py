"""Per-episode metric extraction and campaign-level aggregation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from ..grid.topology import Action
from .resilience import (
    DegradationEvent,
    cosine_series,
    degradation_segments,
    per_thousand,
    reward_delta_series,
    reward_gap_area,
    trapezoid_area,
)
from .robustness import (
    action_change_count,
    reward_per_action,
    similarity_per_changed_action,
    survival_steps,
    total_reward_delta,
)
from .trace import EpisodeTrace


@dataclass(frozen=True)
class MetricParams:
    window: int = 50
    theta: float = 0.05
    theta_c: float = 0.02


def mean_defined(values: Sequence[float | None]) -> tuple[float | None, int]:
    """Mean over entries that are not None; (None, 0) when nothing is defined."""
    ok = [float(v) for v in values if v is not None]
    if not ok:
        return None, 0
    return float(np.mean(ok)), len(ok)


def _pct(num: float | None, den: float | None) -> float | None:
    if num is None or den is None or den == 0:
        return None
    return 100.0 * num / den


def episode_robustness(trace: EpisodeTrace, actions: Sequence[Action]) -> dict[str, Any]:
    changed = action_change_count(trace)
    return {
        "steps_u": trace.k_u,
        "steps_p": trace.k_p,
        "total_reward_u": float(np.sum(trace.rewards_u)),
        "total_reward_p": float(np.sum(trace.rewards_p)),
        "total_reward_delta": total_reward_delta(trace),
        "survival_u": survival_steps(trace.legal_u),
        "survival_p": survival_steps(trace.legal_p),
        "reward_per_action_u": reward_per_action(trace.rewards_u, trace.actions_u),
        "reward_per_action_p": reward_per_action(trace.rewards_p, trace.actions_adv),
        "actions_changed": changed,
        "actions_changed_per_1000": per_thousand(changed, trace.k_p),
        "similarity_per_changed_action": similarity_per_changed_action(trace, actions),
    }


def _event_block(events: list[DegradationEvent], area: float, steps: int) -> dict[str, Any]:
    return {
        "events": [e.to_dict() for e in events],
        "degradation_time": mean_defined([e.degradation_time for e in events])[0],
        "restorative_time": mean_defined([e.restorative_time for e in events])[0],
        "max_delta": max((e.max_value for e in events), default=None),
        "min_delta": min((e.min_value for e in events), default=None),
        "degradations": len(events),
        "degradations_per_1000": per_thousand(len(events), steps),
        "area": area,
        "area_per_1000": per_thousand(area, steps),
    }


def episode_resilience(trace: EpisodeTrace, params: MetricParams = MetricParams()) -> dict[str, Any]:
    hp = trace.first_perturbation
    steps = trace.aligned
    if hp < 0:
        empty = _event_block([], 0.0, steps)
        return {"first_perturbation": None, "reward": empty, "cosine": dict(empty)}
    delta = reward_delta_series(trace)[hp:]
    reward_events = degradation_segments(delta, -params.theta, params.window, offset=hp)
    cos = cosine_series(trace)[hp:]
    cos_events = degradation_segments(cos, 1.0 - params.theta_c, params.window, offset=hp)
    cos_gap = np.where(np.isfinite(cos), cos - 1.0, 0.0)
    return {
        "first_perturbation": hp,
        "reward": _event_block(reward_events, reward_gap_area(trace), steps),
        "cosine": _event_block(cos_events, trapezoid_area(cos_gap), steps),
    }


ROBUSTNESS_FIELDS = (
    "steps_u",
    "steps_p",
    "total_reward_u",
    "total_reward_p",
    "total_reward_delta",
    "survival_u",
    "survival_p",
    "reward_per_action_u",
    "reward_per_action_p",
    "actions_changed",
    "actions_changed_per_1000",
    "similarity_per_changed_action",
)

RESILIENCE_FIELDS = (
    "degradation_time",
    "restorative_time",
    "max_delta",
    "min_delta",
    "degradations",
    "degradations_per_1000",
    "area",
    "area_per_1000",
)


@dataclass
class RobustnessReport:
    episodes: int
    means: dict[str, float | None]
    defined: dict[str, int]
    percent_of_unperturbed: dict[str, float | None] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class ResilienceReport:
    episodes: int
    reward: dict[str, float | None]
    cosine: dict[str, float | None]
    defined: dict[str, dict[str, int]]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _aggregate(rows: list[dict[str, Any]], names: Sequence[str]) -> tuple[dict, dict]:
    means, defined = {}, {}
    for name in names:
        means[name], defined[name] = mean_defined([r[name] for r in rows])
    return means, defined


def build_reports(
    traces: Sequence[EpisodeTrace],
    actions: Sequence[Action],
    params: MetricParams = MetricParams(),
) -> tuple[RobustnessReport, ResilienceReport]:
    """Average per-episode metrics; undefined values are skipped and counted."""
    if not traces:
        raise ValueError("no traces to aggregate")
    rob_rows = [episode_robustness(t, actions) for t in traces]
    res_rows = [episode_resilience(t, params) for t in traces]
    means, defined = _aggregate(rob_rows, ROBUSTNESS_FIELDS)
    pct = {
        "total_reward": _pct(means["total_reward_p"], means["total_reward_u"]),
        "survival": _pct(means["survival_p"], means["survival_u"]),
        "reward_per_action": _pct(means["reward_per_action_p"], means["reward_per_action_u"]),
    }
    robustness = RobustnessReport(len(traces), means, defined, pct)
    rew, rew_def = _aggregate([r["reward"] for r in res_rows], RESILIENCE_FIELDS)
    cos, cos_def = _aggregate([r["cosine"] for r in res_rows], RESILIENCE_FIELDS)
    resilience = ResilienceReport(len(traces), rew, cos, {"reward": rew_def, "cosine": cos_def})
    return robustness, resilience


# row label -> (section, key) for the text tables
TABLE_ROWS: dict[str, list[tuple[str, str, str]]] = {
    "Robustness relative to the unperturbed run (%)": [
        ("Total reward", "pct", "total_reward"),
        ("Survival steps", "pct", "survival"),
        ("Reward per action", "pct", "reward_per_action"),
    ],
    "Robustness metrics that cannot be compared to the unperturbed run": [
        ("Actions changed per 1000 steps", "rob", "actions_changed_per_1000"),
        ("Similarity score per changed action", "rob", "similarity_per_changed_action"),
    ],
    "Resilience metrics for the reward": [
        ("Degr. time", "reward", "degradation_time"),
        ("Rest. time", "reward", "restorative_time"),
        ("max(dR)", "reward", "max_delta"),
        ("min(dR)", "reward", "min_delta"),
        ("# degr. per 1000 steps", "reward", "degradations_per_1000"),
        ("Area per 1000 steps", "reward", "area_per_1000"),
    ],
    "Resilience metrics for state similarity to the unperturbed run": [
        ("Degr. time", "cosine", "degradation_time"),
        ("Rest. time", "cosine", "restorative_time"),
        ("max(cos)", "cosine", "max_delta"),
        ("min(cos)", "cosine", "min_delta"),
        ("# degr. per 1000 steps", "cosine", "degradations_per_1000"),
        ("Area per 1000 steps", "cosine", "area_per_1000"),
    ],
}


def _lookup(rob: RobustnessReport, res: ResilienceReport, section: str, key: str) -> float | None:
    if section == "pct":
        return rob.percent_of_unperturbed.get(key)
    if section == "rob":
        return rob.means.get(key)
    return getattr(res, section).get(key)


def format_tables(columns: dict[str, tuple[RobustnessReport, ResilienceReport]]) -> str:
    """Aligned plain-text tables, one column per campaign."""
    labels = list(columns)
    width = max([12, *(len(s) + 2 for s in labels)])
    row_w = max(len(r[0]) for rows in TABLE_ROWS.values() for r in rows) + 2
    out: list[str] = []
    for title, rows in TABLE_ROWS.items():
        out.append(title)
        out.append("-" * (row_w + width * len(labels)))
        out.append(" " * row_w + "".join(s.rjust(width) for s in labels))
        for name, section, key in rows:
            cells = []
            for lab in labels:
                v = _lookup(*columns[lab], section, key)
                cells.append(("n/a" if v is None else f"{v:.3f}").rjust(width))
            out.append(name.ljust(row_w) + "".join(cells))
        out.append("")
    return "\n".join(out)
