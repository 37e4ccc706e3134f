"""Robustness metrics: reward impact, decision stability, survival, weak spots."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..grid.topology import Action
from .trace import EpisodeTrace


def total_reward_delta(trace: EpisodeTrace) -> float:
    """Unperturbed total reward minus perturbed total reward, each over its own length."""
    return float(np.sum(trace.rewards_u) - np.sum(trace.rewards_p))


def action_change_count(trace: EpisodeTrace) -> int:
    return int(np.sum(trace.actions_adv != trace.actions_cf))


def change_overlap(a1: Action, a2: Action) -> float:
    """Shared changes over each action's change count; same attribute with a different target counts half."""
    c1, c2 = a1.changes, a2.changes
    common = c1 & c2
    attrs1: dict = {}
    for attr, target in c1:
        attrs1.setdefault(attr, set()).add(target)
    near = sum(1 for attr, target in c2 - common if attr in attrs1 and target not in attrs1[attr])
    return 0.5 * (len(common) + near / 2.0) * (1.0 / len(c1) + 1.0 / len(c2))


def substation_overlap(a1: Action, a2: Action) -> float:
    v1, v2 = a1.substations, a2.substations
    both = len(v1 & v2)
    return 0.5 * (both / len(v1) + both / len(v2))


def action_similarity(a1: Action, a2: Action) -> float:
    """Mean of :func:`change_overlap` and :func:`substation_overlap`.

    Do-nothing is similar only to itself.
    """
    if a1.is_do_nothing or a2.is_do_nothing:
        return 1.0 if a1.is_do_nothing and a2.is_do_nothing else 0.0
    return (change_overlap(a1, a2) + substation_overlap(a1, a2)) / 2.0


def similarity_per_changed_action(trace: EpisodeTrace, actions: Sequence[Action]) -> float | None:
    """Mean similarity over steps where the executed action differs from the counterfactual."""
    changed = np.flatnonzero(trace.actions_adv != trace.actions_cf)
    if changed.size == 0:
        return None
    sims = [action_similarity(actions[trace.actions_adv[k]], actions[trace.actions_cf[k]]) for k in changed]
    return float(np.mean(sims))


def survival_steps(legal: np.ndarray) -> int:
    return int(np.sum(legal))


def reward_per_action(rewards: np.ndarray, action_ids: np.ndarray, do_nothing: int = 0) -> float | None:
    """Total reward divided by the number of non-do-nothing actions; None if there were none."""
    n = int(np.sum(np.asarray(action_ids) != do_nothing))
    if n == 0:
        return None
    return float(np.sum(rewards) / n)


def gepa_significance(traces: Sequence[EpisodeTrace]) -> np.ndarray:
    """Per-step flags marking changes outside mean +- std of that index's changes.

    Statistics are pooled over every step of every trace given.
    """
    all_deltas = np.concatenate([t.deltas for t in traces]) if traces else np.zeros((0, 0))
    mu = all_deltas.mean(axis=0)
    sd = all_deltas.std(axis=0)
    return np.concatenate([(t.deltas < mu - sd) | (t.deltas > mu + sd) for t in traces])


def weak_spot_map(traces: EpisodeTrace | Sequence[EpisodeTrace], kind: str = "rpa") -> np.ndarray:
    """Fraction of perturbed steps on which the defender's decision changed, per index.

    ``kind == "gepa"`` replaces the perturbation flags with the mean +- std
    significance rule.  Indices never perturbed are NaN.
    """
    if isinstance(traces, EpisodeTrace):
        traces = [traces]
    changed = np.concatenate([t.actions_adv != t.actions_cf for t in traces])
    if kind == "gepa":
        perturbed = gepa_significance(traces)
    else:
        perturbed = np.concatenate([t.flags for t in traces])
    hits = (perturbed & changed[:, None]).sum(axis=0)
    counts = perturbed.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(counts > 0, hits / np.maximum(counts, 1), np.nan)
