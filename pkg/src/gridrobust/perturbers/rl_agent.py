"""Tabular Q-learning attacker that chooses when and how to tamper with sensors.

Perturbation actions either overwrite a few sensor values (with zero or a
very large reading), craft a one-step gradient-sign example that pushes the
defender toward a chosen action group, or do nothing.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Hashable, Protocol, Sequence

import numpy as np

from ..grid.env import Observation
from ..grid.topology import ActionKind
from .gradient import fgsm_attack

Q_FORMAT = "gridrobust-qtable/1"
LARGE_MULTIPLIER = 10.0


@dataclass(frozen=True)
class PerturbationAction:
    kind: str = "do_nothing"  # "do_nothing" | "set_values" | "adversarial"
    indices: tuple[int, ...] = ()
    fill: str = "zero"  # "zero" | "large"
    target: int | None = None  # defender action id for "adversarial"

    @property
    def is_do_nothing(self) -> bool:
        return self.kind == "do_nothing"

    def label(self) -> str:
        if self.kind == "set_values":
            return f"{self.fill}:{','.join(map(str, self.indices))}"
        if self.kind == "adversarial":
            return f"toward:{self.target}"
        return "do_nothing"

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "indices": list(self.indices), "fill": self.fill, "target": self.target}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> PerturbationAction:
        return cls(d["kind"], tuple(d.get("indices", ())), d.get("fill", "zero"), d.get("target"))


NO_PERTURBATION = PerturbationAction()


@dataclass(frozen=True)
class RlpaConfig:
    episodes: int = 30  # H
    max_steps: int = 2016  # K
    alpha: float = 0.1
    epsilon: float = 0.1
    gamma: float = 0.95
    xi: float = 0.10
    bonus: float = 100.0
    budget: int = 20
    pool_size: int = 150
    beam: int = 8

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.episodes < 0 or self.max_steps < 1 or self.budget < 1:
            raise ValueError("episodes >= 0, max_steps >= 1 and budget >= 1 required")


# -- attacker state ----------------------------------------------------------

RHO_EDGES = (0.8, 0.9, 1.0, 1.2)


def grid_features(obs: Observation, limits: np.ndarray) -> tuple[int, int, int]:
    """(max-loading bucket, overloaded-line bucket, quarter of day) from true readings."""
    rho = np.abs(obs.group("flow")) / limits
    rho = np.where(np.asarray(obs.topology.line_status), rho, 0.0)
    peak = float(rho.max()) if rho.size else 0.0
    bucket = int(np.searchsorted(RHO_EDGES, peak, side="right"))
    overloaded = min(int(np.sum(rho > 1.0)), 2)
    quarter = obs.time_of_day * 4 // 288
    return bucket, overloaded, int(quarter)


class QFunction:
    """Sparse Q-table; unseen states read as all zeros."""

    def __init__(self, n_actions: int, table: dict[Hashable, np.ndarray] | None = None):
        self.n_actions = n_actions
        self.table: dict[Hashable, np.ndarray] = table or {}

    def values(self, state: Hashable) -> np.ndarray:
        row = self.table.get(state)
        return row if row is not None else np.zeros(self.n_actions)

    def row(self, state: Hashable) -> np.ndarray:
        if state not in self.table:
            self.table[state] = np.zeros(self.n_actions)
        return self.table[state]

    def greedy(self, state: Hashable) -> int:
        # lowest id wins ties, and id 0 is do-nothing
        return int(np.argmax(self.values(state)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QFunction) or other.n_actions != self.n_actions:
            return False
        keys = set(self.table) | set(other.table)
        return all(np.array_equal(self.values(k), other.values(k)) for k in keys)


def _key_to_str(key: Hashable) -> str:
    return ",".join(map(str, key)) if isinstance(key, tuple) else str(key)


def _str_to_key(text: str) -> Hashable:
    parts = text.split(",")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        return text


def save_qfunction(
    path: str | Path,
    q: QFunction,
    actions: Sequence[PerturbationAction],
    large_fill: np.ndarray,
    config: dict[str, Any] | None = None,
) -> None:
    """Write the Q-table as JSON.

    Keys of ``table`` are comma-joined feature tuples; each value lists one
    Q-value per entry of ``actions`` in the same order.
    """
    doc = {
        "format": Q_FORMAT,
        "actions": [a.to_dict() for a in actions],
        "large_fill": [float(v) for v in large_fill],
        "config": config or {},
        "table": {_key_to_str(k): [float(v) for v in q.table[k]] for k in sorted(q.table)},
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_qfunction(path: str | Path) -> tuple[QFunction, list[PerturbationAction], np.ndarray, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != Q_FORMAT:
        raise ValueError(f"{path}: not a {Q_FORMAT} file")
    actions = [PerturbationAction.from_dict(d) for d in doc["actions"]]
    table = {_str_to_key(k): np.array(v, dtype=float) for k, v in doc["table"].items()}
    for k, v in table.items():
        if v.shape != (len(actions),) or not np.all(np.isfinite(v)):
            raise ValueError(f"{path}: bad row for state {k}")
    return QFunction(len(actions), table), actions, np.array(doc["large_fill"], dtype=float), doc["config"]


# -- applying perturbations ------------------------------------------------------


class SensorAttacker:
    """Applies perturbation actions from a fixed set to grid observations."""

    def __init__(
        self,
        actions: Sequence[PerturbationAction],
        large_fill: np.ndarray,
        defender,
        xi: float = 0.10,
    ):
        self.actions = list(actions)
        self.large_fill = np.asarray(large_fill, dtype=float)
        self.defender = defender
        self.xi = xi
        self.limits = defender.limits

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def features(self, obs: Observation) -> tuple[int, int, int]:
        return grid_features(obs, self.limits)

    def perturb_values(self, p: int, obs: Observation) -> np.ndarray:
        act = self.actions[p]
        values = np.array(obs.values, dtype=float, copy=True)
        if act.kind == "set_values":
            idx = list(act.indices)
            values[idx] = 0.0 if act.fill == "zero" else self.large_fill[idx]
        elif act.kind == "adversarial":
            def objective(batch: np.ndarray) -> np.ndarray:
                return self.defender.action_score(obs, act.target, batch)

            values = fgsm_attack(self.xi, objective, values, batched=True)
        return values

    def perturb(self, p: int, obs: Observation) -> Observation:
        return obs.with_values(self.perturb_values(p, obs))


# -- action-space reduction --------------------------------------------------------


def _apply_candidate(values: np.ndarray, indices: tuple[int, ...], fill: str, large: np.ndarray) -> np.ndarray:
    out = values.copy()
    idx = list(indices)
    out[:, idx] = 0.0 if fill == "zero" else large[idx]
    return out


def reduce_action_space(
    pool: Sequence[Observation],
    defender,
    budget: int = 20,
    beam: int = 8,
) -> tuple[list[PerturbationAction], np.ndarray]:
    """Greedy selection of harmful value overwrites plus one target per action group.

    A candidate's harm on one pool observation is how much worse, judged on the
    true readings, the action the defender picks under the overwrite scores
    than the action it would otherwise pick (floored at zero).  Candidates are
    ranked by mean harm, then by how often they flip the choice.  The best
    ``beam`` singles are extended by every other index to pairs, and the best
    ``beam`` pairs to triples.
    """
    if not pool:
        raise ValueError("empty observation pool")
    base = np.stack([np.asarray(o.values, dtype=float) for o in pool])
    large = LARGE_MULTIPLIER * np.maximum(np.abs(base).max(axis=0), 1.0)
    ref = [defender.policy_scores(o) for o in pool]
    ref_best = np.array([r.best for r in ref])
    # unsimulable or illegal choices count as a full loss of margin
    true_scores = np.stack([np.where(np.isfinite(r.scores), r.scores, -1.0) for r in ref])
    rows = np.arange(len(pool))

    cache: dict[tuple[tuple[int, ...], str], tuple[float, float]] = {}

    def rank(indices: tuple[int, ...], fill: str) -> tuple[float, float]:
        key = (indices, fill)
        if key not in cache:
            vals = _apply_candidate(base, indices, fill, large)
            picked = np.array([defender.act_index(o.with_values(v)) for o, v in zip(pool, vals)])
            harm = np.maximum(true_scores[rows, ref_best] - true_scores[rows, picked], 0.0)
            cache[key] = (float(harm.mean()), float(np.mean(picked != ref_best)))
        return cache[key]

    def order(cands, fill):
        return sorted(cands, key=lambda c: (*(-x for x in rank(c, fill)), c))

    n = base.shape[1]
    candidates: list[tuple[tuple[int, ...], str]] = []
    for fill in ("zero", "large"):
        singles = order(((i,) for i in range(n)), fill)
        pairs = order({tuple(sorted((*c, j))) for c in singles[:beam] for j in range(n) if j not in c}, fill)
        triples = order({tuple(sorted((*c, j))) for c in pairs[:beam] for j in range(n) if j not in c}, fill)
        candidates += [(c, fill) for c in singles + pairs + triples]
    candidates.sort(key=lambda cf: (*(-x for x in rank(*cf)), len(cf[0]), cf[1], cf[0]))
    chosen = [PerturbationAction("set_values", c, fill) for c, fill in candidates[:budget]]

    targets = action_group_targets(defender, pool)
    actions = [NO_PERTURBATION, *chosen, *(PerturbationAction("adversarial", target=t) for t in targets)]
    return actions, large


def action_group_targets(defender, pool: Sequence[Observation]) -> list[int]:
    """One representative defender action per affected-substation group.

    Only busbar splits are eligible; the representative is the split with the
    best mean score over the pool (lowest id on ties).
    """
    mean_scores = np.zeros(len(defender.actions))
    for o in pool:
        s = defender.raw_scores(o)
        mean_scores += np.where(np.isfinite(s), s, -1e9)
    mean_scores /= len(pool)
    groups: dict[frozenset, list[int]] = {}
    for i, a in enumerate(defender.actions):
        if a.kind is ActionKind.SET_BUSBARS and not a.is_restoring:
            groups.setdefault(a.substations, []).append(i)
    reps = []
    for key in sorted(groups, key=lambda g: sorted(g)):
        members = groups[key]
        reps.append(min(members, key=lambda i: (-mean_scores[i], i)))
    return reps


# -- learning ------------------------------------------------------------------


class AttackEnv(Protocol):
    horizon: int

    def reset(self, episode: int) -> Any: ...

    def step(self, action: Any) -> Any: ...


def rlpa_act(q: QFunction, state: Hashable, epsilon: float, rng: np.random.Generator | None) -> int:
    """Epsilon-greedy choice; with epsilon == 0 no randomness is consumed."""
    if epsilon > 0.0 and rng is not None and rng.random() < epsilon:
        return int(rng.integers(q.n_actions))
    return q.greedy(state)


def rlpa_train(
    cfg: RlpaConfig,
    env: AttackEnv,
    defender,
    attacker,
    rng: np.random.Generator,
    q: QFunction | None = None,
    on_episode: Callable[[int, float], None] | None = None,
) -> QFunction:
    """Epsilon-greedy tabular Q-learning over perturbation actions.

    Attacker reward is the negated defender reward, plus ``cfg.bonus`` when the
    grid fails before the episode horizon.  Terminal transitions do not
    bootstrap.
    """
    q = q if q is not None else QFunction(attacker.n_actions)
    for h in range(cfg.episodes):
        obs = env.reset(h)
        s = attacker.features(obs)
        total = 0.0
        for _ in range(cfg.max_steps):
            p = rlpa_act(q, s, cfg.epsilon, rng)
            adv = attacker.perturb(p, obs)
            result = env.step(defender.act(adv))
            reward = -float(result.reward)
            if result.done and not result.legal:
                reward += cfg.bonus
            s_next = attacker.features(result.observation)
            target = reward if result.done else reward + cfg.gamma * float(np.max(q.values(s_next)))
            row = q.row(s)
            row[p] += cfg.alpha * (target - row[p])
            total += reward
            obs, s = result.observation, s_next
            if result.done:
                break
        if on_episode is not None:
            on_episode(h, total)
    return q


def config_dict(cfg: RlpaConfig) -> dict[str, Any]:
    return asdict(cfg)
