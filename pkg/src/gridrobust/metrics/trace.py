"""Per-step record of one paired (unperturbed, perturbed) episode."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

NO_PERTURBATION = -1


@dataclass
class EpisodeTrace:
    """Arrays suffixed ``_u`` come from the unperturbed run, ``_p`` from the perturbed one.

    ``states_*`` hold the true observation after each step.  In the perturbed
    run ``actions_adv`` are the executed actions and ``actions_cf`` the actions
    the defender would have taken on the true observation at the same step.
    ``deltas`` is the perturbed-minus-true observation handed to the defender.
    """

    rewards_u: np.ndarray
    rewards_p: np.ndarray
    actions_u: np.ndarray
    actions_adv: np.ndarray
    actions_cf: np.ndarray
    legal_u: np.ndarray
    legal_p: np.ndarray
    states_u: np.ndarray
    states_p: np.ndarray
    flags: np.ndarray
    deltas: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        kp = len(self.rewards_p)
        for name in ("actions_adv", "actions_cf", "legal_p", "states_p", "flags", "deltas"):
            if len(getattr(self, name)) != kp:
                raise ValueError(f"{name} must have one row per perturbed step")
        ku = len(self.rewards_u)
        for name in ("actions_u", "legal_u", "states_u"):
            if len(getattr(self, name)) != ku:
                raise ValueError(f"{name} must have one row per unperturbed step")
        if self.flags.ndim != 2 or self.flags.shape != self.deltas.shape:
            raise ValueError("flags and deltas must be (steps, n_obs)")

    @property
    def k_u(self) -> int:
        return len(self.rewards_u)

    @property
    def k_p(self) -> int:
        return len(self.rewards_p)

    @property
    def aligned(self) -> int:
        return min(self.k_u, self.k_p)

    @property
    def first_perturbation(self) -> int:
        """Step index of the first altered reading, or -1 if none."""
        hit = np.flatnonzero(self.flags.any(axis=1))
        return int(hit[0]) if hit.size else NO_PERTURBATION

    def save(self, path: str | Path) -> None:
        arrays = {
            name: getattr(self, name)
            for name in (
                "rewards_u",
                "rewards_p",
                "actions_u",
                "actions_adv",
                "actions_cf",
                "legal_u",
                "legal_p",
                "states_u",
                "states_p",
                "flags",
                "deltas",
            )
        }
        np.savez_compressed(path, meta=np.array(json.dumps(self.meta, sort_keys=True)), **arrays)

    @classmethod
    def load(cls, path: str | Path) -> EpisodeTrace:
        with np.load(path, allow_pickle=False) as data:
            kw = {k: data[k] for k in data.files if k != "meta"}
            meta = json.loads(str(data["meta"]))
        return cls(meta=meta, **kw)
