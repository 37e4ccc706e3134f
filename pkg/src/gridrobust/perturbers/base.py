"""Observation interceptors used by the episode runner.

A perturber sees the true observation and returns the copy handed to the
defender plus a mask of the entries it altered.  It never touches grid state.
"""

from __future__ import annotations

import numpy as np

from ..grid.env import Observation
from .gradient import GepaConfig, gepa_attack
from .random_agent import PerturbationRecord, RpaConfig, rpa_apply
from .rl_agent import QFunction, SensorAttacker, rlpa_act


class NullPerturber:
    name = "none"

    def reset(self, rng: np.random.Generator) -> None:
        pass

    def perturb(self, obs: Observation) -> tuple[Observation, np.ndarray]:
        return obs, np.zeros(len(obs.values), dtype=bool)


class RandomPerturber:
    name = "rpa"

    def __init__(self, cfg: RpaConfig):
        self.cfg = cfg
        self.active: list[PerturbationRecord] = []
        self.rng = np.random.default_rng(0)

    def reset(self, rng: np.random.Generator) -> None:
        self.active = []
        self.rng = rng

    def perturb(self, obs: Observation) -> tuple[Observation, np.ndarray]:
        values, self.active, flags = rpa_apply(self.cfg, self.rng, self.active, obs.values, obs.layout.groups)
        return obs.with_values(values), flags


class GradientPerturber:
    """Attacks every step: lowers the score of the action the defender would pick."""

    name = "gepa"

    def __init__(self, cfg: GepaConfig, defender):
        self.cfg = cfg
        self.defender = defender

    def reset(self, rng: np.random.Generator) -> None:
        pass

    def perturb(self, obs: Observation) -> tuple[Observation, np.ndarray]:
        chosen = self.defender.act_index(obs)

        def objective(batch: np.ndarray) -> np.ndarray:
            return self.defender.action_score(obs, chosen, batch)

        values = np.asarray(obs.values, dtype=float)
        adv = gepa_attack(self.cfg, objective, values, batched=True)
        return obs.with_values(adv), adv != values


class RlPerturber:
    """Greedy policy of a trained Q-table over a fixed perturbation set."""

    name = "rlpa"

    def __init__(self, q: QFunction, attacker: SensorAttacker):
        self.q = q
        self.attacker = attacker
        self.last_choice = 0

    def reset(self, rng: np.random.Generator) -> None:
        self.last_choice = 0

    def perturb(self, obs: Observation) -> tuple[Observation, np.ndarray]:
        p = rlpa_act(self.q, self.attacker.features(obs), 0.0, None)
        self.last_choice = p
        values = np.asarray(obs.values, dtype=float)
        adv = self.attacker.perturb_values(p, obs)
        return obs.with_values(adv), adv != values
