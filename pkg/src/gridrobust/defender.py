"""Greedy one-step-lookahead topology agent with activation gating.

The agent rebuilds its world model from the observation alone.  Predicted
flows for each candidate topology are the DC flows implied by the gen/load
readings; the flow readings only decide whether the agent wakes up at all.
Anything written into the observation is believed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid.env import Observation, apply_topology
from .grid.model import GridModel
from .grid.powerflow import sensitivity
from .grid.topology import DO_NOTHING, Action, ActionKind, Topology, enumerate_actions


@dataclass(frozen=True)
class DefenderConfig:
    rho_act: float = 0.95
    rho_safe: float = 0.80

    def __post_init__(self) -> None:
        if not 0.0 < self.rho_safe < self.rho_act:
            raise ValueError("need 0 < rho_safe < rho_act")


@dataclass(frozen=True)
class PolicyScores:
    scores: np.ndarray  # one per action; -inf where not simulable or illegal
    best: int  # index of the action the policy selects

    @property
    def argmax(self) -> int:
        return self.best


@dataclass(frozen=True)
class _TopologyTable:
    matrix: np.ndarray  # (A, L, E) flow per unit injection after each action
    line_on: np.ndarray  # (A, L) in-service mask after the action
    simulable: np.ndarray  # (A,) no islanded load, solvable


class GreedyDefender:
    """Scores each action by 1 - max predicted loading and picks the best.

    Stateless apart from a cache of per-topology sensitivity tables, so calls
    with equal observations always return equal results.
    """

    def __init__(
        self,
        model: GridModel,
        actions: list[Action] | None = None,
        config: DefenderConfig | None = None,
        reference: Topology | None = None,
    ):
        self.model = model
        self.actions = actions if actions is not None else enumerate_actions(model)
        if not self.actions or not self.actions[0].is_do_nothing:
            raise ValueError("action set must start with do-nothing")
        self.config = config or DefenderConfig()
        self.reference = reference or Topology.reference(model)
        self.limits = model.limits
        self._n_inj = model.n_gens + model.n_loads
        self._tables: dict[Topology, _TopologyTable] = {}
        bi = model.bus_index
        self._action_sub = np.array(
            [bi[a.substation] if a.kind is ActionKind.SET_BUSBARS else -1 for a in self.actions]
        )
        self._action_line = np.array([a.line if a.line is not None else -1 for a in self.actions])
        self._reconnect = np.array([a.kind is ActionKind.RECONNECT_LINE for a in self.actions])
        self._disconnect = np.array([a.kind is ActionKind.DISCONNECT_LINE for a in self.actions])
        self._restoring = np.array([a.is_restoring for a in self.actions])
        self._loads_positive = np.array([d.base > 0 for d in model.loads])

    # -- world model -------------------------------------------------------

    def _table(self, topology: Topology) -> _TopologyTable:
        tab = self._tables.get(topology)
        if tab is not None:
            return tab
        if len(self._tables) > 512:
            self._tables.clear()
        n_a, n_l = len(self.actions), self.model.n_lines
        matrix = np.zeros((n_a, n_l, self._n_inj))
        line_on = np.zeros((n_a, n_l), dtype=bool)
        simulable = np.zeros(n_a, dtype=bool)
        for i, a in enumerate(self.actions):
            topo = apply_topology(self.model, topology, a)
            sens = sensitivity(self.model, topo)
            line_on[i] = topo.line_status
            if not sens.ok or np.any(sens.load_isolated & self._loads_positive):
                continue
            simulable[i] = True
            matrix[i] = sens.matrix
        tab = _TopologyTable(matrix, line_on, simulable)
        self._tables[topology] = tab
        return tab

    def _legal(self, obs: Observation) -> np.ndarray:
        sub_cd = np.asarray(obs.sub_cooldown)
        line_cd = np.asarray(obs.line_cooldown)
        status = np.asarray(obs.topology.line_status)
        legal = np.ones(len(self.actions), dtype=bool)
        subs = self._action_sub >= 0
        legal[subs] = sub_cd[self._action_sub[subs]] == 0
        lines = self._action_line >= 0
        li = self._action_line[lines]
        ok = line_cd[li] == 0
        ok &= np.where(self._reconnect[lines], ~status[li], True)
        ok &= np.where(self._disconnect[lines], status[li], True)
        legal[lines] = ok
        return legal

    def _predicted_rho(self, tab: _TopologyTable, values: np.ndarray, idx=slice(None)) -> np.ndarray:
        """Predicted loading for actions ``idx`` given one or many value vectors.

        ``values`` is (n_obs,) or (m, n_obs); result is (..., A, L).
        """
        inj = values[..., : self._n_inj]
        pred = np.einsum("ale,...e->...al", tab.matrix[idx], inj)
        rho = np.abs(pred) / self.limits
        return np.where(tab.line_on[idx], rho, 0.0)

    # -- policy ------------------------------------------------------------

    def max_rho_reading(self, obs: Observation) -> float:
        flows = obs.group("flow")
        on = np.asarray(obs.topology.line_status)
        if not on.any():
            return 0.0
        return float(np.max(np.abs(flows[on]) / self.limits[on]))

    def raw_scores(self, obs: Observation) -> np.ndarray:
        tab = self._table(obs.topology)
        rho = self._predicted_rho(tab, np.asarray(obs.values, dtype=float))
        scores = 1.0 - rho.max(axis=-1)
        valid = tab.simulable & self._legal(obs)
        return np.where(valid & np.isfinite(scores), scores, -np.inf)

    def policy_scores(self, obs: Observation) -> PolicyScores:
        scores = self.raw_scores(obs)
        return PolicyScores(scores, self._select(obs, scores))

    def _select(self, obs: Observation, scores: np.ndarray) -> int:
        cfg = self.config
        reading = self.max_rho_reading(obs)
        if reading < cfg.rho_act:
            if obs.topology != self.reference and reading < cfg.rho_safe:
                return self._first_restoring(obs, scores)
            return 0
        # np.argmax returns the lowest index among ties
        return int(np.argmax(scores))

    def _first_restoring(self, obs: Observation, scores: np.ndarray) -> int:
        topo = obs.topology
        for i in np.flatnonzero(self._restoring & np.isfinite(scores)):
            a = self.actions[i]
            if a.kind is ActionKind.SET_BUSBARS and not topo.is_split(self.model, a.substation):
                continue
            return int(i)
        return 0

    def act_index(self, obs: Observation) -> int:
        return self.policy_scores(obs).best

    def act(self, obs: Observation) -> Action:
        return self.actions[self.act_index(obs)]

    def action_score(self, obs: Observation, action_index: int, values: np.ndarray) -> np.ndarray:
        """Score of one fixed action for a batch of alternative value vectors.

        Used as the attacker's objective; topology and cooldowns come from
        ``obs``.  Returns shape (m,) for ``values`` of shape (m, n_obs).
        """
        tab = self._table(obs.topology)
        vals = np.atleast_2d(np.asarray(values, dtype=float))
        rho = self._predicted_rho(tab, vals, slice(action_index, action_index + 1))
        return 1.0 - rho[:, 0, :].max(axis=-1)


__all__ = ["DefenderConfig", "GreedyDefender", "PolicyScores", "DO_NOTHING"]
