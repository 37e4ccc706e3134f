"""Paired-episode campaigns and the RLPA training workflow.

Seed splitting: every random stream is ``SeedSequence([seed, episode, role])``
where ``role`` is one of the ``ROLE_*`` tags below.  Chronics depend only on
the master seed and episode index, so both members of a pair, and every
perturber variant, see the same load and generation profile.  The attacker
stream uses ``perturber.seed`` in place of the master seed when one is given.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import __version__
from ..defender import GreedyDefender
from ..grid.chronics import Chronics, generate_chronics
from ..grid.env import ObservationLayout, initial_state, layout_for, observe, step
from ..grid.model import GridModel, load_grid
from ..metrics import EpisodeTrace, ResilienceReport, RobustnessReport, build_reports
from ..perturbers import (
    GradientPerturber,
    NullPerturber,
    RandomPerturber,
    RlPerturber,
    SensorAttacker,
    load_qfunction,
    reduce_action_space,
    rlpa_train,
    save_qfunction,
)
from .config import CampaignConfig

log = logging.getLogger(__name__)

ROLE_CHRONICS = 0
ROLE_ATTACKER = 1
ROLE_TRAIN_CHRONICS = 2
ROLE_TRAIN_AGENT = 3


def stream(seed: int, episode: int, role: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, episode, role])


def episode_chronics(cfg: CampaignConfig, model: GridModel, episode: int, role: int = ROLE_CHRONICS) -> Chronics:
    chronics_seed = int(stream(cfg.seed, episode, role).generate_state(1)[0])
    c = cfg.chronics
    return generate_chronics(
        model,
        cfg.max_steps + 1,
        chronics_seed,
        amplitude=c.amplitude,
        load_sigma=c.load_sigma,
        renewable_sigma=c.renewable_sigma,
        scale=c.scale,
    )


def attacker_rng(cfg: CampaignConfig, episode: int) -> np.random.Generator:
    base = cfg.perturber.seed if cfg.perturber.seed is not None else cfg.seed
    return np.random.default_rng(stream(base, episode, ROLE_ATTACKER))


@dataclass
class RunRecord:
    rewards: list[float] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    counterfactual: list[int] = field(default_factory=list)
    legal: list[bool] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    flags: list[np.ndarray] = field(default_factory=list)
    deltas: list[np.ndarray] = field(default_factory=list)


def run_episode(model: GridModel, chronics: Chronics, defender: GreedyDefender, perturber) -> RunRecord:
    """One episode with the defender acting on whatever the perturber hands it.

    The counterfactual choice on the true observation is only recomputed
    when some reading was altered; otherwise it equals the executed choice.
    """
    state = initial_state(model, chronics)
    rec = RunRecord()
    obs = observe(model, state)
    while not state.done:
        adv, flags = perturber.perturb(obs)
        chosen = defender.act_index(adv)
        cf = defender.act_index(obs) if flags.any() else chosen
        state, res = step(model, state, defender.actions[chosen], chronics)
        rec.rewards.append(res.reward)
        rec.actions.append(chosen)
        rec.counterfactual.append(cf)
        rec.legal.append(res.legal)
        rec.states.append(res.observation.values)
        rec.flags.append(flags)
        rec.deltas.append(np.asarray(adv.values, dtype=float) - np.asarray(obs.values, dtype=float))
        obs = res.observation
    return rec


def _arr(values: Sequence, dtype, width: int | None = None) -> np.ndarray:
    if width is not None and not values:
        return np.zeros((0, width), dtype=dtype)
    return np.asarray(values, dtype=dtype)


@dataclass
class CampaignContext:
    """Objects shared across the episodes of one campaign."""

    config: CampaignConfig
    model: GridModel
    defender: GreedyDefender
    rlpa: tuple | None = None  # (q, actions, large_fill)

    @classmethod
    def base(cls, cfg: CampaignConfig) -> CampaignContext:
        model = load_grid(cfg.grid)
        return cls(cfg, model, GreedyDefender(model, config=cfg.defender))

    @classmethod
    def build(cls, cfg: CampaignConfig) -> CampaignContext:
        """Base context plus the RLPA table, trained on the spot when no file is given."""
        ctx = cls.base(cfg)
        if cfg.perturber.kind == "rlpa":
            q_path = cfg.perturber.rlpa.q_path
            if q_path is None:
                q, actions, large = train_rlpa(cfg, ctx)
            else:
                q, actions, large, _ = load_qfunction(q_path)
            ctx.rlpa = (q, actions, large)
        return ctx

    def perturber(self):
        p = self.config.perturber
        if p.kind == "none":
            return NullPerturber()
        if p.kind == "rpa":
            return RandomPerturber(p.rpa.build())
        if p.kind == "gepa":
            return GradientPerturber(p.gepa.build(), self.defender)
        q, actions, large = self.rlpa
        return RlPerturber(q, SensorAttacker(actions, large, self.defender, p.rlpa.xi))


def run_paired_episode(ctx: CampaignContext, episode: int) -> EpisodeTrace:
    cfg = ctx.config
    try:
        chronics = episode_chronics(cfg, ctx.model, episode)
        base = run_episode(ctx.model, chronics, ctx.defender, NullPerturber())
        perturber = ctx.perturber()
        perturber.reset(attacker_rng(cfg, episode))
        pert = run_episode(ctx.model, chronics, ctx.defender, perturber)
    except Exception as exc:
        raise RuntimeError(f"episode {episode}: {exc}") from exc
    n = ctx.model.n_obs
    return EpisodeTrace(
        rewards_u=_arr(base.rewards, float),
        rewards_p=_arr(pert.rewards, float),
        actions_u=_arr(base.actions, np.int64),
        actions_adv=_arr(pert.actions, np.int64),
        actions_cf=_arr(pert.counterfactual, np.int64),
        legal_u=_arr(base.legal, bool),
        legal_p=_arr(pert.legal, bool),
        states_u=_arr(base.states, float, n),
        states_p=_arr(pert.states, float, n),
        flags=_arr(pert.flags, bool, n),
        deltas=_arr(pert.deltas, float, n),
        meta={"episode": episode, "perturber": cfg.perturber.kind, "seed": cfg.seed},
    )


@dataclass
class CampaignResult:
    config: CampaignConfig
    traces: list[EpisodeTrace]
    failures: dict[int, str]
    robustness: RobustnessReport | None
    resilience: ResilienceReport | None
    actions: list
    layout: ObservationLayout
    version: str = __version__


def aggregate(ctx: CampaignContext, traces: list[EpisodeTrace], failures: dict[int, str]) -> CampaignResult:
    rob = res = None
    if traces:
        rob, res = build_reports(traces, ctx.defender.actions, ctx.config.metrics)
    return CampaignResult(ctx.config, traces, failures, rob, res, ctx.defender.actions, layout_for(ctx.model))


def run_campaign(cfg: CampaignConfig, ctx: CampaignContext | None = None) -> CampaignResult:
    """Run every episode; an episode that raises is recorded and skipped."""
    ctx = ctx or CampaignContext.build(cfg)
    traces: list[EpisodeTrace] = []
    failures: dict[int, str] = {}
    for e in range(cfg.episodes):
        try:
            traces.append(run_paired_episode(ctx, e))
        except RuntimeError as exc:
            log.warning("%s", exc)
            failures[e] = str(exc)
    return aggregate(ctx, traces, failures)


# -- RLPA training ----------------------------------------------------------------


class _TrainingEnv:
    """Episode source for Q-learning; chronics come from a stream disjoint from evaluation."""

    def __init__(self, cfg: CampaignConfig, model: GridModel, steps: int):
        self.cfg = cfg
        self.model = model
        self.horizon = steps
        self.state = None
        self.chronics = None

    def reset(self, episode: int):
        cfg = replace(self.cfg, max_steps=self.horizon)
        self.chronics = episode_chronics(cfg, self.model, episode, ROLE_TRAIN_CHRONICS)
        self.state = initial_state(self.model, self.chronics)
        return observe(self.model, self.state)

    def step(self, action):
        self.state, res = step(self.model, self.state, action, self.chronics)
        return res


def observation_pool(ctx: CampaignContext, size: int, steps: int) -> list:
    """Evenly spaced true observations from one unperturbed training rollout."""
    env = _TrainingEnv(ctx.config, ctx.model, steps)
    obs = env.reset(0)
    seen = [obs]
    while not env.state.done:
        res = env.step(ctx.defender.act(obs))
        obs = res.observation
        if not env.state.done:
            seen.append(obs)
    if len(seen) <= size:
        return seen
    idx = np.linspace(0, len(seen) - 1, size).round().astype(int)
    return [seen[i] for i in idx]


def train_rlpa(cfg: CampaignConfig, ctx: CampaignContext | None = None):
    """Reduce the perturbation space, then run Q-learning.  Returns (q, actions, large_fill)."""
    ctx = ctx or CampaignContext.base(cfg)
    r = cfg.perturber.rlpa
    rl_cfg = r.build()
    pool = observation_pool(ctx, r.pool_size, rl_cfg.max_steps)
    actions, large = reduce_action_space(pool, ctx.defender, budget=r.budget, beam=r.beam)
    attacker = SensorAttacker(actions, large, ctx.defender, r.xi)
    env = _TrainingEnv(cfg, ctx.model, rl_cfg.max_steps)
    rng = np.random.default_rng(stream(cfg.seed, 0, ROLE_TRAIN_AGENT))
    q = rlpa_train(rl_cfg, env, ctx.defender, attacker, rng)
    return q, actions, large


def train_rlpa_cmd(cfg: CampaignConfig, path: str | Path) -> Path:
    """Train and persist the Q-table, perturbation set and training config."""
    q, actions, large = train_rlpa(cfg)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_qfunction(path, q, actions, large, cfg.to_dict())
    return path
