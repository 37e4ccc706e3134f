"""Deterministic grid simulation: state transitions, observations and rewards.

Overload rules: a line above 100 % loading for ``SOFT_STEPS`` consecutive
steps trips, a line at or above 200 % trips at once.  Tripped lines stay out
for ``TRIP_COOLDOWN`` steps.  Any load cut off from the slack island is a
grid failure.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .chronics import STEPS_PER_DAY, Chronics
from .model import GridModel
from .powerflow import Sensitivity, sensitivity
from .topology import DO_NOTHING, Action, ActionKind, Topology

SOFT_LIMIT = 1.0
HARD_LIMIT = 2.0
SOFT_STEPS = 3
TRIP_COOLDOWN = 10
ACTION_COOLDOWN = 3

GROUPS = ("gen", "load", "flow")


class EpisodeOverError(RuntimeError):
    """step() called on a state that already terminated."""


@dataclass(frozen=True)
class ObservationLayout:
    """Position -> (group, element id) for the flat observation vector."""

    groups: tuple[str, ...]
    elements: tuple[int, ...]

    @classmethod
    def for_model(cls, model: GridModel) -> ObservationLayout:
        groups = ("gen",) * model.n_gens + ("load",) * model.n_loads + ("flow",) * model.n_lines
        elements = (
            tuple(range(model.n_gens)) + tuple(range(model.n_loads)) + tuple(range(model.n_lines))
        )
        return cls(groups, elements)

    def __len__(self) -> int:
        return len(self.groups)

    def slice(self, group: str) -> slice:
        start = self.groups.index(group)
        return slice(start, start + self.groups.count(group))


@dataclass(frozen=True)
class Observation:
    """Sensor vector [gen | load | flow] in MW plus non-numeric context.

    Only ``values`` is exposed to perturbation; topology, cooldowns and the
    step index are the operator's own bookkeeping.
    """

    values: np.ndarray
    layout: ObservationLayout
    topology: Topology
    sub_cooldown: tuple[int, ...]
    line_cooldown: tuple[int, ...]
    step: int

    def with_values(self, values: np.ndarray) -> Observation:
        return replace(self, values=np.asarray(values, dtype=float))

    def group(self, name: str) -> np.ndarray:
        return self.values[self.layout.slice(name)]

    @property
    def time_of_day(self) -> int:
        return self.step % STEPS_PER_DAY


@dataclass(frozen=True)
class GridState:
    step: int
    topology: Topology
    overload_count: tuple[int, ...]
    sub_cooldown: tuple[int, ...]
    line_cooldown: tuple[int, ...]
    gen: np.ndarray
    load: np.ndarray
    flows: np.ndarray
    rho: np.ndarray
    done: bool = False
    legal: bool = True


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    reward: float
    done: bool
    legal: bool
    tripped: tuple[int, ...] = ()
    rejected: bool = False
    action: Action = DO_NOTHING  # action actually applied
    diagnostics: tuple[str, ...] = field(default=())


def line_reward(rho: np.ndarray, status: tuple[bool, ...] | np.ndarray) -> float:
    """Mean line margin max(0, 1 - rho^2) over in-service lines."""
    on = np.asarray(status, dtype=bool)
    if not on.any():
        return 0.0
    return float(np.mean(np.maximum(0.0, 1.0 - rho[on] ** 2)))


def illegal_reason(
    model: GridModel,
    topology: Topology,
    sub_cooldown: tuple[int, ...],
    line_cooldown: tuple[int, ...],
    action: Action,
) -> str | None:
    kind = action.kind
    if kind is ActionKind.DO_NOTHING:
        return None
    if kind is ActionKind.SET_BUSBARS:
        if action.substation not in model.substation_elements:
            return f"unknown substation {action.substation}"
        refs = model.substation_elements[action.substation]
        if tuple(r for r, _ in action.assignment) != refs:
            return f"assignment does not cover substation {action.substation}"
        if any(bb not in (1, 2) for _, bb in action.assignment):
            return "busbar must be 1 or 2"
        if sub_cooldown[model.bus_index[action.substation]] > 0:
            return f"substation {action.substation} on cooldown"
        return None
    line = action.line
    if line is None or not 0 <= line < model.n_lines:
        return f"unknown line {line}"
    if line_cooldown[line] > 0:
        return f"line {line} on cooldown"
    connected = topology.line_status[line]
    if kind is ActionKind.RECONNECT_LINE and connected:
        return f"line {line} already connected"
    if kind is ActionKind.DISCONNECT_LINE and not connected:
        return f"line {line} already disconnected"
    return None


def apply_topology(model: GridModel, topology: Topology, action: Action) -> Topology:
    if action.kind is ActionKind.SET_BUSBARS:
        return topology.with_assignment(model, action.substation, tuple(bb for _, bb in action.assignment))
    if action.kind is ActionKind.RECONNECT_LINE:
        return topology.with_line_status(action.line, True)
    if action.kind is ActionKind.DISCONNECT_LINE:
        return topology.with_line_status(action.line, False)
    return topology


@dataclass(frozen=True)
class _Solved:
    sens: Sensitivity
    gen: np.ndarray
    flows: np.ndarray
    rho: np.ndarray
    islanded_load: bool


def _solve(model: GridModel, topology: Topology, gen_set: np.ndarray, load: np.ndarray) -> _Solved:
    sens = sensitivity(model, topology)
    gen = np.where(sens.gen_isolated, 0.0, gen_set)
    slack = model.slack_gen
    if slack is not None:
        served = np.where(sens.load_isolated, 0.0, load).sum()
        gen[slack] = 0.0
        gen[slack] = served - gen.sum()
    if not sens.ok:
        flows = np.full(model.n_lines, np.nan)
    else:
        flows = sens.flows(gen, np.where(sens.load_isolated, 0.0, load))
    rho = np.abs(flows) / model.limits
    islanded = bool(np.any(sens.load_isolated & (load > 0)))
    return _Solved(sens, gen, flows, rho, islanded)


def initial_state(model: GridModel, chronics: Chronics) -> GridState:
    topo = Topology.reference(model)
    sol = _solve(model, topo, chronics.gen[0].copy(), chronics.load[0].copy())
    legal = sol.sens.ok and not sol.islanded_load
    return GridState(
        step=0,
        topology=topo,
        overload_count=(0,) * model.n_lines,
        sub_cooldown=(0,) * len(model.buses),
        line_cooldown=(0,) * model.n_lines,
        gen=sol.gen,
        load=chronics.load[0].copy(),
        flows=sol.flows,
        rho=sol.rho,
        done=not legal,
        legal=legal,
    )


@lru_cache(maxsize=64)
def layout_for(model: GridModel) -> ObservationLayout:
    return ObservationLayout.for_model(model)


def observe(model: GridModel, state: GridState) -> Observation:
    values = np.concatenate([state.gen, state.load, np.nan_to_num(state.flows)])
    return Observation(
        values=values,
        layout=layout_for(model),
        topology=state.topology,
        sub_cooldown=state.sub_cooldown,
        line_cooldown=state.line_cooldown,
        step=state.step,
    )


def step(model: GridModel, state: GridState, action: Action, chronics: Chronics) -> tuple[GridState, StepResult]:
    """Advance one 5-minute step.  Pure: returns the successor state."""
    if state.done:
        raise EpisodeOverError(f"episode already terminated at step {state.step}")
    k = state.step + 1
    if k >= len(chronics):
        raise EpisodeOverError(f"chronics exhausted at step {state.step}")
    diagnostics: list[str] = []
    reason = illegal_reason(model, state.topology, state.sub_cooldown, state.line_cooldown, action)
    rejected = reason is not None
    if rejected:
        diagnostics.append(f"rejected: {reason}")
        action = DO_NOTHING

    topo = apply_topology(model, state.topology, action)
    sub_cd = [max(0, c - 1) for c in state.sub_cooldown]
    line_cd = [max(0, c - 1) for c in state.line_cooldown]
    if action.kind is ActionKind.SET_BUSBARS:
        sub_cd[model.bus_index[action.substation]] = ACTION_COOLDOWN
    elif action.line is not None:
        line_cd[action.line] = ACTION_COOLDOWN

    gen_set = chronics.gen[k].copy()
    load = chronics.load[k].copy()
    counts = list(state.overload_count)
    tripped: list[int] = []
    first = True
    while True:
        sol = _solve(model, topo, gen_set, load)
        if not sol.sens.ok or sol.islanded_load:
            break
        trip_now = []
        for l in range(model.n_lines):
            if not topo.line_status[l]:
                counts[l] = 0
                continue
            r = sol.rho[l]
            if r >= HARD_LIMIT:
                trip_now.append(l)
                continue
            if first:
                counts[l] = counts[l] + 1 if r > SOFT_LIMIT else 0
                if counts[l] >= SOFT_STEPS:
                    trip_now.append(l)
        first = False
        if not trip_now:
            break
        for l in trip_now:
            topo = topo.with_line_status(l, False)
            counts[l] = 0
            line_cd[l] = TRIP_COOLDOWN
            tripped.append(l)

    if tripped:
        diagnostics.append("tripped: " + ",".join(map(str, tripped)))
    legal = sol.sens.ok and not sol.islanded_load
    if not legal:
        diagnostics.append("grid failure: load islanded" if sol.sens.ok else "grid failure: solver")
    done = (not legal) or k == len(chronics) - 1
    reward = line_reward(sol.rho, topo.line_status) if legal else 0.0
    new_state = GridState(
        step=k,
        topology=topo,
        overload_count=tuple(counts),
        sub_cooldown=tuple(sub_cd),
        line_cooldown=tuple(line_cd),
        gen=sol.gen,
        load=load,
        flows=sol.flows,
        rho=sol.rho,
        done=done,
        legal=legal,
    )
    result = StepResult(
        observation=observe(model, new_state),
        reward=reward,
        done=done,
        legal=legal,
        tripped=tuple(tripped),
        rejected=rejected,
        action=action,
        diagnostics=tuple(diagnostics),
    )
    return new_state, result


def simulate(model: GridModel, state: GridState, action: Action) -> StepResult:
    """One-step lookahead with persistence forecast; no overload dynamics."""
    reason = illegal_reason(model, state.topology, state.sub_cooldown, state.line_cooldown, action)
    rejected = reason is not None
    if rejected:
        action = DO_NOTHING
    topo = apply_topology(model, state.topology, action)
    sol = _solve(model, topo, state.gen.copy(), state.load.copy())
    legal = sol.sens.ok and not sol.islanded_load
    predicted = replace(state, topology=topo, gen=sol.gen, flows=sol.flows, rho=sol.rho, legal=legal, done=not legal)
    return StepResult(
        observation=observe(model, predicted),
        reward=line_reward(sol.rho, topo.line_status) if legal else 0.0,
        done=not legal,
        legal=legal,
        rejected=rejected,
        action=action,
        diagnostics=(f"rejected: {reason}",) if rejected else (),
    )


class GridEnv:
    """Stateful convenience wrapper around :func:`step` for episode loops."""

    def __init__(self, model: GridModel, chronics: Chronics):
        self.model = model
        self.chronics = chronics
        self.state = initial_state(model, chronics)

    @property
    def horizon(self) -> int:
        """Number of steps in a complete episode."""
        return len(self.chronics) - 1

    def reset(self, chronics: Chronics | None = None) -> Observation:
        if chronics is not None:
            self.chronics = chronics
        self.state = initial_state(self.model, self.chronics)
        return observe(self.model, self.state)

    def observe(self) -> Observation:
        return observe(self.model, self.state)

    def step(self, action: Action) -> StepResult:
        self.state, result = step(self.model, self.state, action, self.chronics)
        return result

    def simulate(self, action: Action) -> StepResult:
        return simulate(self.model, self.state, action)
