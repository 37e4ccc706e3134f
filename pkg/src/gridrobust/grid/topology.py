"""Busbar assignments, discrete topology actions and action-space enumeration."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

from .model import ElementRef, GridModel


@dataclass(frozen=True)
class Topology:
    """Element-to-busbar assignment (1 or 2) plus line in-service flags.

    Busbar tuples are indexed by element id within each kind.
    """

    line_or: tuple[int, ...]
    line_ex: tuple[int, ...]
    gen: tuple[int, ...]
    load: tuple[int, ...]
    line_status: tuple[bool, ...]

    @classmethod
    def reference(cls, model: GridModel) -> Topology:
        return cls(
            line_or=(1,) * model.n_lines,
            line_ex=(1,) * model.n_lines,
            gen=(1,) * model.n_gens,
            load=(1,) * model.n_loads,
            line_status=(True,) * model.n_lines,
        )

    def busbar(self, ref: ElementRef) -> int:
        kind, idx = ref
        return getattr(self, kind)[idx]

    def substation_assignment(self, model: GridModel, sub: int) -> tuple[int, ...]:
        return tuple(self.busbar(ref) for ref in model.substation_elements[sub])

    def with_assignment(self, model: GridModel, sub: int, assignment: tuple[int, ...]) -> Topology:
        parts = {k: list(getattr(self, k)) for k in ("line_or", "line_ex", "gen", "load")}
        for (kind, idx), bb in zip(model.substation_elements[sub], assignment):
            parts[kind][idx] = bb
        return Topology(
            line_or=tuple(parts["line_or"]),
            line_ex=tuple(parts["line_ex"]),
            gen=tuple(parts["gen"]),
            load=tuple(parts["load"]),
            line_status=self.line_status,
        )

    def with_line_status(self, line: int, status: bool) -> Topology:
        st = list(self.line_status)
        st[line] = status
        return Topology(self.line_or, self.line_ex, self.gen, self.load, tuple(st))

    def is_split(self, model: GridModel, sub: int) -> bool:
        return any(b != 1 for b in self.substation_assignment(model, sub))


class ActionKind(str, Enum):
    DO_NOTHING = "do_nothing"
    SET_BUSBARS = "set_busbars"
    RECONNECT_LINE = "reconnect_line"
    DISCONNECT_LINE = "disconnect_line"


# one atomic change: ((kind, element id, attribute), target)
Change = tuple[tuple[str, int, str], object]


@dataclass(frozen=True)
class Action:
    kind: ActionKind = ActionKind.DO_NOTHING
    substation: int | None = None
    assignment: tuple[tuple[ElementRef, int], ...] = ()
    line: int | None = None
    line_subs: tuple[int, ...] = ()

    @property
    def is_do_nothing(self) -> bool:
        return self.kind is ActionKind.DO_NOTHING

    @property
    def changes(self) -> frozenset[Change]:
        if self.kind is ActionKind.SET_BUSBARS:
            return frozenset(((kind, idx, "busbar"), bb) for (kind, idx), bb in self.assignment)
        if self.kind is ActionKind.RECONNECT_LINE:
            return frozenset({(("line", self.line, "status"), "connected")})
        if self.kind is ActionKind.DISCONNECT_LINE:
            return frozenset({(("line", self.line, "status"), "disconnected")})
        return frozenset()

    @property
    def substations(self) -> frozenset[int]:
        if self.kind is ActionKind.SET_BUSBARS:
            return frozenset({self.substation})
        if self.kind in (ActionKind.RECONNECT_LINE, ActionKind.DISCONNECT_LINE):
            return frozenset(self.line_subs)
        return frozenset()

    @property
    def is_restoring(self) -> bool:
        """True for actions that move the grid back toward the reference topology."""
        if self.kind is ActionKind.RECONNECT_LINE:
            return True
        return self.kind is ActionKind.SET_BUSBARS and all(bb == 1 for _, bb in self.assignment)

    def label(self) -> str:
        if self.kind is ActionKind.SET_BUSBARS:
            bars = "".join(str(bb) for _, bb in self.assignment)
            return f"sub{self.substation}:{bars}"
        if self.kind is ActionKind.RECONNECT_LINE:
            return f"reconnect:{self.line}"
        if self.kind is ActionKind.DISCONNECT_LINE:
            return f"disconnect:{self.line}"
        return "do_nothing"


DO_NOTHING = Action()


def set_busbars(model: GridModel, sub: int, assignment: tuple[int, ...]) -> Action:
    refs = model.substation_elements[sub]
    if len(refs) != len(assignment):
        raise ValueError(f"substation {sub} has {len(refs)} elements, got {len(assignment)}")
    return Action(ActionKind.SET_BUSBARS, substation=sub, assignment=tuple(zip(refs, assignment)))


def reconnect_line(model: GridModel, line: int) -> Action:
    ln = model.lines[line]
    return Action(ActionKind.RECONNECT_LINE, line=line, line_subs=(ln.from_bus, ln.to_bus))


def disconnect_line(model: GridModel, line: int) -> Action:
    ln = model.lines[line]
    return Action(ActionKind.DISCONNECT_LINE, line=line, line_subs=(ln.from_bus, ln.to_bus))


def _valid_split(refs: tuple[ElementRef, ...], assignment: tuple[int, ...]) -> bool:
    for bb in (1, 2):
        on_bar = [ref for ref, b in zip(refs, assignment) if b == bb]
        if len(on_bar) < 2:
            return False
        # two line ends per busbar: one trip can never strand the busbar
        if sum(kind.startswith("line") for kind, _ in on_bar) < 2:
            return False
    return True


def enumerate_actions(model: GridModel, min_elements: int = 4, cap: int = 150) -> list[Action]:
    """Fixed discrete action set; index 0 is do-nothing.

    Per eligible substation: the reference-restoring assignment followed by every
    two-busbar split (first element pinned to busbar 1) where each busbar keeps at
    least two line ends.  Line reconnections come last.
    """
    actions = [DO_NOTHING]
    splits: list[Action] = []
    restores: list[Action] = []
    for sub in model.buses:
        refs = model.substation_elements[sub]
        if len(refs) < min_elements:
            continue
        restores.append(set_busbars(model, sub, (1,) * len(refs)))
        for tail in itertools.product((1, 2), repeat=len(refs) - 1):
            assignment = (1, *tail)
            if _valid_split(refs, assignment):
                splits.append(set_busbars(model, sub, assignment))
    reconnects = [reconnect_line(model, ln.id) for ln in model.lines]
    room = max(0, cap - 1 - len(restores) - len(reconnects))
    actions.extend(restores)
    actions.extend(splits[:room])
    actions.extend(reconnects)
    return actions
