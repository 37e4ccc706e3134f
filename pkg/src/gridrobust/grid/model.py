"""Static network description and the grid-description file loader."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class GridFileError(ValueError):
    """Raised when a grid-description file cannot be parsed or validated."""


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    reactance: float  # per unit
    limit: float  # MW


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_max: float
    renewable: bool = False


@dataclass(frozen=True)
class Load:
    id: int
    bus: int
    base: float  # MW at the profile's mean


# element reference used in topology vectors: (kind, id) with kind in
# {"line_or", "line_ex", "gen", "load"}
ElementRef = tuple[str, int]


@dataclass(frozen=True, eq=False)
class GridModel:
    """Buses double as substations; each substation has two busbars."""

    name: str
    buses: tuple[int, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    loads: tuple[Load, ...]
    slack_bus: int
    substation_elements: dict[int, tuple[ElementRef, ...]] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        elements: dict[int, list[ElementRef]] = {b: [] for b in self.buses}
        for ln in self.lines:
            elements[ln.from_bus].append(("line_or", ln.id))
            elements[ln.to_bus].append(("line_ex", ln.id))
        for g in self.generators:
            elements[g.bus].append(("gen", g.id))
        for d in self.loads:
            elements[d.bus].append(("load", d.id))
        object.__setattr__(
            self, "substation_elements", {b: tuple(v) for b, v in elements.items()}
        )

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def n_gens(self) -> int:
        return len(self.generators)

    @property
    def n_loads(self) -> int:
        return len(self.loads)

    @property
    def n_obs(self) -> int:
        return self.n_gens + self.n_loads + self.n_lines

    @property
    def bus_index(self) -> dict[int, int]:
        return {b: i for i, b in enumerate(self.buses)}

    @property
    def limits(self) -> np.ndarray:
        return np.array([ln.limit for ln in self.lines], dtype=float)

    @property
    def slack_gen(self) -> int | None:
        for g in self.generators:
            if g.bus == self.slack_bus:
                return g.id
        return None

    def validate(self) -> None:
        ids = set(self.buses)
        if len(ids) != len(self.buses):
            raise GridFileError("bus ids must be unique")
        if self.slack_bus not in ids:
            raise GridFileError(f"slack bus {self.slack_bus} is not a declared bus")
        for kind, items in (("line", self.lines), ("generator", self.generators), ("load", self.loads)):
            if [it.id for it in items] != list(range(len(items))):
                raise GridFileError(f"{kind} ids must be 0..n-1 in file order")
        for ln in self.lines:
            if ln.from_bus not in ids or ln.to_bus not in ids:
                raise GridFileError(f"line {ln.id} references an unknown bus")
            if ln.from_bus == ln.to_bus:
                raise GridFileError(f"line {ln.id} is a self-loop")
            if not ln.reactance > 0:
                raise GridFileError(f"line {ln.id}: reactance must be strictly positive")
            if not ln.limit > 0:
                raise GridFileError(f"line {ln.id}: thermal limit must be strictly positive")
        for g in self.generators:
            if g.bus not in ids:
                raise GridFileError(f"generator {g.id} references an unknown bus")
            if g.p_max < 0:
                raise GridFileError(f"generator {g.id}: p_max must be non-negative")
        for d in self.loads:
            if d.bus not in ids:
                raise GridFileError(f"load {d.id} references an unknown bus")
            if d.base < 0:
                raise GridFileError(f"load {d.id}: base demand must be non-negative")
        if not self.lines and len(self.buses) > 1:
            raise GridFileError("reference topology is disconnected")
        if self.lines:
            idx = self.bus_index
            rows = [idx[ln.from_bus] for ln in self.lines]
            cols = [idx[ln.to_bus] for ln in self.lines]
            graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(ids), len(ids)))
            n_comp, _ = connected_components(graph, directed=False)
            if n_comp != 1:
                raise GridFileError("reference topology is disconnected")


def _parse(raw: dict) -> GridModel:
    try:
        model = GridModel(
            name=str(raw.get("name", "grid")),
            buses=tuple(int(b) for b in raw["buses"]),
            lines=tuple(
                Line(i, int(x["from"]), int(x["to"]), float(x["reactance"]), float(x["limit"]))
                for i, x in enumerate(raw["lines"])
            ),
            generators=tuple(
                Generator(i, int(x["bus"]), float(x["p_max"]), bool(x.get("renewable", False)))
                for i, x in enumerate(raw["generators"])
            ),
            loads=tuple(
                Load(i, int(x["bus"]), float(x.get("base", 0.0))) for i, x in enumerate(raw["loads"])
            ),
            slack_bus=int(raw["slack"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise GridFileError(f"malformed grid description: {exc!r}") from exc
    model.validate()
    return model


def load_grid(path: str | Path) -> GridModel:
    """Load and validate a grid-description JSON file.

    The name ``ieee14`` (no suffix) resolves to the bundled case.
    """
    if str(path) == "ieee14":
        text = resources.files("gridrobust.data").joinpath("ieee14.json").read_text()
    else:
        p = Path(path)
        if not p.exists():
            raise GridFileError(f"grid file not found: {p}")
        text = p.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GridFileError(f"cannot parse grid file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise GridFileError("grid file must contain a JSON object")
    return _parse(raw)


def grid_from_dict(raw: dict) -> GridModel:
    return _parse(raw)
