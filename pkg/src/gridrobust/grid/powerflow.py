"""Lossless DC power flow over a busbar-level node graph.

Every substation contributes two nodes (busbar 1 and 2).  Only the island
containing the slack node is solved; elements elsewhere are reported isolated.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import GridModel
from .topology import Topology


class PowerFlowError(RuntimeError):
    """The DC system could not be solved (degenerate islanding)."""


@dataclass(frozen=True)
class NodeMap:
    line_from: np.ndarray  # node index of each line origin
    line_to: np.ndarray
    gen_node: np.ndarray
    load_node: np.ndarray
    slack_node: int
    n_nodes: int


def node_map(model: GridModel, topology: Topology) -> NodeMap:
    bi = model.bus_index

    def node(bus: int, bb: int) -> int:
        return 2 * bi[bus] + (bb - 1)

    gen_node = np.array([node(g.bus, topology.gen[g.id]) for g in model.generators], dtype=int)
    slack_gen = model.slack_gen
    slack_node = int(gen_node[slack_gen]) if slack_gen is not None else node(model.slack_bus, 1)
    return NodeMap(
        line_from=np.array([node(ln.from_bus, topology.line_or[ln.id]) for ln in model.lines], dtype=int),
        line_to=np.array([node(ln.to_bus, topology.line_ex[ln.id]) for ln in model.lines], dtype=int),
        gen_node=gen_node,
        load_node=np.array([node(d.bus, topology.load[d.id]) for d in model.loads], dtype=int),
        slack_node=slack_node,
        n_nodes=2 * len(model.buses),
    )


def _slack_island(nm: NodeMap, status: np.ndarray) -> np.ndarray:
    adj: dict[int, list[int]] = {}
    for a, b, on in zip(nm.line_from, nm.line_to, status):
        if on:
            adj.setdefault(int(a), []).append(int(b))
            adj.setdefault(int(b), []).append(int(a))
    seen = np.zeros(nm.n_nodes, dtype=bool)
    seen[nm.slack_node] = True
    stack = [nm.slack_node]
    while stack:
        n = stack.pop()
        for m in adj.get(n, ()):
            if not seen[m]:
                seen[m] = True
                stack.append(m)
    return seen


@dataclass(frozen=True)
class Sensitivity:
    """Linear map from element injections [gen MW | load MW] to line flows.

    ``matrix`` has shape (n_lines, n_gens + n_loads); loads enter with a
    negative sign and the slack node absorbs any imbalance.
    """

    matrix: np.ndarray
    gen_isolated: np.ndarray
    load_isolated: np.ndarray
    ok: bool

    def flows(self, gen: np.ndarray, load: np.ndarray) -> np.ndarray:
        return self.matrix @ np.concatenate([gen, load])


def _reduced_system(model: GridModel, nm: NodeMap, status: np.ndarray):
    island = _slack_island(nm, status)
    x = np.array([ln.reactance for ln in model.lines])
    live = status & island[nm.line_from] & island[nm.line_to]
    nodes = [n for n in np.flatnonzero(island) if n != nm.slack_node]
    pos = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)
    B = np.zeros((n, n))
    # branch-to-reduced-node incidence (rows: lines)
    A = np.zeros((model.n_lines, n))
    for l in np.flatnonzero(live):
        a, b = int(nm.line_from[l]), int(nm.line_to[l])
        y = 1.0 / x[l]
        if a in pos:
            A[l, pos[a]] = y
            B[pos[a], pos[a]] += y
        if b in pos:
            A[l, pos[b]] = -y
            B[pos[b], pos[b]] += y
        if a in pos and b in pos:
            B[pos[a], pos[b]] -= y
            B[pos[b], pos[a]] -= y
    return island, pos, B, A


@lru_cache(maxsize=4096)
def _sensitivity_cached(model: GridModel, topology: Topology) -> Sensitivity:
    nm = node_map(model, topology)
    status = np.array(topology.line_status, dtype=bool)
    island, pos, B, A = _reduced_system(model, nm, status)
    n_el = model.n_gens + model.n_loads
    C = np.zeros((len(pos), n_el))
    for g, nd in enumerate(nm.gen_node):
        if nd in pos:
            C[pos[nd], g] += 1.0
    for d, nd in enumerate(nm.load_node):
        if nd in pos:
            C[pos[nd], model.n_gens + d] -= 1.0
    gen_iso = ~island[nm.gen_node]
    load_iso = ~island[nm.load_node]
    try:
        M = A @ np.linalg.solve(B, C) if len(pos) else np.zeros((model.n_lines, n_el))
        ok = bool(np.all(np.isfinite(M)))
    except np.linalg.LinAlgError:
        M, ok = np.full((model.n_lines, n_el), np.nan), False
    M.setflags(write=False)
    gen_iso.setflags(write=False)
    load_iso.setflags(write=False)
    return Sensitivity(M, gen_iso, load_iso, ok)


def sensitivity(model: GridModel, topology: Topology) -> Sensitivity:
    """Cached injection-to-flow map for one topology."""
    return _sensitivity_cached(model, topology)


@dataclass(frozen=True)
class PowerFlowResult:
    flows: np.ndarray  # MW, positive from origin to extremity
    angles: np.ndarray  # per node, slack at 0
    isolated: np.ndarray  # per node: carries elements but outside slack island
    slack_injection: float
    node_injections: np.ndarray  # balanced injections actually solved


def dc_power_flow(model: GridModel, topology: Topology, injections: np.ndarray) -> PowerFlowResult:
    """Solve B·θ = P on the slack island and return line flows.

    ``injections`` is per bus (applied to busbar 1) or per node (2 per bus).
    The slack node takes whatever balances the island.
    """
    inj = np.asarray(injections, dtype=float)
    nm = node_map(model, topology)
    if inj.shape == (len(model.buses),):
        per_node = np.zeros(nm.n_nodes)
        per_node[0::2] = inj
    elif inj.shape == (nm.n_nodes,):
        per_node = inj.copy()
    else:
        raise ValueError(f"injections must have length {len(model.buses)} or {nm.n_nodes}")
    status = np.array(topology.line_status, dtype=bool)
    island, pos, B, A = _reduced_system(model, nm, status)
    has_elem = np.zeros(nm.n_nodes, dtype=bool)
    has_elem[nm.gen_node] = True
    has_elem[nm.load_node] = True
    isolated = has_elem & ~island
    per_node[~island] = 0.0
    nodes = list(pos)
    P = per_node[nodes] if nodes else np.zeros(0)
    try:
        theta_red = np.linalg.solve(B, P) if nodes else np.zeros(0)
    except np.linalg.LinAlgError as exc:
        raise PowerFlowError("singular susceptance matrix") from exc
    if not np.all(np.isfinite(theta_red)):
        raise PowerFlowError("non-finite angles")
    angles = np.zeros(nm.n_nodes)
    angles[nodes] = theta_red
    flows = A @ theta_red if nodes else np.zeros(model.n_lines)
    slack = -float(P.sum())
    per_node[nm.slack_node] = slack
    return PowerFlowResult(flows, angles, isolated, slack, per_node)


def nodal_mismatch(model: GridModel, topology: Topology, result: PowerFlowResult) -> float:
    """Largest absolute KCL violation (MW) over all nodes."""
    nm = node_map(model, topology)
    out = np.zeros(nm.n_nodes)
    np.add.at(out, nm.line_from, result.flows)
    np.add.at(out, nm.line_to, -result.flows)
    return float(np.max(np.abs(out - result.node_injections)))
