"""Full Steiner topologies: enumeration, canonical keys, degenerate contraction.

Terminals carry ids 0..k-1 (0 is the sink) and Steiner vertices k onward.
Non-full trees are never enumerated; they show up as full topologies whose
embedding has zero-length edges, which :func:`collapse_degenerate` contracts.
"""

from __future__ import annotations

import sys
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInstanceError, InvalidTopologyError, SizeLimitError
from .flows import orient
from .model import EmbeddedArborescence, Instance, Role, embed

DEFAULT_MAX_TERMINALS = 9


def _norm_edges(edges) -> tuple[tuple[int, int], ...]:
    return tuple(sorted((min(a, b), max(a, b)) for a, b in edges))


@dataclass(frozen=True)
class SteinerTopology:
    terminal_count: int
    steiner_count: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "edges", _norm_edges(self.edges))

    @property
    def vertex_count(self) -> int:
        return self.terminal_count + self.steiner_count

    @property
    def steiner_ids(self) -> range:
        return range(self.terminal_count, self.vertex_count)

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {v: [] for v in range(self.vertex_count)}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return adj

    def is_tree(self) -> bool:
        if len(self.edges) != self.vertex_count - 1:
            return False
        try:
            parent = orient(self.edges, 0)
        except InvalidTopologyError:
            return False
        return len(parent) == self.vertex_count - 1

    def is_full(self) -> bool:
        if not self.is_tree():
            return False
        adj = self.adjacency()
        if self.terminal_count >= 3 and self.steiner_count != self.terminal_count - 2:
            return False
        return all(len(adj[v]) == 1 for v in range(self.terminal_count)) and all(
            len(adj[s]) == 3 for s in self.steiner_ids
        )

    @property
    def key(self) -> str:
        return canonicalize(self)


def _double_factorial(m: int) -> int:
    out = 1
    while m > 1:
        out *= m
        m -= 2
    return out


def full_topology_count(k: int) -> int:
    """(2k-5)!! full topologies on k >= 3 terminals; 1 for k = 2."""
    return 1 if k <= 3 else _double_factorial(2 * k - 5)


def enumerate_full(k: int, max_terminals: int = DEFAULT_MAX_TERMINALS) -> list[SteinerTopology]:
    """All full Steiner topologies on ``k`` labelled terminals, sorted by key.

    Built by inserting terminals 3..k-1 one at a time, each by subdividing an
    existing edge with a fresh Steiner point; every insertion sequence yields
    a distinct topology.
    """
    if k < 2:
        raise InvalidTopologyError(f"need at least 2 terminals, got {k}")
    if k > max_terminals:
        raise SizeLimitError(
            f"{k} terminals exceeds the cap of {max_terminals} "
            f"({full_topology_count(k)} topologies); raise max_terminals to override"
        )
    if k == 2:
        return [SteinerTopology(2, 0, ((0, 1),))]

    layer = [[(0, k), (1, k), (2, k)]]
    for j in range(3, k):
        s = k + j - 2
        grown = []
        for edges in layer:
            for idx, (a, b) in enumerate(edges):
                rest = edges[:idx] + edges[idx + 1 :]
                grown.append(rest + [(a, s), (s, b), (j, s)])
        layer = grown
    topos = [SteinerTopology(k, k - 2, tuple(e)) for e in layer]
    topos.sort(key=lambda t: t.key)
    return topos


def canonicalize(topo) -> str:
    """Key equal for two trees iff they match under a Steiner-id permutation.

    Works on any tree with labelled terminals ``0..terminal_count-1``: the
    tree is rooted at terminal 0 and encoded bottom-up with sorted child
    codes (AHU encoding), Steiner vertices contributing no label.
    """
    k = topo.terminal_count
    adj: dict[int, list[int]] = defaultdict(list)
    for a, b in topo.edges:
        adj[a].append(b)
        adj[b].append(a)
    if not adj:
        return "t0"
    limit = sys.getrecursionlimit()

    def code(v: int, parent: int, depth: int) -> str:
        if depth > limit // 2:
            raise InvalidTopologyError("topology too deep to canonicalize")
        kids = sorted(code(u, v, depth + 1) for u in adj[v] if u != parent)
        label = f"t{v}" if v < k else "s"
        return label + ("(" + ",".join(kids) + ")" if kids else "")

    return code(0, -1, 0)


def default_merge_eps(inst: Instance) -> float:
    return 1e-9 * inst.diameter()


def collapse_degenerate(
    arb: EmbeddedArborescence, inst: Instance, eps_merge: float | None = None
) -> EmbeddedArborescence:
    """Contract every edge shorter than ``eps_merge`` and re-derive flows.

    The surviving vertex of a contracted edge is the terminal endpoint if
    there is one, otherwise the Steiner endpoint with the smaller id; it
    keeps its own position. Two terminals closer than ``eps_merge`` are an
    input problem and raise DegenerateInstanceError.
    """
    if eps_merge is None:
        eps_merge = default_merge_eps(inst)
    if not eps_merge > 0:
        raise ValueError("eps_merge must be positive")
    roles = {v.id: v.role for v in arb.vertices}
    pos = {v.id: np.array(v.position) for v in arb.vertices}
    edges = [(e.tail, e.head) for e in arb.edges]
    contracted = False

    while True:
        short = []
        for a, b in edges:
            length = float(inst.space.norm(pos[a] - pos[b]))
            if length < eps_merge:
                short.append((length, min(a, b), max(a, b)))
        if not short:
            break
        _, a, b = min(short)
        ta, tb = roles[a] is not Role.STEINER, roles[b] is not Role.STEINER
        if ta and tb:
            raise DegenerateInstanceError(
                f"terminals {a} and {b} are closer than the merge threshold {eps_merge:g}"
            )
        keep, drop = (a, b) if ta or (not tb and a < b) else (b, a)
        edges = [
            (keep if x == drop else x, keep if y == drop else y)
            for x, y in edges
            if {x, y} != {a, b}
        ]
        del roles[drop], pos[drop]
        contracted = True

    if not contracted:
        return arb
    steiner = {vid: pos[vid] for vid, r in roles.items() if r is Role.STEINER}
    return embed(inst, edges, steiner_positions=steiner)
