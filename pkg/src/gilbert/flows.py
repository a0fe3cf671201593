"""Kirchhoff edge flows on a tree whose flow drains into a single sink."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable, Mapping

from .errors import InvalidTopologyError


def _adjacency(edges: Iterable[tuple[int, int]]) -> dict[int, list[int]]:
    adj: dict[int, list[int]] = defaultdict(list)
    for a, b in edges:
        if a == b:
            raise InvalidTopologyError(f"self-loop at vertex {a}")
        adj[a].append(b)
        adj[b].append(a)
    return adj


def orient(edges: Iterable[tuple[int, int]], sink: int = 0) -> dict[int, int]:
    """Map every non-sink vertex to its parent on the path to ``sink``.

    Raises InvalidTopologyError if the edges do not form a tree containing
    the sink.
    """
    edges = list(edges)
    adj = _adjacency(edges)
    if sink not in adj:
        if edges:
            raise InvalidTopologyError(f"sink {sink} is not on any edge")
        return {}
    parent: dict[int, int] = {}
    seen = {sink}
    stack = [sink]
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if u in seen:
                continue
            seen.add(u)
            parent[u] = v
            stack.append(u)
    if len(seen) != len(adj):
        raise InvalidTopologyError("topology is disconnected")
    if len(edges) != len(adj) - 1:
        raise InvalidTopologyError("topology contains a cycle")
    return parent


def assign_flows(
    topo, source_flows: Mapping[int, float], sink: int = 0
) -> dict[tuple[int, int], float]:
    """Flow on every edge, keyed by ``(tail, head)`` with the head nearer the sink.

    ``topo`` is anything with an ``edges`` attribute, or a plain edge list.
    Each edge carries the total supply of the subtree behind its tail, which
    is computed in one leaves-to-sink pass.
    """
    edges = getattr(topo, "edges", topo)
    parent = orient(edges, sink)
    for v, t in source_flows.items():
        if v not in parent:
            raise InvalidTopologyError(f"source {v} is not connected to the sink")
        if not t > 0:
            raise InvalidTopologyError(f"source {v} has non-positive flow {t}")

    children: dict[int, list[int]] = defaultdict(list)
    for v, par in parent.items():
        children[par].append(v)

    # iterative post-order: reverse of a pre-order from the sink
    order = []
    stack = [sink]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(children[v])

    carried: dict[int, float] = {}
    for v in reversed(order):
        carried[v] = source_flows.get(v, 0.0) + sum(carried[c] for c in children[v])
    return {(v, par): carried[v] for v, par in parent.items()}
