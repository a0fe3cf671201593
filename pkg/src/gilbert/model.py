"""Problem instances, the linear weight function and embedded arborescences.

Vertex ids follow one convention everywhere: the sink is 0, sources are
1..n in input order, Steiner points are n+1 onward.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidInputError
from .flows import assign_flows, orient
from .minkowski import EPS_ZERO, Check, NormSpace, validate_space

SINK = 0


@dataclass(frozen=True)
class WeightFunction:
    """Unit cost w(t) = d + h*t. h = 0 is the Steiner tree special case."""

    d: float = 1.0
    h: float = 0.0

    def __call__(self, t):
        return weight_eval(self, t)


def weight_eval(w: WeightFunction, t):
    if np.any(np.asarray(t) < 0):
        raise InvalidInputError(f"negative flow {t}", code="flow-negative")
    return w.d + w.h * t


def validate_weight(w: WeightFunction, samples: int = 25) -> Check:
    """Check d > 0, h >= 0, then the four weight conditions on a flow grid.

    The grid test is redundant for the linear family but keeps the door open
    for other weight functions written against :func:`weight_eval`.
    """
    if not (math.isfinite(w.d) and math.isfinite(w.h)):
        return Check(False, "weight coefficients must be finite")
    if w.h < 0:
        return Check(False, f"non-decreasing violated: h={w.h} < 0")
    if w.d <= 0:
        return Check(False, f"d>0 required (d={w.d}); triangular condition degenerates")

    ts = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, samples)])
    vals = w.d + w.h * ts
    if np.any(vals < 0) or np.any(vals[1:] <= 0):
        return Check(False, "non-negativity violated")
    t1, t2 = np.meshgrid(ts[1:], ts[1:])
    both = w.d + w.h * (t1 + t2)
    w1 = w.d + w.h * t1
    w2 = w.d + w.h * t2
    tol = 1e-12 * (1 + np.abs(both))
    if np.any(both < w1 - tol):
        return Check(False, "non-decreasing violated")
    if np.any(both > w1 + w2 + tol):
        return Check(False, "triangular condition violated")
    mid = w.d + w.h * 0.5 * (t1 + t2)
    if np.any(mid < 0.5 * (w1 + w2) - tol):
        return Check(False, "concavity violated")
    return Check(True)


@dataclass(frozen=True)
class Source:
    position: tuple[float, ...]
    flow: float


def _as_point(x, dim: int, what: str) -> tuple[float, ...]:
    try:
        arr = np.asarray(x, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{what} is not a numeric vector", code="schema") from exc
    if arr.shape != (dim,):
        raise InvalidInputError(f"{what} must have {dim} coordinates", code="dimension")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} has non-finite coordinates", code="non-finite")
    return tuple(float(c) for c in arr)


@dataclass(frozen=True)
class Instance:
    """Sources with positive flows, one sink, a norm and a weight function."""

    space: NormSpace
    weight: WeightFunction
    sources: tuple[Source, ...]
    sink: tuple[float, ...]

    def __post_init__(self):
        check = validate_space(self.space)
        if not check:
            raise InvalidInputError(check.reason, code="norm-not-smooth")
        check = validate_weight(self.weight)
        if not check:
            code = "weight-h" if self.weight.h < 0 else "weight-d"
            raise InvalidInputError(check.reason, code=code)
        dim = self.space.dim
        sink = _as_point(self.sink, dim, "sink")
        sources = []
        for i, s in enumerate(self.sources, start=1):
            if not isinstance(s, Source):
                s = Source(*s)
            pos = _as_point(s.position, dim, f"source {i}")
            flow = float(s.flow)
            if not (math.isfinite(flow) and flow > 0):
                raise InvalidInputError(
                    f"source {i} has non-positive flow {s.flow}", code="flow-nonpositive"
                )
            sources.append(Source(pos, flow))
        if not sources:
            raise InvalidInputError("at least one source is required", code="schema")
        object.__setattr__(self, "sink", sink)
        object.__setattr__(self, "sources", tuple(sources))

        pts = self.terminal_positions()
        eps = EPS_ZERO * (1.0 + np.abs(pts).max())
        for i in range(1, len(pts)):
            if self.space.norm(pts[i] - pts[0]) <= eps:
                raise InvalidInputError(
                    f"source {i} coincides with the sink", code="sink-coincides"
                )
        for i, j in itertools.combinations(range(1, len(pts)), 2):
            if np.array_equal(pts[i], pts[j]):
                raise InvalidInputError(
                    f"sources {i} and {j} share a position; merge them by summing flows",
                    code="duplicate-source",
                )

    @property
    def n(self) -> int:
        return len(self.sources)

    @property
    def terminal_count(self) -> int:
        return len(self.sources) + 1

    def terminal_positions(self) -> np.ndarray:
        """Array indexed by vertex id: row 0 is the sink, then the sources."""
        return np.array([self.sink] + [s.position for s in self.sources], dtype=float)

    def source_flows(self) -> dict[int, float]:
        return {i: s.flow for i, s in enumerate(self.sources, start=1)}

    def total_flow(self) -> float:
        return math.fsum(s.flow for s in self.sources)

    def diameter(self) -> float:
        """Largest norm distance between two terminals."""
        pts = self.terminal_positions()
        diff = pts[:, None, :] - pts[None, :, :]
        return float(np.max(self.space.norm(diff)))

    def with_flows(self, flows) -> Instance:
        sources = tuple(Source(s.position, float(t)) for s, t in zip(self.sources, flows))
        return Instance(self.space, self.weight, sources, self.sink)


class Role(str, Enum):
    SOURCE = "source"
    SINK = "sink"
    STEINER = "steiner"


@dataclass(frozen=True)
class Vertex:
    id: int
    position: tuple[float, ...]
    role: Role


@dataclass(frozen=True)
class Edge:
    """Directed toward the sink."""

    tail: int
    head: int
    flow: float
    weight: float
    length: float

    @property
    def cost(self) -> float:
        return self.weight * self.length


@dataclass(frozen=True)
class EmbeddedArborescence:
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {v.id: v for v in self.vertices})

    def vertex(self, vid: int) -> Vertex:
        return self._index[vid]

    def position(self, vid: int) -> np.ndarray:
        return np.array(self._index[vid].position)

    @property
    def steiner_ids(self) -> list[int]:
        return [v.id for v in self.vertices if v.role is Role.STEINER]

    @property
    def sink_id(self) -> int:
        sinks = [v.id for v in self.vertices if v.role is Role.SINK]
        if len(sinks) != 1:
            raise InvalidInputError("arborescence must have exactly one sink", code="malformed")
        return sinks[0]

    def degree(self, vid: int) -> int:
        return sum((e.tail == vid) + (e.head == vid) for e in self.edges)

    def incident(self, vid: int) -> list[Edge]:
        return [e for e in self.edges if vid in (e.tail, e.head)]

    def out_edge(self, vid: int) -> Edge | None:
        for e in self.edges:
            if e.tail == vid:
                return e
        return None

    def in_edges(self, vid: int) -> list[Edge]:
        return [e for e in self.edges if e.head == vid]

    @property
    def cost(self) -> float:
        return total_cost(self)

    def check_structure(self) -> None:
        """Raise InvalidInputError unless this is a tree draining into one sink."""
        sink = self.sink_id
        ids = set(self._index)
        if len(ids) != len(self.vertices):
            raise InvalidInputError("duplicate vertex ids", code="malformed")
        for e in self.edges:
            if e.tail not in ids or e.head not in ids:
                raise InvalidInputError(f"edge {e.tail}->{e.head} has unknown endpoint", code="malformed")
            if not (e.weight >= 0 and e.length >= 0):
                raise InvalidInputError("edge weight and length must be non-negative", code="malformed")
        if len(self.vertices) == 1 and not self.edges:
            return
        try:
            parent = orient([(e.tail, e.head) for e in self.edges], sink)
        except Exception as exc:
            raise InvalidInputError(f"malformed tree: {exc}", code="malformed") from exc
        if set(parent) | {sink} != ids:
            raise InvalidInputError("tree does not span every vertex", code="malformed")
        for e in self.edges:
            if parent.get(e.tail) != e.head:
                raise InvalidInputError(
                    f"edge {e.tail}->{e.head} is not directed toward the sink", code="malformed"
                )


def total_cost(arb: EmbeddedArborescence) -> float:
    """Sum over edges of weight times length."""
    arb.check_structure()
    return math.fsum(e.weight * e.length for e in arb.edges)


def embed(
    inst: Instance,
    edges,
    steiner_positions: dict[int, np.ndarray] | None = None,
    positions: dict[int, np.ndarray] | None = None,
) -> EmbeddedArborescence:
    """Place an undirected tree over the instance terminals.

    Vertex ids 0..n take terminal positions unless ``positions`` overrides
    them (used after merges); every other id must appear in
    ``steiner_positions``. Edges are oriented toward the sink and receive
    Kirchhoff flows, weights and norm lengths.
    """
    edges = [tuple(e) for e in edges]
    pts = inst.terminal_positions()
    pos: dict[int, np.ndarray] = {i: pts[i] for i in range(len(pts))}
    if positions:
        pos.update({k: np.asarray(v, dtype=float) for k, v in positions.items()})
    for k, v in (steiner_positions or {}).items():
        pos[k] = np.asarray(v, dtype=float)
    used = {SINK} | {v for e in edges for v in e}
    missing = used - set(pos)
    if missing:
        raise InvalidInputError(f"no position for vertices {sorted(missing)}", code="malformed")
    terminal_ids = set(range(len(pts)))
    if not terminal_ids <= used:
        raise InvalidInputError("tree must span every terminal", code="malformed")

    flows = assign_flows(edges, inst.source_flows(), sink=SINK)
    vertices = []
    for vid in sorted(used):
        role = Role.SINK if vid == SINK else Role.SOURCE if vid in terminal_ids else Role.STEINER
        vertices.append(Vertex(vid, tuple(float(c) for c in pos[vid]), role))
    out = []
    for (tail, head), t in sorted(flows.items()):
        length = float(inst.space.norm(pos[head] - pos[tail]))
        out.append(Edge(tail, head, float(t), float(weight_eval(inst.weight, t)), length))
    return EmbeddedArborescence(tuple(vertices), tuple(out))
