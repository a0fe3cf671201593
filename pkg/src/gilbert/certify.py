"""Local optimality certificates at Steiner points, and the improving split.

Cost is a sum over edges, so each Steiner point together with its
neighbours is a star with flows routed through the centre: incoming edges
play the role of sources and the sink-side edge the role of the sink.
Two conditions are checked per star:

* balancing: sum_i w(t_i) p_i* + w(sum t_i) q* = 0, with p_i, q the edge
  directions out of the centre and * the dual vector;
* collapsing: ||sum_{i in I} w(t_i) p_i*||_* <= w(sum_{i in I} t_i) for every
  nonempty subset I of the incoming edges.

When the collapsing condition fails for some I, pulling the edges in I onto
a new Steiner point just off the centre lowers the cost; :func:`split_improve`
performs that move.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InvalidInputError, PreconditionError
from .minkowski import NormSpace
from .model import EmbeddedArborescence, Instance, Role, WeightFunction, embed

MAX_STAR_INCOMING = 16


@dataclass(frozen=True)
class Arm:
    neighbor: int
    direction: np.ndarray
    flow: float


@dataclass(frozen=True)
class LocalStar:
    center_id: int
    center: np.ndarray
    incoming: tuple[Arm, ...]
    outgoing: Arm

    @property
    def degree(self) -> int:
        return len(self.incoming) + 1


def local_star(arb: EmbeddedArborescence, steiner_id: int) -> LocalStar:
    try:
        v = arb.vertex(steiner_id)
    except KeyError:
        raise InvalidInputError(f"no vertex {steiner_id}") from None
    if v.role is not Role.STEINER:
        raise InvalidInputError(f"vertex {steiner_id} is a {v.role.value}, not a Steiner point")
    out = arb.out_edge(steiner_id)
    if out is None:
        raise InvalidInputError(f"Steiner point {steiner_id} has no sink-side edge")
    center = arb.position(steiner_id)
    incoming = tuple(
        Arm(e.tail, arb.position(e.tail) - center, e.flow) for e in arb.in_edges(steiner_id)
    )
    total = math.fsum(a.flow for a in incoming)
    outgoing = Arm(out.head, arb.position(out.head) - center, total)
    return LocalStar(steiner_id, center, incoming, outgoing)


def balancing_vector(star: LocalStar, w: WeightFunction, space: NormSpace) -> np.ndarray:
    acc = np.zeros_like(star.center)
    for arm in star.incoming:
        acc = acc + w(arm.flow) * space.dual_vector(arm.direction)
    return acc + w(star.outgoing.flow) * space.dual_vector(star.outgoing.direction)


def check_balancing(star: LocalStar, w: WeightFunction, space: NormSpace) -> float:
    """Dual norm of the weighted sum of the star's dual vectors."""
    return float(space.dual_norm(balancing_vector(star, w, space)))


def _subset_slack(star, idx, w, space) -> float:
    z = sum(w(star.incoming[i].flow) * space.dual_vector(star.incoming[i].direction) for i in idx)
    return float(w(math.fsum(star.incoming[i].flow for i in idx)) - space.dual_norm(z))


def check_collapsing(
    star: LocalStar, w: WeightFunction, space: NormSpace, max_incoming: int = MAX_STAR_INCOMING
) -> list[tuple[tuple[int, ...], float]]:
    """Slack of the collapsing inequality for all 2^n - 1 nonempty subsets.

    Subsets are reported as tuples of neighbour ids, ordered by size and
    then lexicographically by arm position.
    """
    n = len(star.incoming)
    if n > max_incoming:
        raise InvalidInputError(f"star has {n} incoming edges; cap is {max_incoming}")
    out = []
    for size in range(1, n + 1):
        for idx in itertools.combinations(range(n), size):
            ids = tuple(star.incoming[i].neighbor for i in idx)
            out.append((ids, _subset_slack(star, idx, w, space)))
    return out


@dataclass(frozen=True)
class StarCheck:
    steiner_id: int
    degree: int
    balancing_residual: float
    collapsing_slacks: tuple[tuple[tuple[int, ...], float], ...]

    @property
    def min_slack(self) -> float:
        return min((s for _, s in self.collapsing_slacks), default=math.inf)


@dataclass(frozen=True)
class Certificate:
    stars: tuple[StarCheck, ...]
    balancing_tol: float
    collapsing_tol: float
    notes: tuple[str, ...] = field(default=())

    @property
    def max_residual(self) -> float:
        return max((s.balancing_residual for s in self.stars), default=0.0)

    @property
    def min_slack(self) -> float:
        return min((s.min_slack for s in self.stars), default=math.inf)

    @property
    def passed(self) -> bool:
        return all(
            s.balancing_residual <= self.balancing_tol and s.min_slack >= -self.collapsing_tol
            for s in self.stars
        )

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"


def certify(
    arb: EmbeddedArborescence,
    inst: Instance,
    balancing_tol: float = 1e-8,
    collapsing_tol: float = 1e-8,
) -> Certificate:
    """Check both local conditions at every Steiner point of ``arb``.

    A pass says every Steiner star is locally optimal; it is not a proof of
    global optimality for trees with several Steiner points.
    """
    stars = []
    for sid in arb.steiner_ids:
        star = local_star(arb, sid)
        stars.append(
            StarCheck(
                sid,
                star.degree,
                check_balancing(star, inst.weight, inst.space),
                tuple(check_collapsing(star, inst.weight, inst.space)),
            )
        )
    return Certificate(tuple(stars), balancing_tol, collapsing_tol)


def split_improve(
    arb: EmbeddedArborescence,
    steiner_id: int,
    subset,
    inst: Instance,
    cfg=None,
    reoptimize: bool = True,
) -> tuple[EmbeddedArborescence, float]:
    """Split ``subset`` (neighbour ids of incoming edges) off a Steiner point.

    The incoming edges in ``subset`` are rerouted through a new Steiner point
    at ``o + tau * e``, where ``e`` is the unit vector attaining the dual norm
    of the subset's weighted dual-vector sum and ``tau`` is backtracked from
    a tenth of the shortest edge at ``o``. With ``reoptimize`` the new tree is
    then re-minimized. Returns the new tree and its cost minus the old cost.
    """
    star = local_star(arb, steiner_id)
    by_id = {a.neighbor: i for i, a in enumerate(star.incoming)}
    subset = tuple(subset)
    if not subset or any(s not in by_id for s in subset) or len(set(subset)) != len(subset):
        raise InvalidInputError(f"{subset} is not a set of incoming neighbours of {steiner_id}")
    idx = [by_id[s] for s in subset]
    w, space = inst.weight, inst.space
    slack = _subset_slack(star, idx, w, space)
    if not slack < 0:
        raise PreconditionError(f"collapsing condition holds for {subset} (slack {slack:.3g})")

    z = sum(w(star.incoming[i].flow) * space.dual_vector(star.incoming[i].direction) for i in idx)
    e = space.support_vector(z)
    shortest = min(float(space.norm(a.direction)) for a in (*star.incoming, star.outgoing))

    new_id = max(v.id for v in arb.vertices) + 1
    edges = []
    for ed in arb.edges:
        if ed.head == steiner_id and ed.tail in subset:
            edges.append((ed.tail, new_id))
        else:
            edges.append((ed.tail, ed.head))
    edges.append((new_id, steiner_id))
    steiner = {v.id: np.array(v.position) for v in arb.vertices if v.role is Role.STEINER}

    old = arb.cost
    tau = 0.1 * shortest
    for _ in range(200):
        steiner[new_id] = star.center + tau * e
        split = embed(inst, edges, steiner_positions=steiner)
        delta = split.cost - old
        if delta <= 1e-4 * tau * slack:
            break
        tau *= 0.5
    else:
        raise ConvergenceError("no improving step found along the split direction", best=arb)

    if not reoptimize:
        return split, delta

    from .optimizer import run_fixed_topology

    tree = _Tree(tuple(edges))
    start = {k: v for k, v in steiner.items()}
    try:
        refined = run_fixed_topology(inst, tree, cfg, initial=start).arborescence
    except ConvergenceError:
        return split, delta
    if refined.cost <= split.cost:
        return refined, refined.cost - old
    return split, delta


@dataclass(frozen=True)
class _Tree:
    edges: tuple[tuple[int, int], ...]
