"""Brute-force baselines: grid search over Steiner coordinates, perturbation probes.

Nothing here shares code with the optimizer beyond cost evaluation
primitives (norms, Kirchhoff flows), so agreement between the two is
meaningful.

Grid search covers the terminal bounding box inflated by 10% of its extent
per side. For L_p norms, clamping a Steiner point coordinate-wise into that
box never lengthens an edge, so the box contains an optimal embedding. With
one Steiner point the grid is the full ``resolution x resolution`` lattice.
With two, the 4-D lattice is far too large at that resolution, so the
search zooms: each pass keeps the bounding box of every grid point whose
cost is within the pass's Lipschitz bound of the pass minimum, which
provably still contains an optimum, and re-grids it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SizeLimitError
from .flows import assign_flows
from .model import SINK, EmbeddedArborescence, Instance, embed, weight_eval
from .topology import SteinerTopology, canonicalize, enumerate_full

MAX_RESOLUTION = 2000


@dataclass(frozen=True)
class OracleResult:
    """Best grid embedding plus error bounds.

    ``spacing`` is the largest final grid step over the topologies that can
    still hold the optimum; ``lipschitz_bound`` is L * spacing * sqrt(2) with
    L the sum of edge weights. ``gap`` is a tighter rigorous bound:
    cost - (lowest certified lower bound over all topologies).
    """

    arborescence: EmbeddedArborescence
    cost: float
    topology_key: str
    spacing: float
    lipschitz_bound: float
    gap: float
    evaluations: int


def _box(inst: Instance, box=None):
    if box is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in box)
        return lo, hi
    pts = inst.terminal_positions()
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    ext = hi - lo
    pad = 0.1 * np.where(ext > 0, ext, ext.max())
    return lo - pad, hi + pad


def _axis(lo, hi, count):
    return np.linspace(lo, hi, count) if hi > lo else np.full(1, lo)


def _step(ax: np.ndarray) -> float:
    return float(ax[1] - ax[0]) if len(ax) > 1 else 0.0


def _lp_pow(d: np.ndarray, p: float) -> np.ndarray:
    a = np.abs(d)
    return a * a if p == 2.0 else a**p


class _Star:
    """Edge bookkeeping for one topology: weights of the edges at each Steiner point."""

    def __init__(self, inst: Instance, topo: SteinerTopology):
        flows = assign_flows(topo, inst.source_flows(), sink=SINK)
        self.weights = {frozenset(e): float(weight_eval(inst.weight, t)) for e, t in flows.items()}
        self.pts = inst.terminal_positions()
        self.steiner = list(topo.steiner_ids)
        self.edges = topo.edges

    def terminal_arms(self, s):
        arms = []
        for a, b in self.edges:
            if s in (a, b):
                other = b if a == s else a
                if other not in self.steiner:
                    arms.append((self.pts[other], self.weights[frozenset((a, b))]))
        return arms

    def total_weight(self) -> float:
        return math.fsum(self.weights.values())


def _arm_cost(space, xs, ys, arms):
    """Cost of terminal arms for every point of the product grid ``xs x ys``."""
    p = space.p
    out = np.zeros((len(xs), len(ys)))
    for pt, w in arms:
        dx = _lp_pow(xs - pt[0], p)[:, None]
        dy = _lp_pow(ys - pt[1], p)[None, :]
        out += w * (dx + dy) ** (1.0 / p)
    return out


def _one_steiner(inst, star: _Star, lo, hi, resolution):
    s = star.steiner[0]
    xs, ys = _axis(lo[0], hi[0], resolution), _axis(lo[1], hi[1], resolution)
    arms = star.terminal_arms(s)
    cost = _arm_cost(inst.space, xs, ys, arms)
    i, j = np.unravel_index(np.argmin(cost), cost.shape)
    half = np.array([_step(xs), _step(ys)]) / 2
    bound = sum(w for _, w in arms) * float(inst.space.norm(half))
    best = float(cost[i, j])
    return {s: np.array([xs[i], ys[j]])}, best, best - bound, max(_step(xs), _step(ys)), cost.size


def _pair_pass(space, boxes, star: _Star, count, w12):
    """One 4-D grid pass. Returns min, argmin, candidate box and bound."""
    p = space.p
    s1, s2 = star.steiner
    (lo1, hi1), (lo2, hi2) = boxes
    x1, y1 = _axis(lo1[0], hi1[0], count), _axis(lo1[1], hi1[1], count)
    x2, y2 = _axis(lo2[0], hi2[0], count), _axis(lo2[1], hi2[1], count)
    f1 = _arm_cost(space, x1, y1, star.terminal_arms(s1))
    f2 = _arm_cost(space, x2, y2, star.terminal_arms(s2))
    dx = _lp_pow(x1[:, None] - x2[None, :], p)  # (x1, x2)
    dy = _lp_pow(y1[:, None] - y2[None, :], p)  # (y1, y2)

    h1 = np.array([_step(x1), _step(y1)]) / 2
    h2 = np.array([_step(x2), _step(y2)]) / 2
    w1 = sum(w for _, w in star.terminal_arms(s1))
    w2 = sum(w for _, w in star.terminal_arms(s2))
    bound = w1 * float(space.norm(h1)) + w2 * float(space.norm(h2)) + w12 * float(space.norm(h1 + h2))

    # cost[a, b, c, d] for s1 = (x1[a], y1[b]) and s2 = (x2[c], y2[d])
    best = math.inf
    arg = None
    chunks = []
    step = max(1, 2_000_000 // max(1, len(y1) * len(x2) * len(y2)))
    for a0 in range(0, len(x1), step):
        sl = slice(a0, a0 + step)
        cross = (dx[sl, None, :, None] + dy[None, :, None, :]) ** (1.0 / p)
        c = f1[sl, :, None, None] + f2[None, None, :, :] + w12 * cross
        k = int(np.argmin(c))
        if c.flat[k] < best:
            best = float(c.flat[k])
            idx = np.unravel_index(k, c.shape)
            arg = (a0 + idx[0], idx[1], idx[2], idx[3])
        chunks.append((a0, c))
    # second sweep over stored chunks: candidates within bound of the minimum
    lo_i = [math.inf] * 4
    hi_i = [-math.inf] * 4
    for a0, c in chunks:
        idx = np.nonzero(c <= best + bound)
        if len(idx[0]) == 0:
            continue
        coords = (idx[0] + a0, idx[1], idx[2], idx[3])
        for ax in range(4):
            lo_i[ax] = min(lo_i[ax], int(coords[ax].min()))
            hi_i[ax] = max(hi_i[ax], int(coords[ax].max()))
    axes = (x1, y1, x2, y2)
    halfs = (h1[0], h1[1], h2[0], h2[1])
    lows = [axes[i][lo_i[i]] - halfs[i] for i in range(4)]
    highs = [axes[i][hi_i[i]] + halfs[i] for i in range(4)]
    new1 = (np.maximum(lo1, lows[0:2]), np.minimum(hi1, highs[0:2]))
    new2 = (np.maximum(lo2, lows[2:4]), np.minimum(hi2, highs[2:4]))
    point = {
        s1: np.array([x1[arg[0]], y1[arg[1]]]),
        s2: np.array([x2[arg[2]], y2[arg[3]]]),
    }
    spacing = max(_step(x1), _step(y1), _step(x2), _step(y2))
    return best, point, (new1, new2), bound, spacing, len(x1) * len(y1) * len(x2) * len(y2)


def _two_steiner(inst, star: _Star, lo, hi, resolution, per_pass, max_passes=40):
    s1, s2 = star.steiner
    w12 = star.weights[frozenset((s1, s2))]
    boxes = ((lo.copy(), hi.copy()), (lo.copy(), hi.copy()))
    target = float(np.max(hi - lo)) / (resolution - 1)
    best, best_point, evals = math.inf, None, 0
    lower = -math.inf
    spacing = math.inf
    for _ in range(max_passes):
        m, point, new_boxes, bound, spacing, n = _pair_pass(inst.space, boxes, star, per_pass, w12)
        evals += n
        if m < best:
            best, best_point = m, point
        lower = max(lower, m - bound)
        old = max(float(np.max(b[1] - b[0])) for b in boxes)
        new = max(float(np.max(b[1] - b[0])) for b in new_boxes)
        boxes = new_boxes
        if spacing <= target or new > 0.9 * old:
            break
    return best_point, best, lower, spacing, evals


def grid_solve(
    inst: Instance, resolution: int = MAX_RESOLUTION, per_pass: int = 48, box=None
) -> OracleResult:
    """Exhaustive grid search over every full topology (at most 2 Steiner points).

    ``resolution`` is the lattice size per axis for one Steiner point and the
    target effective resolution for two; ``per_pass`` is the 4-D lattice size
    per axis of each zoom pass. ``box`` overrides the search box as
    ``(lo, hi)`` corner vectors.
    """
    if inst.space.dim != 2:
        raise InvalidInputError("grid oracle is planar only", code="dimension")
    if inst.terminal_count > 4:
        raise SizeLimitError(f"grid oracle handles at most 2 Steiner points, got {inst.terminal_count - 2}")
    if not 2 <= resolution <= MAX_RESOLUTION:
        raise InvalidInputError(f"resolution must lie in [2, {MAX_RESOLUTION}]")
    if inst.terminal_count == 2:
        arb = embed(inst, [(1, 0)])
        return OracleResult(arb, arb.cost, canonicalize(enumerate_full(2)[0]), 0.0, 0.0, 0.0, 1)

    lo, hi = _box(inst, box)
    results = []
    for topo in enumerate_full(inst.terminal_count):
        star = _Star(inst, topo)
        if topo.steiner_count == 1:
            point, cost, lower, spacing, evals = _one_steiner(inst, star, lo, hi, resolution)
        else:
            point, cost, lower, spacing, evals = _two_steiner(inst, star, lo, hi, resolution, per_pass)
        results.append((cost, canonicalize(topo), topo, point, lower, spacing, evals, star))

    results.sort(key=lambda r: (r[0], r[1]))
    cost, key, topo, point, _, _, _, star = results[0]
    arb = embed(inst, topo.edges, steiner_positions=point)
    lowest = min(r[4] for r in results)
    relevant = [r for r in results if r[4] <= cost]
    spacing = max(r[5] for r in relevant)
    weight_sum = max(r[7].total_weight() for r in relevant)
    return OracleResult(
        arborescence=arb,
        cost=arb.cost,
        topology_key=key,
        spacing=spacing,
        lipschitz_bound=weight_sum * spacing * math.sqrt(2),
        gap=arb.cost - lowest,
        evaluations=sum(r[6] for r in results),
    )


def _batch_costs(inst, arb: EmbeddedArborescence, moved: np.ndarray) -> np.ndarray:
    """Costs of ``arb`` with Steiner points displaced by each row of ``moved``.

    ``moved`` has shape (batch, n_steiner, dim); flows and weights are kept.
    """
    ids = [v.id for v in arb.vertices]
    slot = {v: i for i, v in enumerate(ids)}
    base = np.array([v.position for v in arb.vertices])
    steiner = [slot[s] for s in arb.steiner_ids]
    pos = np.broadcast_to(base, (len(moved),) + base.shape).copy()
    pos[:, steiner, :] += moved
    a = np.array([slot[e.tail] for e in arb.edges])
    b = np.array([slot[e.head] for e in arb.edges])
    w = np.array([e.weight for e in arb.edges])
    lengths = inst.space.norm(pos[:, a, :] - pos[:, b, :])
    return np.asarray(lengths) @ w


def perturb_test(
    arb: EmbeddedArborescence,
    inst: Instance,
    trials: int = 1000,
    magnitude: float = 1e-4,
    seed: int = 0,
) -> float:
    """Largest cost decrease seen over random Steiner-point perturbations.

    Each Steiner point is moved alone ``trials`` times, then all of them
    together ``trials`` times, with displacements uniform in the
    ``[-magnitude, magnitude]^dim`` cube. Returns 0.0 if nothing got cheaper.
    """
    ns = len(arb.steiner_ids)
    if ns == 0 or trials <= 0:
        return 0.0
    rng = np.random.default_rng(seed)
    dim = inst.space.dim
    base = _batch_costs(inst, arb, np.zeros((1, ns, dim)))[0]
    worst = 0.0
    for k in range(ns):
        moved = np.zeros((trials, ns, dim))
        moved[:, k, :] = rng.uniform(-magnitude, magnitude, (trials, dim))
        worst = max(worst, float(np.max(base - _batch_costs(inst, arb, moved))))
    moved = rng.uniform(-magnitude, magnitude, (trials, ns, dim))
    worst = max(worst, float(np.max(base - _batch_costs(inst, arb, moved))))
    return max(worst, 0.0)
