"""Steiner-point placement for a fixed tree, and the search over all topologies.

For a fixed tree, edge flows and therefore edge weights are constants, so
the cost is a weighted sum of norms of affine functions of the Steiner
coordinates: convex, but not differentiable where two vertices coincide.
Each edge length ||v|| is replaced by sqrt(||v||^2 + eps^2) and eps is driven
geometrically from 1e-3 to 1e-12 times the instance diameter, re-minimizing
with damped Newton steps at every stage. Zero-length edges are then
contracted and the surviving Steiner points are polished on the exact cost.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InvalidInputError
from .model import EmbeddedArborescence, Instance, Role, embed
from .topology import (
    DEFAULT_MAX_TERMINALS,
    SteinerTopology,
    canonicalize,
    collapse_degenerate,
    enumerate_full,
)

log = logging.getLogger(__name__)

ARMIJO = 1e-4


@dataclass(frozen=True)
class OptimizerConfig:
    """Smoothing levels are fractions of the instance diameter."""

    smoothing_eps_initial: float = 1e-3
    smoothing_eps_final: float = 1e-12
    smoothing_factor: float = 0.1
    max_iterations: int = 100_000
    cost_rel_tol: float = 1e-12
    balancing_tol: float = 1e-8
    collapsing_tol: float = 1e-8
    merge_eps: float = 1e-9
    max_terminals: int = DEFAULT_MAX_TERMINALS
    tie_rel_tol: float = 1e-9

    def __post_init__(self):
        for name in (
            "smoothing_eps_initial",
            "smoothing_eps_final",
            "max_iterations",
            "cost_rel_tol",
            "balancing_tol",
            "collapsing_tol",
            "merge_eps",
        ):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive", code="config")
        if not self.smoothing_eps_final < self.smoothing_eps_initial:
            raise InvalidInputError(
                "smoothing_eps_final must be below smoothing_eps_initial", code="config"
            )
        if not 0 < self.smoothing_factor < 1:
            raise InvalidInputError("smoothing_factor must lie in (0, 1)", code="config")

    def stages(self, scale: float) -> list[float]:
        eps = []
        e = self.smoothing_eps_initial
        while e > self.smoothing_eps_final * (1 + 1e-9):
            eps.append(e * scale)
            e *= self.smoothing_factor
        eps.append(self.smoothing_eps_final * scale)
        return eps


class TreeObjective:
    """Cost of a fixed weighted tree as a function of its free vertices.

    ``positions`` holds every vertex (rows in ``ids`` order); rows listed in
    ``free`` are the variables.
    """

    def __init__(self, space, ids, positions, free, edges, weights):
        self.space = space
        self.ids = list(ids)
        slot = {v: i for i, v in enumerate(self.ids)}
        self.base = np.array(positions, dtype=float)
        self.free = np.array([slot[v] for v in free], dtype=int)
        self.a = np.array([slot[x] for x, _ in edges], dtype=int)
        self.b = np.array([slot[y] for _, y in edges], dtype=int)
        self.w = np.asarray(weights, dtype=float)
        self.dim = self.base.shape[1]

    def place(self, x: np.ndarray) -> np.ndarray:
        pos = self.base.copy()
        pos[self.free] = x.reshape(len(self.free), self.dim)
        return pos

    def lengths(self, x: np.ndarray) -> np.ndarray:
        pos = self.place(x)
        return np.asarray(self.space.norm(pos[self.a] - pos[self.b]))

    def value(self, x: np.ndarray, eps: float) -> float:
        n = self.lengths(x)
        if eps > 0:
            n = np.sqrt(n * n + eps * eps)
        return math.fsum(self.w * n)

    def derivatives(self, x: np.ndarray, eps: float):
        pos = self.place(x)
        v = pos[self.a] - pos[self.b]
        n, g2, h2 = self.space.half_square_derivatives(v)
        f = np.sqrt(n * n + eps * eps) if eps > 0 else n
        value = math.fsum(self.w * f)
        ok = f > 0
        inv = np.where(ok, 1.0 / np.where(ok, f, 1.0), 0.0)
        ge = (self.w * inv)[:, None] * g2
        he = (self.w * inv)[:, None, None] * h2 - (self.w * inv**3)[:, None, None] * (
            g2[:, :, None] * g2[:, None, :]
        )

        nv, d = len(self.ids), self.dim
        grad = np.zeros((nv, d))
        np.add.at(grad, self.a, ge)
        np.add.at(grad, self.b, -ge)
        hess = np.zeros((nv, nv, d, d))
        np.add.at(hess, (self.a, self.a), he)
        np.add.at(hess, (self.b, self.b), he)
        np.add.at(hess, (self.a, self.b), -he)
        np.add.at(hess, (self.b, self.a), -he)
        g = grad[self.free].reshape(-1)
        h = hess[np.ix_(self.free, self.free)].transpose(0, 2, 1, 3).reshape(g.size, g.size)
        return value, g, h


def _newton(obj: TreeObjective, x, eps, cfg: OptimizerConfig, stop_below: float = 0.0):
    """Damped Newton with Armijo backtracking. Returns ``(x, value, iterations)``.

    When ``stop_below`` is positive, returns early as soon as some edge gets
    shorter than it, so the caller can contract that edge.
    """
    if x.size == 0:
        return x, obj.value(x, eps), 0
    f, g, h = obj.derivatives(x, eps)
    for it in range(1, cfg.max_iterations + 1):
        scale = max(np.abs(np.diag(h)).max(), 1e-300)
        try:
            step = -np.linalg.solve(h + 1e-13 * scale * np.eye(len(g)), g)
        except np.linalg.LinAlgError:
            step = -g
        slope = float(g @ step)
        if not np.isfinite(slope) or slope >= 0:
            step, slope = -g, -float(g @ g)
        if -slope <= cfg.cost_rel_tol * abs(f):
            return x, f, it
        t = 1.0
        while True:
            trial = x + t * step
            ft = obj.value(trial, eps)
            if ft <= f + ARMIJO * t * slope:
                break
            t *= 0.5
            if t < 1e-20:
                # no representable decrease left along the Newton direction
                return x, f, it
        x = trial
        decrease = f - ft
        f, g, h = obj.derivatives(x, eps)
        if stop_below > 0 and np.min(obj.lengths(x)) < stop_below:
            return x, f, it
        if decrease <= cfg.cost_rel_tol * abs(f) and t == 1.0:
            return x, f, it
    raise ConvergenceError(
        f"Newton stage (eps={eps:g}) did not converge in {cfg.max_iterations} iterations",
        best=x,
    )


def _vertex_residual(obj: TreeObjective, g: np.ndarray) -> float:
    g = g.reshape(len(obj.free), obj.dim)
    return float(np.max(obj.space.dual_norm(g))) if len(g) else 0.0


def _refine_gradient(obj: TreeObjective, x, tol: float, max_iter: int = 60):
    """Newton steps on the exact cost, accepted when they shrink the gradient.

    Near a smooth minimum the cost is flat to machine precision long before
    the gradient is small, so the final digits of the balancing condition
    are driven by the gradient itself.
    """
    if x.size == 0:
        return x, 0
    _, g, h = obj.derivatives(x, 0.0)
    res = _vertex_residual(obj, g)
    for it in range(max_iter):
        if res <= tol:
            return x, it
        try:
            step = -np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            return x, it
        for t in 0.5 ** np.arange(12):
            trial = x + t * step
            _, gt, ht = obj.derivatives(trial, 0.0)
            rt = _vertex_residual(obj, gt)
            if rt < res:
                break
        else:
            return x, it
        x, g, h, res = trial, gt, ht, rt
    return x, max_iter


def initial_positions(inst: Instance, edges, steiner_ids) -> dict[int, np.ndarray]:
    """Put each Steiner point at the centroid of its neighbours.

    Solves the graph-Laplacian system with terminals fixed; the result is
    deterministic and lies inside the terminals' convex hull.
    """
    steiner_ids = list(steiner_ids)
    if not steiner_ids:
        return {}
    idx = {s: i for i, s in enumerate(steiner_ids)}
    pts = inst.terminal_positions()
    m = len(steiner_ids)
    lap = np.zeros((m, m))
    rhs = np.zeros((m, pts.shape[1]))
    for a, b in edges:
        for u, v in ((a, b), (b, a)):
            if u in idx:
                lap[idx[u], idx[u]] += 1
                if v in idx:
                    lap[idx[u], idx[v]] -= 1
                else:
                    rhs[idx[u]] += pts[v]
    sol = np.linalg.solve(lap, rhs)
    return {s: sol[i] for s, i in idx.items()}


def _objective(inst: Instance, arb: EmbeddedArborescence) -> TreeObjective:
    ids = [v.id for v in arb.vertices]
    pos = [v.position for v in arb.vertices]
    free = [v.id for v in arb.vertices if v.role is Role.STEINER]
    edges = [(e.tail, e.head) for e in arb.edges]
    return TreeObjective(inst.space, ids, pos, free, edges, [e.weight for e in arb.edges])


def _with_positions(inst, arb, obj, x) -> EmbeddedArborescence:
    pos = obj.place(x)
    steiner = {v: pos[i] for i, v in enumerate(obj.ids) if i in set(obj.free.tolist())}
    return embed(inst, [(e.tail, e.head) for e in arb.edges], steiner_positions=steiner)


def balancing_residuals(inst: Instance, arb: EmbeddedArborescence) -> dict[int, float]:
    """Dual norm of the exact cost gradient at each Steiner point."""
    obj = _objective(inst, arb)
    if not len(obj.free):
        return {}
    x = obj.base[obj.free].reshape(-1)
    _, g, _ = obj.derivatives(x, 0.0)
    g = g.reshape(len(obj.free), obj.dim)
    return {obj.ids[s]: float(inst.space.dual_norm(g[i])) for i, s in enumerate(obj.free)}


@dataclass
class FixedTopologyRun:
    """Everything one fixed-topology optimization produced."""

    arborescence: EmbeddedArborescence
    smoothed: EmbeddedArborescence
    stage_costs: list[float]
    iterations: int
    residuals: dict[int, float]
    balancing_tol: float

    @property
    def cost(self) -> float:
        return self.arborescence.cost

    @property
    def balanced(self) -> bool:
        return all(r <= self.balancing_tol for r in self.residuals.values())


def run_fixed_topology(
    inst: Instance,
    topo,
    cfg: OptimizerConfig | None = None,
    initial: dict[int, np.ndarray] | None = None,
) -> FixedTopologyRun:
    """Minimize cost over the Steiner coordinates of one tree.

    ``topo`` may be any tree over the instance terminals (full or not);
    ``initial`` optionally overrides the centroid initialization.
    """
    cfg = cfg or OptimizerConfig()
    edges = list(topo.edges)
    steiner_ids = sorted({v for e in edges for v in e if v >= inst.terminal_count})
    start = initial_positions(inst, edges, steiner_ids)
    if initial:
        start.update({k: np.asarray(v, dtype=float) for k, v in initial.items()})
    arb = embed(inst, edges, steiner_positions=start)
    scale = inst.diameter()
    merge = cfg.merge_eps * scale

    obj = _objective(inst, arb)
    x = obj.base[obj.free].reshape(-1)
    stage_costs = []
    iterations = 0
    for eps in cfg.stages(scale):
        try:
            x, f, it = _newton(obj, x, eps, cfg)
        except ConvergenceError as exc:
            best = _with_positions(inst, arb, obj, exc.best)
            raise ConvergenceError(str(exc), best=best) from exc
        iterations += it
        stage_costs.append(f)
    smoothed = _with_positions(inst, arb, obj, x)

    # contract, polish on the exact cost, repeat while polishing creates new
    # near-zero edges
    current = collapse_degenerate(smoothed, inst, merge)
    for _ in range(2 * inst.terminal_count + 2):
        obj = _objective(inst, current)
        x = obj.base[obj.free].reshape(-1)
        x, _, it = _newton(obj, x, 0.0, cfg, stop_below=merge)
        iterations += it
        if np.min(obj.lengths(x), initial=np.inf) >= merge:
            x, it = _refine_gradient(obj, x, 0.01 * cfg.balancing_tol)
            iterations += it
        polished = _with_positions(inst, current, obj, x)
        collapsed = collapse_degenerate(polished, inst, merge)
        if collapsed is polished:
            current = polished
            break
        current = collapsed

    residuals = balancing_residuals(inst, current)
    return FixedTopologyRun(current, smoothed, stage_costs, iterations, residuals, cfg.balancing_tol)


def optimize_fixed_topology(
    inst: Instance, topo, cfg: OptimizerConfig | None = None
) -> EmbeddedArborescence:
    """Cheapest embedding of ``topo``, with degenerate edges contracted."""
    return run_fixed_topology(inst, topo, cfg).arborescence


@dataclass
class Solution:
    arborescence: EmbeddedArborescence
    certificate: "Certificate"  # noqa: F821
    cost: float
    topology: SteinerTopology
    topology_key: str
    topologies_examined: int
    iterations: int
    failed_topologies: list[str] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.certificate.passed


def solve(inst: Instance, cfg: OptimizerConfig | None = None) -> Solution:
    """Optimize every full topology and keep the cheapest.

    Ties within ``tie_rel_tol`` go to a tied topology whose certificate
    passes, then to the smallest canonical key. A topology whose optimizer
    fails to converge is logged and skipped.
    """
    from .certify import certify

    cfg = cfg or OptimizerConfig()
    topos = enumerate_full(inst.terminal_count, cfg.max_terminals)
    runs = []
    failed = []
    iterations = 0
    for topo in topos:
        key = canonicalize(topo)
        try:
            run = run_fixed_topology(inst, topo, cfg)
        except ConvergenceError as exc:
            log.warning("topology %s skipped: %s", key, exc)
            failed.append(key)
            continue
        iterations += run.iterations
        runs.append((run.cost, key, topo, run))
    if not runs:
        raise ConvergenceError("optimization failed on every topology")

    runs.sort(key=lambda r: (r[0], r[1]))
    best_cost = runs[0][0]
    tied = [r for r in runs if r[0] <= best_cost + cfg.tie_rel_tol * max(abs(best_cost), 1e-300)]
    chosen = None
    for cost, key, topo, run in tied:
        cert = certify(run.arborescence, inst, cfg.balancing_tol, cfg.collapsing_tol)
        if cert.passed:
            chosen = (cost, key, topo, run, cert)
            break
    if chosen is None:
        cost, key, topo, run = tied[0]
        cert = certify(run.arborescence, inst, cfg.balancing_tol, cfg.collapsing_tol)
        chosen = (cost, key, topo, run, cert)
    cost, key, topo, run, cert = chosen
    return Solution(
        arborescence=run.arborescence,
        certificate=cert,
        cost=cost,
        topology=topo,
        topology_key=key,
        topologies_examined=len(topos),
        iterations=iterations,
        failed_topologies=failed,
    )
