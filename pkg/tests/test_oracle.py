import math

import numpy as np
import pytest
from _suite import equilateral, random_instance

from gilbert.errors import InvalidInputError, SizeLimitError
from gilbert.minkowski import NormSpace
from gilbert.model import Instance, Source, WeightFunction, embed
from gilbert.optimizer import solve
from gilbert.oracle import grid_solve, perturb_test
from gilbert.serialize import instance_from_dict


def test_single_source_is_exact():
    inst = Instance(NormSpace.lp(3.0), WeightFunction(1.0, 1.0), (Source((1.0, 2.0), 2.0),), (0.0, 0.0))
    res = grid_solve(inst)
    assert res.cost == pytest.approx(3.0 * (1 + 8) ** (1 / 3), rel=1e-15)
    assert res.lipschitz_bound == 0.0 and res.gap == 0.0


def test_equilateral():
    res = grid_solve(equilateral(), resolution=500)
    assert abs(res.cost - math.sqrt(3)) <= 2e-3
    assert res.cost - math.sqrt(3) <= res.lipschitz_bound
    assert 0 <= res.gap <= res.lipschitz_bound


def test_golden_values_reproduce(golden):
    for name, case in golden.items():
        inst = instance_from_dict(case["instance"])
        box = case["box"]
        res = grid_solve(inst, resolution=case["resolution"], box=box)
        assert res.cost == pytest.approx(case["cost"], rel=1e-12), name
        assert res.lipschitz_bound == pytest.approx(case["lipschitz_bound"], rel=1e-12), name
        for sid, pos in zip(res.arborescence.steiner_ids, case["steiner"]):
            np.testing.assert_allclose(res.arborescence.position(sid), pos, atol=1e-12)


def test_two_steiner_points_bracket_the_solver():
    inst = random_instance(np.random.default_rng(8), n=3, p=2.0, h=0.5)
    res = grid_solve(inst)
    sol = solve(inst)
    assert sol.cost <= res.cost + 1e-12
    assert res.cost - sol.cost <= res.gap <= res.lipschitz_bound


def test_limits():
    inst = random_instance(np.random.default_rng(0), n=4)
    with pytest.raises(SizeLimitError):
        grid_solve(inst)
    with pytest.raises(InvalidInputError):
        grid_solve(equilateral(), resolution=1)
    with pytest.raises(InvalidInputError):
        grid_solve(equilateral(), resolution=5000)


def test_perturb_zero_magnitude():
    inst = equilateral()
    arb = solve(inst).arborescence
    assert perturb_test(arb, inst, trials=100, magnitude=0.0) == 0.0


def test_perturb_detects_non_optimal_point():
    inst = equilateral()
    arb = embed(inst, [(0, 3), (1, 3), (2, 3)], {3: (0.5, 0.1)})
    assert perturb_test(arb, inst, trials=200, magnitude=1e-3) > 0


def test_perturb_optimal_point():
    inst = random_instance(np.random.default_rng(3), n=4)
    sol = solve(inst)
    assert perturb_test(sol.arborescence, inst, 1000, 1e-4 * inst.diameter(), seed=1) <= 1e-9


def test_perturb_no_steiner_points():
    inst = Instance(NormSpace.euclidean(), WeightFunction(), (Source((1.0, 0.0), 1.0),), (0.0, 0.0))
    assert perturb_test(embed(inst, [(1, 0)]), inst) == 0.0
