"""Regenerate tests/fixtures/golden.json from the grid oracle.

    python scripts/make_golden.py
"""

import json
import math
from pathlib import Path

from gilbert.minkowski import NormSpace
from gilbert.model import Instance, Source, WeightFunction
from gilbert.oracle import grid_solve
from gilbert.serialize import instance_to_dict

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "golden.json"

CASES = {
    "symmetric_two_source": dict(
        inst=Instance(
            NormSpace.euclidean(),
            WeightFunction(1.0, 1.0),
            (Source((-1.0, 1.0), 1.0), Source((1.0, 1.0), 1.0)),
            (0.0, -1.0),
        ),
        box=((-1.0, -1.0), (1.0, 1.0)),
    ),
    "symmetric_two_source_p3": dict(
        inst=Instance(
            NormSpace.lp(3.0),
            WeightFunction(1.0, 1.0),
            (Source((-1.0, 1.0), 1.0), Source((1.0, 1.0), 1.0)),
            (0.0, -1.0),
        ),
        box=((-1.0, -1.0), (1.0, 1.0)),
    ),
    "equilateral_steiner": dict(
        inst=Instance(
            NormSpace.euclidean(),
            WeightFunction(1.0, 0.0),
            (Source((0.0, 0.0), 1.0), Source((1.0, 0.0), 1.0)),
            (0.5, math.sqrt(3) / 2),
        ),
        box=None,
    ),
}


def main():
    golden = {}
    for name, case in CASES.items():
        res = grid_solve(case["inst"], resolution=2000, box=case["box"])
        arb = res.arborescence
        golden[name] = {
            "instance": instance_to_dict(case["inst"]),
            "resolution": 2000,
            "box": case["box"],
            "cost": res.cost,
            "steiner": [list(arb.vertex(s).position) for s in arb.steiner_ids],
            "spacing": res.spacing,
            "lipschitz_bound": res.lipschitz_bound,
            "gap": res.gap,
        }
    OUT.write_text(json.dumps(golden, indent=2) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
