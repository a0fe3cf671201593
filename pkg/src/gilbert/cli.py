"""Batch front end.

    gilbert solve instance.json [--out result.json] [--svg tree.svg] [--oracle]

Exit status: 0 certified, 2 solved but the certificate failed, 1 input
error, 3 convergence failure. Sources sharing a position are merged by
summing their flows (a warning is printed).
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from collections import OrderedDict
from pathlib import Path

from .errors import ConvergenceError, GilbertError, SizeLimitError
from .optimizer import OptimizerConfig, solve
from .oracle import grid_solve, perturb_test
from .serialize import emit_result, parse_instance
from .svg import emit_svg

EXIT_OK, EXIT_INPUT, EXIT_UNCERTIFIED, EXIT_CONVERGENCE = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gilbert", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="solve an instance file and certify the result")
    s.add_argument("file", type=Path)
    s.add_argument("--out", type=Path, help="write the result JSON here instead of stdout")
    s.add_argument("--svg", type=Path, help="also draw the arborescence")
    s.add_argument("--tol-balance", type=float, default=1e-8)
    s.add_argument("--tol-collapse", type=float, default=1e-8)
    s.add_argument("--max-terminals", type=int, default=9)
    s.add_argument("--oracle", action="store_true", help="cross-check with the grid oracle (<= 2 Steiner points)")
    s.add_argument("--seed", type=int, default=0, help="seed for the perturbation probe")
    s.add_argument("--perturb-trials", type=int, default=1000)
    s.add_argument("-v", "--verbose", action="store_true")
    return parser


def _solve(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        inst = parse_instance(args.file.read_text())
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)

    cfg = OptimizerConfig(
        balancing_tol=args.tol_balance,
        collapsing_tol=args.tol_collapse,
        max_terminals=args.max_terminals,
    )
    sol = solve(inst, cfg)
    meta = OrderedDict(
        topology_key=sol.topology_key,
        topologies_examined=sol.topologies_examined,
        topologies_failed=len(sol.failed_topologies),
        iterations=sol.iterations,
        seed=args.seed,
    )
    if sol.certified:
        magnitude = 1e-4 * inst.diameter()
        meta["perturbation"] = OrderedDict(
            trials=args.perturb_trials,
            magnitude=magnitude,
            max_decrease=perturb_test(sol.arborescence, inst, args.perturb_trials, magnitude, args.seed),
        )
    if args.oracle:
        if inst.terminal_count <= 4:
            o = grid_solve(inst)
            meta["oracle"] = OrderedDict(
                cost=o.cost,
                spacing=o.spacing,
                lipschitz_bound=o.lipschitz_bound,
                gap=o.gap,
                agrees=abs(o.cost - sol.cost) <= o.lipschitz_bound,
            )
        else:
            meta["oracle"] = None
            print("warning: --oracle skipped, more than 2 Steiner points", file=sys.stderr)

    text = emit_result(sol.arborescence, sol.certificate, sol.cost, instance=inst, metadata=meta)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    if args.svg:
        args.svg.write_text(emit_svg(sol.arborescence))
    return EXIT_OK if sol.certified else EXIT_UNCERTIFIED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _solve(args)
    except ConvergenceError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (GilbertError, SizeLimitError) as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
