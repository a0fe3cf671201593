"""Instance documents in, result documents out.

Instance schema (JSON)::

    {"dimension": 2,
     "norm": {"kind": "lp", "p": 2.0},
     "weight": {"d": 1.0, "h": 0.5},
     "sources": [{"position": [x, y], "flow": t}, ...],
     "sink": [x, y]}

Results are written with a fixed key order and every float at 17
significant digits, so two runs on the same input are byte-identical.
"""

from __future__ import annotations

import json
import math
import warnings
from collections import OrderedDict

from .certify import Certificate
from .errors import InvalidInputError
from .minkowski import NormSpace
from .model import EmbeddedArborescence, Instance, Source, WeightFunction


class InstanceWarning(UserWarning):
    pass


def _require(cond: bool, message: str, code: str = "schema"):
    if not cond:
        raise InvalidInputError(message, code=code)


def _number(x, what: str) -> float:
    _require(isinstance(x, (int, float)) and not isinstance(x, bool), f"{what} must be a number")
    return float(x)


def _vector(x, dim: int, what: str) -> tuple[float, ...]:
    _require(isinstance(x, list), f"{what} must be a list of {dim} numbers")
    _require(len(x) == dim, f"{what} must have {dim} coordinates", code="dimension")
    return tuple(_number(c, what) for c in x)


def instance_from_dict(doc) -> Instance:
    _require(isinstance(doc, dict), "instance document must be an object")
    for key in ("norm", "weight", "sources", "sink"):
        _require(key in doc, f"missing field {key!r}")
    dim = doc.get("dimension", 2)
    _require(isinstance(dim, int) and not isinstance(dim, bool) and dim >= 2, "dimension must be an integer >= 2")

    norm = doc["norm"]
    _require(isinstance(norm, dict) and "kind" in norm, "norm must be an object with a 'kind'")
    kind = norm["kind"]
    _require(kind in ("lp", "euclidean"), f"unknown norm kind {kind!r}")
    if kind == "lp":
        _require("p" in norm, "lp norm needs an exponent 'p'")
        space = NormSpace(dim=dim, p=_number(norm["p"], "norm.p"), kind="lp")
    else:
        space = NormSpace(dim=dim, kind="euclidean")

    weight = doc["weight"]
    _require(isinstance(weight, dict) and {"d", "h"} <= set(weight), "weight needs 'd' and 'h'")
    w = WeightFunction(_number(weight["d"], "weight.d"), _number(weight["h"], "weight.h"))

    sources = doc["sources"]
    _require(isinstance(sources, list) and sources, "sources must be a non-empty list")
    merged: dict[tuple[float, ...], float] = {}
    for i, s in enumerate(sources, start=1):
        _require(isinstance(s, dict) and {"position", "flow"} <= set(s), f"source {i} needs position and flow")
        pos = _vector(s["position"], dim, f"source {i} position")
        flow = _number(s["flow"], f"source {i} flow")
        _require(math.isfinite(flow) and flow > 0, f"source {i} has non-positive flow {flow}", "flow-nonpositive")
        if pos in merged:
            warnings.warn(
                f"source {i} repeats position {list(pos)}; flows merged", InstanceWarning, stacklevel=2
            )
            merged[pos] += flow
        else:
            merged[pos] = flow
    sink = _vector(doc["sink"], dim, "sink")
    return Instance(space, w, tuple(Source(p, t) for p, t in merged.items()), sink)


def parse_instance(text: str) -> Instance:
    """Parse and validate an instance document (see module docstring).

    Raises InvalidInputError whose ``code`` names the failed rule.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"not valid JSON: {exc}", code="schema") from exc
    return instance_from_dict(doc)


def instance_to_dict(inst: Instance) -> dict:
    space = inst.space
    norm = {"kind": "euclidean"} if space.kind == "euclidean" else {"kind": "lp", "p": space.p}
    return OrderedDict(
        dimension=space.dim,
        norm=norm,
        weight=OrderedDict(d=inst.weight.d, h=inst.weight.h),
        sources=[OrderedDict(position=list(s.position), flow=s.flow) for s in inst.sources],
        sink=list(inst.sink),
    )


def _fmt(x) -> str:
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return f"{x:.17g}" if math.isfinite(x) else "null"
    if isinstance(x, str):
        return json.dumps(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with 17-significant-digit floats and insertion-ordered keys."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_fmt(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "item"):
        obj = obj.item()
    return _fmt(obj)


def dump_instance(inst: Instance) -> str:
    return dumps(instance_to_dict(inst)) + "\n"


def certificate_to_dict(cert: Certificate) -> dict:
    return OrderedDict(
        verdict=cert.verdict,
        balancing_tol=cert.balancing_tol,
        collapsing_tol=cert.collapsing_tol,
        max_residual=cert.max_residual,
        min_slack=cert.min_slack,
        steiner=[
            OrderedDict(
                id=s.steiner_id,
                degree=s.degree,
                balancing_residual=s.balancing_residual,
                collapsing_slacks=[
                    OrderedDict(subset=list(sub), slack=slack) for sub, slack in s.collapsing_slacks
                ],
            )
            for s in cert.stars
        ],
    )


def result_to_dict(arb: EmbeddedArborescence, certificate: Certificate, cost: float, *, instance=None, metadata=None) -> dict:
    out = OrderedDict()
    if instance is not None:
        out["instance"] = instance_to_dict(instance)
    out["cost"] = float(cost)
    out["vertices"] = [
        OrderedDict(id=v.id, role=v.role.value, position=list(v.position)) for v in arb.vertices
    ]
    out["edges"] = [
        OrderedDict(tail=e.tail, head=e.head, flow=e.flow, weight=e.weight, length=e.length)
        for e in arb.edges
    ]
    out["certificate"] = certificate_to_dict(certificate)
    out["solver"] = OrderedDict(metadata or {})
    return out


def emit_result(arb, certificate, cost, *, instance=None, metadata=None) -> str:
    """Deterministic result document: vertices, edges, cost, certificate, metadata."""
    return dumps(result_to_dict(arb, certificate, cost, instance=instance, metadata=metadata)) + "\n"
