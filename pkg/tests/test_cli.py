import json
import re
import subprocess
import sys
import warnings

import pytest
import numpy as np
from _suite import equilateral, random_instance

from gilbert import cli
from gilbert.certify import certify
from gilbert.errors import ConvergenceError, InvalidInputError
from gilbert.model import embed
from gilbert.optimizer import solve
from gilbert.serialize import (
    InstanceWarning,
    dump_instance,
    emit_result,
    instance_from_dict,
    instance_to_dict,
    parse_instance,
)
from gilbert.svg import emit_svg


def doc(**over):
    base = {
        "dimension": 2,
        "norm": {"kind": "lp", "p": 2.0},
        "weight": {"d": 1.0, "h": 0.5},
        "sources": [{"position": [1.0, 0.0], "flow": 1.0}],
        "sink": [0.0, 0.0],
    }
    base.update(over)
    return base


def test_minimal_document():
    inst = parse_instance(json.dumps(doc()))
    assert inst.n == 1 and inst.weight.h == 0.5


def test_euclidean_kind():
    inst = parse_instance(json.dumps(doc(norm={"kind": "euclidean"})))
    assert inst.space.kind == "euclidean" and inst.space.p == 2.0


@pytest.mark.parametrize(
    "over, code, fragment",
    [
        (dict(norm={"kind": "lp", "p": 1.0}), "norm-not-smooth", "norm not smooth"),
        (dict(weight={"d": 0.0, "h": 0.5}), "weight-d", "d>0"),
        (dict(weight={"d": 1.0, "h": -0.5}), "weight-h", "non-decreasing"),
        (dict(sources=[{"position": [1.0, 0.0], "flow": 0.0}]), "flow-nonpositive", "non-positive"),
        (dict(sources=[{"position": [0.0, 0.0], "flow": 1.0}]), "sink-coincides", "coincides"),
        (dict(sink=[0.0, 0.0, 0.0]), "dimension", "coordinates"),
        (dict(norm={"kind": "l1"}), "schema", "unknown norm"),
        (dict(sources=[]), "schema", "non-empty"),
        (dict(weight={"d": 1.0}), "schema", "'d' and 'h'"),
        (dict(sink="origin"), "schema", "list"),
    ],
)
def test_rejections(over, code, fragment):
    with pytest.raises(InvalidInputError) as err:
        parse_instance(json.dumps(doc(**over)))
    assert err.value.code == code
    assert fragment in str(err.value)


def test_error_codes_are_distinct():
    codes = set()
    for over in (
        dict(norm={"kind": "lp", "p": 1.0}),
        dict(weight={"d": 0.0, "h": 0.5}),
        dict(weight={"d": 1.0, "h": -0.5}),
        dict(sources=[{"position": [1.0, 0.0], "flow": -1.0}]),
        dict(sources=[{"position": [0.0, 0.0], "flow": 1.0}]),
    ):
        with pytest.raises(InvalidInputError) as err:
            parse_instance(json.dumps(doc(**over)))
        codes.add(err.value.code)
    assert len(codes) == 5


def test_bad_json_and_missing_fields():
    with pytest.raises(InvalidInputError):
        parse_instance("{not json")
    d = doc()
    del d["sink"]
    with pytest.raises(InvalidInputError, match="sink"):
        parse_instance(json.dumps(d))


def test_duplicate_sources_are_merged():
    text = json.dumps(
        doc(sources=[{"position": [1.0, 1.0], "flow": 1.0}, {"position": [1.0, 1.0], "flow": 2.0}])
    )
    with pytest.warns(InstanceWarning, match="merged"):
        inst = parse_instance(text)
    assert inst.n == 1 and inst.sources[0].flow == 3.0


def test_round_trip():
    inst = equilateral(h=0.5, flows=(1.5, 2.5))
    again = parse_instance(dump_instance(inst))
    assert again == inst
    assert instance_to_dict(instance_from_dict(instance_to_dict(inst))) == instance_to_dict(inst)


def test_emit_single_edge():
    inst = parse_instance(json.dumps(doc()))
    sol = solve(inst)
    out = json.loads(emit_result(sol.arborescence, sol.certificate, sol.cost))
    assert len(out["edges"]) == 1
    assert out["certificate"]["verdict"] == "pass"


def test_emit_certified_and_deterministic():
    inst = equilateral()
    texts = []
    for _ in range(2):
        sol = solve(inst)
        texts.append(
            emit_result(
                sol.arborescence,
                sol.certificate,
                sol.cost,
                instance=inst,
                metadata={"topologies_examined": sol.topologies_examined, "iterations": sol.iterations},
            )
        )
    assert texts[0] == texts[1]
    out = json.loads(texts[0])
    assert list(out) == ["instance", "cost", "vertices", "edges", "certificate", "solver"]
    assert out["certificate"]["verdict"] == "pass"
    assert out["certificate"]["max_residual"] <= 1e-8
    assert set(out["edges"][0]) == {"tail", "head", "flow", "weight", "length"}
    assert re.search(r'"cost": 1\.73205080756887\d\d', texts[0])


def _widths(svg):
    return [float(w) for w in re.findall(r'class="edge"[^>]*stroke-width="([^"]+)"', svg)]


def test_svg_star_widths_follow_weight():
    inst = equilateral(h=1.0, flows=(1.0, 3.0))
    arb = embed(inst, [(1, 3), (2, 3), (3, 0)], {3: (0.5, 0.3)})
    svg = emit_svg(arb)
    assert svg.count('class="edge"') == 3
    weights = [e.weight for e in arb.edges]
    widths = _widths(svg)
    assert sorted(range(3), key=lambda i: weights[i]) == sorted(range(3), key=lambda i: widths[i])
    assert svg.count('class="steiner"') == 1 and 'fill="none"' in svg
    assert svg.count('class="source"') == 2 and svg.count('class="sink"') == 1


def test_svg_single_arrow_and_equal_widths():
    inst = parse_instance(json.dumps(doc()))
    svg = emit_svg(solve(inst).arborescence)
    assert svg.count("marker-end") == 1
    widths = _widths(emit_svg(solve(equilateral()).arborescence))
    assert len(widths) == 3 and len(set(widths)) == 1


def test_svg_viewbox_margin():
    inst = parse_instance(json.dumps(doc(sources=[{"position": [2.0, 1.0], "flow": 1.0}])))
    svg = emit_svg(solve(inst).arborescence)
    box = [float(v) for v in re.search(r'viewBox="([^"]+)"', svg).group(1).split()]
    assert box == pytest.approx([-0.1, -1.05, 2.2, 1.1])


def test_svg_rejects_other_dimensions():
    inst = parse_instance(json.dumps(doc(dimension=3, sources=[{"position": [1.0, 0.0, 0.0], "flow": 1.0}], sink=[0.0, 0.0, 0.0])))
    with pytest.raises(InvalidInputError) as err:
        emit_svg(solve(inst).arborescence)
    assert err.value.code == "dimension"


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "inst.json"
    path.write_text(dump_instance(equilateral()))
    return path


def test_cli_certified_run(instance_file, tmp_path, capsys):
    out, svg = tmp_path / "out.json", tmp_path / "tree.svg"
    code = cli.main(["solve", str(instance_file), "--out", str(out), "--svg", str(svg), "--oracle"])
    assert code == 0
    result = json.loads(out.read_text())
    meta = result["solver"]
    assert meta["topologies_examined"] == 1 and meta["seed"] == 0
    assert meta["perturbation"]["max_decrease"] <= 1e-9
    assert meta["oracle"]["agrees"] is True
    assert svg.read_text().startswith("<?xml")


def test_cli_stdout_and_merge_warning(tmp_path, capsys):
    path = tmp_path / "dup.json"
    path.write_text(
        json.dumps(doc(sources=[{"position": [1.0, 1.0], "flow": 1.0}, {"position": [1.0, 1.0], "flow": 2.0}]))
    )
    assert cli.main(["solve", str(path)]) == 0
    captured = capsys.readouterr()
    assert "merged" in captured.err
    assert json.loads(captured.out)["edges"][0]["flow"] == 3.0


def test_cli_uncertified_exit(tmp_path, capsys):
    path = tmp_path / "asym.json"
    path.write_text(dump_instance(random_instance(np.random.default_rng(1), n=3, p=3.0, h=0.5)))
    assert cli.main(["solve", str(path), "--tol-balance", "1e-300"]) == 2
    assert json.loads(capsys.readouterr().out)["certificate"]["verdict"] == "fail"


def test_cli_input_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc(norm={"kind": "lp", "p": 1.0})))
    assert cli.main(["solve", str(bad)]) == 1
    assert "norm-not-smooth" in capsys.readouterr().err
    assert cli.main(["solve", str(tmp_path / "missing.json")]) == 1
    big = tmp_path / "big.json"
    big.write_text(json.dumps(doc(sources=[{"position": [float(i), 1.0], "flow": 1.0} for i in range(4)])))
    assert cli.main(["solve", str(big), "--max-terminals", "4"]) == 1


def test_cli_convergence_exit(instance_file, monkeypatch, capsys):
    def fail(*_args, **_kw):
        raise ConvergenceError("budget exhausted")

    monkeypatch.setattr(cli, "solve", fail)
    assert cli.main(["solve", str(instance_file)]) == 3
    assert "convergence" in capsys.readouterr().err


def test_module_entry_point(instance_file):
    proc = subprocess.run(
        [sys.executable, "-m", "gilbert", "solve", str(instance_file)], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["certificate"]["verdict"] == "pass"


def test_certificate_round_trips_through_json():
    inst = equilateral()
    sol = solve(inst)
    cert = certify(sol.arborescence, inst)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        out = json.loads(emit_result(sol.arborescence, cert, sol.cost))
    (star,) = out["certificate"]["steiner"]
    assert star["degree"] == 3 and len(star["collapsing_slacks"]) == 3
