import json
import os

import pytest

from hyperpoly.cli import dumps, main, parse_disk, verify_report
from hyperpoly.fnspace import eval_fn, fn_from_json


def run(tmp_path, name, *argv):
    out = tmp_path / f"{name}.json"
    code = main([*argv, "--out", str(out)])
    return code, out


def test_mix_trivial(tmp_path):
    code, out = run(tmp_path, "m", "mix", "--f", "poly:1", "--g", "poly:1", "--eps", "0.1",
                    "--R", "1.5", "--n", "10")
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["conformance"] and rep["experiment"] == "mix"
    p = fn_from_json(rep["outputs"]["witness"]["p"])
    assert abs(eval_fn(p, 2.2 - 0.5j) - 1) < 1e-9
    timing = json.loads((tmp_path / "m.json.timing.json").read_text())
    assert "runtime_s" in timing and "started_utc" in timing
    assert "runtime" not in out.read_text()
    assert not [f for f in os.listdir(tmp_path) if f.startswith(".tmp-")]


def test_mix_acceptance_run(tmp_path):
    code, out = run(tmp_path, "m", "mix", "--f", "poly:1,0.5", "--g", "poly:2,-1", "--eps", "0.1",
                    "--R", "1.5", "--n", "10", "--degree", "96")
    assert code == 0
    w = json.loads(out.read_text())["outputs"]["witness"]
    assert w["res_start"] < 0.1 and w["res_end"] < 0.1
    assert main(["verify", str(out)]) == 0


@pytest.mark.parametrize("argv", [
    ["mix", "--f", "poly:1", "--g", "poly:1", "--eps", "0.1", "--R", "1.5", "--n", "4"],
    ["mix", "--f", "bad:1", "--g", "poly:1", "--eps", "0.1", "--R", "1.5", "--n", "10"],
    ["mix", "--f", "poly:1,-1", "--g", "poly:1", "--eps", "0.1", "--R", "1.5", "--n", "10"],
    ["periodic", "--g", "poly:1", "--eps", "0.1", "--R", "1.5", "--n", "4"],
    ["orbit", "--map", "nope", "--f", "poly:1", "--N", "2"],
    ["orbit", "--map", "two-translate", "--f", "poly:1", "--N", "2"],
    ["orbit", "--map", "deriv-square", "--N", "2"],
    ["mix", "--f", "poly:1"],
])
def test_bad_input_exits_2(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err


def test_precondition_message_names_quantity(capsys):
    main(["mix", "--f", "poly:1", "--g", "poly:1", "--eps", "0.1", "--R", "1.5", "--n", "4"])
    assert "2R+2" in capsys.readouterr().err


def test_periodic_and_verify(tmp_path):
    code, out = run(tmp_path, "p", "periodic", "--g", "poly:0,1", "--eps", "0.25", "--R", "0.9",
                    "--n", "8")
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["outputs"]["structural_drift"] <= 1e-12
    assert main(["verify", str(out)]) == 0


def test_verify_detects_tampering(tmp_path):
    code, out = run(tmp_path, "p", "periodic", "--g", "poly:0,1", "--eps", "0.25", "--R", "0.9",
                    "--n", "8")
    rep = json.loads(out.read_text())
    rep["inputs"]["eps"] = 1e-6
    bad = tmp_path / "bad.json"
    bad.write_text(dumps(rep))
    assert main(["verify", str(bad)]) == 3
    rep = json.loads(out.read_text())
    rep["experiment"] = "nope"
    bad.write_text(dumps(rep))
    assert main(["verify", str(bad)]) == 2
    assert main(["verify", str(tmp_path / "missing.json")]) == 2


def test_orbit_csv(tmp_path):
    csv = tmp_path / "o.csv"
    code, out = run(tmp_path, "o", "orbit", "--map", "translation-eval", "--f", "poly:1,0.5",
                    "--N", "5", "--seminorm-disk", "0,0,1", "--zero-disk", "0,0,3", "--csv", str(csv))
    assert code == 0
    lines = csv.read_text().strip().split("\n")
    assert len(lines) == 7 and lines[0].startswith("step,eval0_logmag")
    assert main(["verify", str(out)]) == 0


def test_obstruct_subcommands(tmp_path):
    cases = {
        "de": ["obstruct", "deriv-eval", "--f", "dexp:24", "--N", "12"],
        "le": ["obstruct", "deriv-eval", "--f", "lexp:40", "--N", "40"],
        "tt": ["obstruct", "two-translate", "--g", "poly:0,1", "--K", "6", "--staircase", "0.5"],
        "ds": ["obstruct", "deriv-square", "--g", "poly:1,0,1", "--N", "4"],
        "sd": ["obstruct", "self-deriv", "--g", "poly:1,0,1", "--N", "4"],
        "guard": ["obstruct", "deriv-square", "--g", "poly:1,1", "--N", "4"],
    }
    for name, argv in cases.items():
        code, out = run(tmp_path, name, *argv)
        assert code == 0, name
        assert main(["verify", str(out)]) == 0, name
    rep = json.loads((tmp_path / "le.json").read_text())
    assert rep["outputs"]["growth"]["classification"] == "growing"
    rep = json.loads((tmp_path / "tt.json").read_text())
    assert [c[1][0] for c in rep["outputs"]["counts"]] == [2**k for k in range(7)]
    rep = json.loads((tmp_path / "guard.json").read_text())
    assert rep["outputs"]["hypothesis_ok"] is False


def test_seeds_file_fan_out(tmp_path):
    seeds = tmp_path / "seeds.txt"
    seeds.write_text("# seeds\npoly:1,1\nexp:10\n\npoly:2,0,1\n")
    code, out = run(tmp_path, "b2", "obstruct", "deriv-eval", "--seeds-file", str(seeds), "--N", "8",
                    "--workers", "2")
    assert code == 0
    code1, out1 = run(tmp_path, "b1", "obstruct", "deriv-eval", "--seeds-file", str(seeds), "--N", "8")
    assert out.read_bytes() == out1.read_bytes()
    rep = json.loads(out.read_text())
    assert rep["inputs"]["seeds"] == ["poly:1,1", "exp:10", "poly:2,0,1"]
    assert [r["inputs"]["f"] for r in rep["outputs"]["runs"]] == rep["inputs"]["seeds"]
    assert main(["verify", str(out)]) == 0


def test_determinism(tmp_path):
    argv = ["mix", "--f", "poly:1,0.5", "--g", "poly:2,-1", "--eps", "0.1", "--R", "1.5", "--n", "6"]
    _, a = run(tmp_path, "a", *argv)
    _, b = run(tmp_path, "b", *argv)
    assert a.read_bytes() == b.read_bytes()


def test_nonfinite_values_serialize():
    text = dumps({"x": float("-inf"), "y": [1.0, float("nan")]})
    d = json.loads(text)
    assert d["x"] == "-inf" and float(d["x"]) == float("-inf")


def test_parse_disk():
    d = parse_disk("1,-2,0.5")
    assert d.center == 1 - 2j and d.radius == 0.5
    assert parse_disk("2i,1").center == 2j
    with pytest.raises(ValueError):
        parse_disk("1")


def test_verify_report_in_process(tmp_path):
    _, out = run(tmp_path, "o", "obstruct", "two-translate", "--g", "poly:0,1", "--K", "3",
                 "--disk", "0.5,0,0.25")
    rep = json.loads(out.read_text())
    assert verify_report(rep)
    rep["outputs"]["counts"][0][1][0] = 5
    assert not verify_report(rep)
