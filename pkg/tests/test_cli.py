import json
from pathlib import Path

import pytest

from reeblab import cli
from reeblab.config import parse_scenario
from reeblab.errors import ConfigError

from checks import assert_json_close, load_json
from oracles import FROZEN_CZ

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = Path(__file__).parent / "golden"

FRIED_SMALL = """\
command: fried
system: {kind: split, a: 1, b: sqrt(2)}
params:
  link: [gamma1, gamma2]
  samples: 3
  horizon: 500
seed: 20240531
"""


def _bare_numbers(obj, path="$"):
    """Paths of numbers not sitting inside a {value, tol} object."""
    if isinstance(obj, dict):
        if "value" in obj and "tol" in obj:
            return []
        return [p for k, v in obj.items() for p in _bare_numbers(v, f"{path}.{k}")]
    if isinstance(obj, list):
        return [p for i, v in enumerate(obj) for p in _bare_numbers(v, f"{path}[{i}]")]
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return [path]
    return []


def test_cz_golden(tmp_path, capsys):
    assert cli.main(["cz", "--config", str(ROOT / "scenarios" / "cz.yaml"), "--out", str(tmp_path)]) == 0
    got = load_json(tmp_path / "result.json")
    want = load_json(GOLDEN / "cz.json")
    assert [r["cz"]["value"] for r in want["result"]["rows"]] == FROZEN_CZ[("sqrt2", 1)][:5]
    assert_json_close(got, want)
    assert (tmp_path / "cz.csv").read_text().splitlines()[1:] == ["1,3", "2,7", "3,11", "4,13", "5,17"]
    assert "cz: ok" in capsys.readouterr().out


def test_every_result_number_wrapped(tmp_path):
    assert cli.main(["run", str(ROOT / "scenarios" / "linking.yaml"), "--out", str(tmp_path)]) == 0
    res = load_json(tmp_path / "result.json")["result"]
    assert _bare_numbers(res) == []
    assert res["linking_number"]["value"] == 1
    assert abs(res["gauss_integral"]["value"] - 1) <= 1e-3
    assert [s["sl"]["value"] for s in res["self_linking"]] == [-1, -1]


def test_byte_identical_runs(tmp_path):
    cfg = tmp_path / "fried.yaml"
    cfg.write_text(FRIED_SMALL)
    outs = []
    for name in ("a", "b"):
        assert cli.main(["fried", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
        outs.append((tmp_path / name / "result.json").read_bytes())
    assert outs[0] == outs[1]
    assert (tmp_path / "a" / "samples.csv").read_bytes() == (tmp_path / "b" / "samples.csv").read_bytes()
    rec = json.loads(outs[0])
    assert rec["result"]["verdict"] is True


def test_seed_override_changes_samples(tmp_path):
    cfg = tmp_path / "fried.yaml"
    cfg.write_text(FRIED_SMALL)
    cli.main(["fried", "--config", str(cfg), "--out", str(tmp_path / "a")])
    cli.main(["fried", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "5"])
    assert (tmp_path / "a" / "result.json").read_bytes() != (tmp_path / "b" / "result.json").read_bytes()


def test_malformed_config_exit_2(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("command: cz\nsystem: {kind: split, a: 1, b: 2}\nparams:\n  orbit: gamma1\n  bogus: 1\n")
    out = tmp_path / "out"
    assert cli.main(["cz", "--config", str(cfg), "--out", str(out)]) == 2
    assert not out.exists()
    err = capsys.readouterr().err
    assert "bad.yaml:4" in err and "bogus" in err


@pytest.mark.parametrize("text,needle", [
    ("command: cz\nsystem: {kind: split, a: -1, b: 2}\nparams: {orbit: gamma1}\n", "s.yaml:2"),
    ("command: cz\nsystem: {kind: cube}\nparams: {orbit: gamma1}\n", "cube"),
    ("command: nope\nsystem: {kind: hopf}\n", "command"),
    ("command: cz\nsystem: {kind: split, a: 1, b: __import__('os')}\nparams: {orbit: gamma1}\n", "s.yaml:2"),
])
def test_config_errors(text, needle):
    with pytest.raises(ConfigError) as exc:
        parse_scenario(text, "s.yaml")
    assert needle in str(exc.value)


def test_computation_error_exit_1(tmp_path, capsys):
    cfg = tmp_path / "same.yaml"
    cfg.write_text("command: linking\nsystem: {kind: hopf}\nparams:\n  curves: [gamma1, gamma1]\n")
    assert cli.main(["linking", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "error:" in capsys.readouterr().err


def test_header_only_csv_for_empty_results(tmp_path):
    files = cli.emit_plotdata("fried", {"intersection": {"samples": []}}, tmp_path)
    assert [f.read_text() for f in files] == ["index,T_n,estimate\n"]
    files = cli.emit_plotdata("spectrum", {"entries": []}, tmp_path)
    assert files[0].read_text() == "nu,wind\n"


def test_help(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "REEBLAB_THREADS" in out and "return-map" in out


def test_return_map_scenario(tmp_path):
    assert cli.main(["run", str(ROOT / "scenarios" / "return_map.yaml"), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "iterates.csv").read_text().splitlines()
    assert lines[0] == "k,rho,phi,tau" and len(lines) == 22
