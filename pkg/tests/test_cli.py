import json

import pytest

from metricglue.cli import main


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


LATTICE16 = {"kind": "lattice", "dim": 1, "p": 2, "extent": 16}


def run(tmp_path, cfg, *extra, command="embed"):
    conf = write(tmp_path, "cfg.json", cfg)
    out = tmp_path / "out"
    code = main([command, "--config", conf, "--out", str(out), *extra])
    return code, out


def test_identity_run(tmp_path):
    code, out = run(tmp_path, {"space": LATTICE16, "chain": {"kind": "identity"}})
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["verdict"] == "pass"
    assert summary["distortion_phi_tilde"]["distortion"] <= 2
    assert {"maps.json", "pairs.csv", "summary.json"} <= {p.name for p in out.iterdir()}


def test_shift_run_passes_every_branch(tmp_path):
    code, out = run(tmp_path, {"space": LATTICE16, "chain": {"kind": "shift"}})
    assert code == 0
    case = json.loads((out / "summary.json").read_text())["case_audit"]
    assert case["violation_count"] == 0 and case["passed"] == case["counts"]


def test_horizon_one_is_a_selection_failure(tmp_path, capsys):
    code, _ = run(tmp_path, {"space": LATTICE16, "chain": {"kind": "shift"}, "selection": {"horizon": 1}})
    assert code == 3
    err = capsys.readouterr().err
    assert "[selection]" in err and "HorizonExhausted" in err


def test_config_errors(tmp_path):
    assert run(tmp_path, {"space": LATTICE16, "mode": "fuzzy"})[0] == 2
    assert run(tmp_path, {"chain": {"kind": "identity"}})[0] == 2
    assert run(tmp_path, {"space": LATTICE16, "audit": {"nonsense": 1}})[0] == 2
    assert main(["embed", "--config", str(tmp_path / "missing.json")]) == 2


def test_frechet_small_matrix(tmp_path):
    code, out = run(tmp_path, {"matrix": [[0, 1, 2], [1, 0, 3], [2, 3, 0]]}, command="frechet")
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["max_relative_error"] == 0.0
    assert summary["vectors"]["0"] == {"idx": [1, 2], "val": [1.0, 2.0]}


def test_validate_reports_triangle(tmp_path, capsys):
    bad = {"kind": "points", "matrix": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]}
    code, out = run(tmp_path, {"space": bad}, command="validate")
    assert code == 1
    assert "triangle" in capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text())
    assert summary["space"]["violations"][0]["triple"] == [0, 1, 2]


def test_validate_chain(tmp_path):
    code, out = run(tmp_path, {"space": LATTICE16, "chain": {"kind": "scaled_shift"}}, command="validate")
    assert code == 0
    assert json.loads((out / "summary.json").read_text())["chain"]["ok"]


def test_audit_round_trip_and_override(tmp_path):
    code, out = run(tmp_path, {"space": LATTICE16, "chain": {"kind": "shift"}})
    assert code == 0
    maps = str(out / "maps.json")
    again = tmp_path / "again"
    assert main(["audit", "--maps", maps, "--out", str(again)]) == 0
    assert (again / "pairs.csv").read_bytes() == (out / "pairs.csv").read_bytes()
    strict = write(tmp_path, "strict.json", {"audit": {"below3": 10.0}})
    assert main(["audit", "--maps", maps, "--config", strict, "--out", str(tmp_path / "strict")]) == 1


def test_audit_needs_maps(tmp_path):
    assert main(["audit", "--out", str(tmp_path)]) == 2


def test_moduli_subcommand(tmp_path):
    cfg = {"space": {"kind": "lattice", "dim": 1, "p": 2, "extent": 32}, "chain": {"kind": "shift"}}
    code, out = run(tmp_path, cfg, command="moduli")
    assert code == 0
    mod = json.loads((out / "summary.json").read_text())["moduli"]
    assert mod["strictly_increasing"] and mod["buckets"] >= 5


def test_tree_space_uses_frechet_net(tmp_path):
    cfg = {"space": {"kind": "tree", "branching": 2, "depth": 3}, "p": "inf", "chain": {"kind": "shift"}}
    assert run(tmp_path, cfg)[0] == 0
    cfg["p"] = 2
    assert run(tmp_path, cfg)[0] == 2


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    text = capsys.readouterr().out
    for name in ("embed", "audit", "frechet", "moduli", "validate"):
        assert name in text
