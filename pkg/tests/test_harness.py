import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from horolab.errors import MatrixError, RangeError, SchemaError
from horolab.harness import (
    SHIPPED,
    ExperimentConfig,
    RunManifest,
    dynball_suite,
    group_to_json,
    load_group,
    parse_group,
    property_suites,
    run_suite,
)

CONFIG = Path(__file__).parent / "configs" / "small.json"


def cli(*args, cwd=None):
    env = dict(os.environ, SOURCE_DATE_EPOCH="0")
    return subprocess.run([sys.executable, "-m", "horolab.cli", *args], capture_output=True, text=True,
                          cwd=cwd, env=env)


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_groups_load(name):
    g = load_group(name)
    assert g.generators
    for _, m in g.generators:
        assert m.a * m.d - m.b * m.c == pytest.approx(1.0)


def test_group_json_roundtrip(tmp_path):
    g = load_group("gamma2")
    p = tmp_path / "g.json"
    p.write_text(group_to_json(g))
    h = load_group(p)
    assert [m for _, m in h.generators] == [m for _, m in g.generators]


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"model": "upper-half-plane",\n "name": }')
    with pytest.raises(SchemaError, match=r"bad.json:2"):
        load_group(p)


def test_schema_violations():
    with pytest.raises(SchemaError):
        parse_group({"model": "disc", "name": "x", "generators": []})
    with pytest.raises(SchemaError):
        parse_group({"model": "upper-half-plane", "name": "x", "generators": [{"label": "a", "matrix": [1, 2]}]})


def test_matrix_errors():
    doc = {"model": "upper-half-plane", "name": "x", "generators": [{"label": "a", "matrix": [[1, 0], [0, 1]]}]}
    with pytest.raises(MatrixError):
        parse_group(doc)
    doc["generators"][0]["matrix"] = [[0, 1], [1, 0]]
    with pytest.raises(MatrixError):
        parse_group(doc)


def test_manifest_fields():
    m = RunManifest(3, "abc", {"C": 1.0})
    doc = json.loads(m.to_json())
    assert {"seed", "group_digest", "constants", "budgets", "tool_version", "timestamp"} <= set(doc)
    m.require("C")
    with pytest.raises(Exception):
        m.require("D")


def test_config_validation(tmp_path):
    with pytest.raises(RangeError):
        ExperimentConfig("gamma2", "o", rho_schedule=[1.0, 0.5])
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"group": "gamma2", "out_dir": "o", "bogus": 1}))
    with pytest.raises(SchemaError):
        ExperimentConfig.from_json(p)


def test_property_suites_pass():
    res = property_suites(seed=11, samples=300)
    assert len(res) == 9
    assert all(r.passed for r in res), [r for r in res if not r.passed]


def test_property_suites_seeded():
    a = property_suites(seed=4, samples=50, names=["conformal_identity"])
    b = property_suites(seed=4, samples=50, names=["conformal_identity"])
    assert a == b


def test_dynball_suite_all_groups():
    for name in SHIPPED:
        for _, _, rep in dynball_suite(load_group(name), 100, seed=0):
            assert rep.violated == 0


def test_run_suite_in_process(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = ExperimentConfig.from_json(CONFIG)
    path, ok = run_suite(cfg)
    assert ok
    names = {p.name for p in path.iterdir()}
    assert {"manifest.json", "delta.csv", "delta_inf.csv", "cover.csv", "tree.json", "invariants.json",
            "frostman.json", "classify.json"} <= names
    man = json.loads((path / "manifest.json").read_text())
    assert man["seed"] == 7 and {"C", "D", "c0", "K_frostman"} <= set(man["constants"])


def test_cli_run_byte_identical(tmp_path):
    outs = []
    for j in range(2):
        d = tmp_path / f"r{j}"
        d.mkdir()
        r = cli("run", "--config", str(CONFIG), cwd=d)
        assert r.returncode == 0, r.stderr
        outs.append({p.name: p.read_bytes() for p in (d / "out" / "small").iterdir()})
    assert outs[0] == outs[1]


def test_cli_exit_codes(tmp_path):
    assert cli("frostman", "--group", "gamma2").returncode == 4  # missing --seed
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    r = cli("delta", "--group", str(bad))
    assert r.returncode == 4 and "error:" in r.stderr
    assert cli("delta", "--group", "no_such_group").returncode == 4
    assert cli("delta-inf", "--group", "gamma2", "--rho", "1,0.5").returncode == 2
    assert cli("delta", "--group", "gamma2", "--depth", "12", "--max-elements", "100").returncode == 3


def test_cli_delta_and_outputs(tmp_path):
    r = cli("delta", "--group", "parabolic", "--depth", "14", "--out-dir", str(tmp_path / "d"))
    assert r.returncode == 0
    est = json.loads((tmp_path / "d" / "delta.json").read_text())["delta"]
    assert abs(est - 0.5) <= 0.05
    man = json.loads((tmp_path / "d" / "manifest.json").read_text())
    assert man["outputs"] == ["delta.csv", "delta.json"] and man["group_digest"]


def test_cli_classify_axis():
    r = cli("classify", "--group", "gamma2", "--axis-word", "a*b")
    assert r.returncode == 0 and "recurrent-like" in r.stdout


def test_cli_props_small(tmp_path):
    r = cli("props", "--seed", "1", "--samples", "200", "--out-dir", str(tmp_path))
    assert r.returncode == 0 and r.stdout.count("PASS") == 9
