import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from mmgou.cli import main
from mmgou.scenario import Scenario, ScenarioError, parse_scenario, parse_scenario_text, resolve_seed

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "mmgou" / "scenarios"

MINIMAL = {
    "name": "minimal",
    "kind": "map_sim",
    "model": {"type": "map", "dim": 1, "chain": {"generator": [[0.0]], "initial": 0}, "states": [{"drift": [0.5]}]},
    "run": {"T": 1.0, "seed": 1},
}

DIVERGENT = {
    "name": "divergent",
    "kind": "stationary_sample",
    "model": {"type": "map", "dim": 2, "chain": {"generator": [[0.0]], "initial": 0},
              "states": [{"drift": [-1.0, 0.0], "cov": [[0.0, 0.0], [0.0, 1.0]]}]},
    "run": {"N": 100, "mc": 500, "seed": 1},
}


def with_(base, **changes):
    obj = json.loads(json.dumps(base))
    for path, v in changes.items():
        cur = obj
        keys = path.split("__")
        for k in keys[:-1]:
            cur = cur[int(k)] if k.isdigit() else cur[k]
        cur[keys[-1]] = v
    return obj


def write(tmp_path, obj, name="sc.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj, indent=2))
    return str(p)


# ------------------------------------------------------------ parsing

def test_minimal_map_sim_parses(tmp_path):
    sc = parse_scenario(write(tmp_path, MINIMAL))
    assert sc.kind == "map_sim" and sc.run.T == 1.0 and sc.run.N == 1 and sc.run.h == 0.01


def test_generator_row_sum_rejected():
    obj = with_(MINIMAL, model__chain__generator=[[-1.0, 1.0], [2.0, -2.001]],
                model__states=[{"drift": [0.5]}, {"drift": [0.1]}])
    with pytest.raises(ScenarioError) as e:
        parse_scenario_text(json.dumps(obj))
    assert "generator[1]" in e.value.path


def test_claim_law_support_mismatch_rejected():
    obj = json.loads((SCENARIOS / "cramer_lundberg.json").read_text())
    obj["model"]["states"][0]["claim_law"] = {"kind": "normal", "mean": 1.0, "var": 1.0, "support": "positive"}
    with pytest.raises(ScenarioError) as e:
        parse_scenario_text(json.dumps(obj))
    assert e.value.path.startswith("model.states[0].claim_law")


def test_json_syntax_error_has_line():
    with pytest.raises(ScenarioError) as e:
        parse_scenario_text('{\n  "name": "x",\n  "kind": \n}')
    assert e.value.path == "line 4"


@pytest.mark.parametrize("change,path,invariant", [
    ({"run__T": -1.0}, "run.T", "positive run parameters"),
    ({"run__N": 0}, "run.N", "positive run parameters"),
    ({"kind": "ruin"}, "model.type", "kind-model compatibility"),
    ({"kind": "stationarity"}, "model.dim", "kind-model compatibility"),
    ({"run__bogus": 1}, "run", ""),
    ({"kind": "nope"}, "kind", ""),
])
def test_invariant_errors(change, path, invariant):
    with pytest.raises(ScenarioError) as e:
        parse_scenario_text(json.dumps(with_(MINIMAL, **change)))
    assert e.value.path == path and e.value.invariant == invariant


def test_missing_required_field():
    obj = with_(MINIMAL)
    del obj["run"]["T"]
    with pytest.raises(ScenarioError) as e:
        parse_scenario_text(json.dumps(obj))
    assert e.value.path == "run.T"


def test_shipped_scenarios_roundtrip():
    files = sorted(SCENARIOS.glob("*.json"))
    assert len(files) >= 6
    for f in files:
        sc = parse_scenario(f)
        again = parse_scenario_text(sc.dumps())
        assert again == sc and again.dumps() == sc.dumps() == f.read_text(), f.name


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(N=st.integers(1, 10**6), T=st.floats(1e-3, 1e4), h=st.floats(1e-5, 1.0),
       seed=st.one_of(st.none(), st.integers(0, 2**63)), drift=st.floats(-10, 10))
def test_roundtrip_property(N, T, h, seed, drift):
    obj = with_(MINIMAL, run={"N": N, "T": T, "h": h}, model__states=[{"drift": [drift]}])
    if seed is not None:
        obj["run"]["seed"] = seed
    sc = parse_scenario_text(json.dumps(obj))
    assert parse_scenario_text(sc.dumps()) == sc
    assert Scenario.from_json(sc.to_json()).dumps() == sc.dumps()


def test_resolve_seed():
    sc = parse_scenario_text(json.dumps(with_(MINIMAL, run={"T": 1.0})))
    s2, given_ = resolve_seed(sc, None)
    assert s2.run.seed == 0 and not given_
    s3, given_ = resolve_seed(sc, 9)
    assert s3.run.seed == 9 and given_


def test_overrides_revalidate():
    sc = parse_scenario_text(json.dumps(MINIMAL))
    assert sc.with_overrides(N=4).run.N == 4
    with pytest.raises(ScenarioError):
        sc.with_overrides(h=-1.0)


# ------------------------------------------------------------ CLI

def run_cli(args, capsys):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_writes_outputs_and_manifest(tmp_path, capsys):
    out = tmp_path / "o"
    code, stdout, _ = run_cli(["simulate", write(tmp_path, MINIMAL), "--out", out, "--N", 2], capsys)
    assert code == 0
    assert (out / "paths.csv").read_text().startswith("path,")
    man = json.loads((out / "manifest.json").read_text())
    assert {"scenario", "seed", "version", "wall_time", "outputs", "threads"} <= set(man)
    assert man["scenario"]["run"]["N"] == 2 and man["seed"] == 1
    assert json.loads(stdout)["outputs"] == man["outputs"]


def test_seed_warning(tmp_path, capsys):
    obj = with_(MINIMAL, run={"T": 1.0})
    code, _, err = run_cli(["simulate", write(tmp_path, obj), "--out", tmp_path / "o"], capsys)
    assert code == 0 and "warning" in json.loads(err.splitlines()[0])
    code, _, err = run_cli(["simulate", write(tmp_path, obj), "--out", tmp_path / "o", "--seed", 3], capsys)
    assert code == 0 and err == ""


def test_validation_exit_code(tmp_path, capsys):
    code, _, err = run_cli(["simulate", write(tmp_path, with_(MINIMAL, run__T=-1.0)), "--out", tmp_path], capsys)
    e = json.loads(err)
    assert code == 2 and e["error"] == "validation" and e["path"] == "run.T"
    assert e["invariant"] == "positive run parameters"
    code, _, err = run_cli(["ruin", write(tmp_path, MINIMAL), "--out", tmp_path], capsys)
    assert code == 2 and json.loads(err)["invariant"] == "subcommand-kind match"


def test_io_exit_code(tmp_path, capsys):
    code, _, err = run_cli(["simulate", tmp_path / "missing.json", "--out", tmp_path], capsys)
    assert code == 4 and json.loads(err)["error"] == "io"
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = run_cli(["simulate", write(tmp_path, MINIMAL), "--out", blocker / "sub"], capsys)
    assert code == 4


def test_refusal_exit_code(tmp_path, capsys):
    out = tmp_path / "o"
    code, _, err = run_cli(["stationary-sample", write(tmp_path, DIVERGENT), "--out", out], capsys)
    assert code == 3 and json.loads(err)["error"] == "inconclusive"
    rep = json.loads((out / "report.json").read_text())
    assert rep["verdict"] == "divergent"
    assert json.loads((out / "manifest.json").read_text())["conclusive"] is False


def test_ruin_emits_surface(tmp_path, capsys):
    out = tmp_path / "o"
    sc = SCENARIOS / "cramer_lundberg.json"
    code, _, _ = run_cli(["ruin", sc, "--out", out, "--N", 2000, "--T", 20, "--u", 1, 2], capsys)
    assert code == 0
    lines = (out / "ruin_surface.csv").read_text().splitlines()
    assert lines[0] == "u,j,psi,se,n_ruined,hazard_ok" and len(lines) == 3
    assert (out / "manifest.json").exists()


def test_identities_table_and_rerun(tmp_path, capsys):
    out = tmp_path / "a"
    code, _, _ = run_cli(["identities", SCENARIOS / "identity_suite.json", "--out", out, "--N", 5,
                          "--threads", 1], capsys)
    assert code == 0
    rows = (out / "identities.csv").read_text().splitlines()
    assert rows[0].endswith(",passed") and all(r.endswith("true") for r in rows[1:])
    code, stdout, _ = run_cli(["rerun", out / "manifest.json", "--out", tmp_path / "b", "--threads", 4], capsys)
    assert code == 0 and json.loads(stdout)["reproduced"] is True
    for f in ("identities.csv",):
        assert (out / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_rerun_mismatch_exit_code(tmp_path, capsys):
    out = tmp_path / "a"
    run_cli(["simulate", write(tmp_path, MINIMAL), "--out", out], capsys)
    man = json.loads((out / "manifest.json").read_text())
    man["outputs"]["paths.csv"] = "0" * 64
    (out / "manifest.json").write_text(json.dumps(man))
    code, stdout, _ = run_cli(["rerun", out / "manifest.json", "--out", tmp_path / "b"], capsys)
    assert code == 5 and json.loads(stdout)["reproduced"] is False


def test_verify_ruin_inconclusive_exit(tmp_path, capsys):
    out = tmp_path / "o"
    code, _, err = run_cli(["verify-ruin", SCENARIOS / "two_state_shock.json", "--out", out, "--N", 1000,
                            "--T", 10, "--u", 50], capsys)
    assert code == 3
    assert json.loads((out / "verify.json").read_text())["verdict"] == "inconclusive"
