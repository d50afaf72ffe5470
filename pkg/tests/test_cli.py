import csv
import json

import pytest

from ergokit import cli


def run(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config: ")
    body = [ln for ln in lines[1:] if not ln.startswith("#")]
    footer = [ln for ln in lines[1:] if ln.startswith("#")]
    return json.loads(lines[0][len("# config: "):]), list(csv.DictReader(body)), footer


def test_poisson_rerun_is_byte_identical(tmp_path, capsys):
    args = ["poisson", "--cost", "x", "--grid", "-8:8:201", "--x", "1.0"]
    first = run(args, capsys)
    assert first[0] == 0 and run(args, capsys)[1] == first[1]
    a = tmp_path / "a.csv"
    assert run(args + ["--out", str(a)], capsys)[0] == 0
    cfg, rows, _ = read_csv(a)
    assert cfg["experiment"] == "poisson" and cfg["grid"]["M"] == 201
    assert len(rows) == 201 and {"node", "h", "residual"} <= set(rows[0])


def test_replay_from_artifact(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["discounted", "--cost", "x2", "--alpha", "0.8", "--grid", "-8:8:201",
                "--out", str(a)], capsys)[0] == 0
    cfg, _, _ = read_csv(a)
    cfg["output"]["path"] = str(b)
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps(cfg))
    assert run(["run", str(conf)], capsys)[0] == 0
    assert read_csv(a)[1] == read_csv(b)[1]
    # the artifact itself is also accepted as a config
    code, out, _ = run(["run", str(a)], capsys)
    assert code == 0


def test_json_replay(tmp_path, capsys):
    a = tmp_path / "g.json"
    assert run(["gradcheck", "--f", "x2", "--x", "1.0", "--t", "2", "--n", "20000", "--seed", "3",
                "--out", str(a)], capsys)[0] == 0
    doc = json.loads(a.read_text())
    assert set(doc) == {"config", "experiment", "result"}
    assert {"estimate_pathwise", "estimate_fd", "pooled_se", "pass"} <= set(doc["result"])
    doc["config"]["output"]["path"] = None
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps(doc["config"]))
    code, out, _ = run(["run", str(conf)], capsys)
    assert code == 0 and json.loads(out)["result"] == doc["result"]


def test_missing_seed(capsys):
    code, _, err = run(["gradcheck", "--f", "x2", "--x", "1.0"], capsys)
    assert code == 1 and "mc.seed" in err


def test_unknown_key_reported_with_path(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"experiment": "poisson", "grid": {"bogus": 1}}))
    code, _, err = run(["run", str(conf)], capsys)
    assert code == 1 and "grid.bogus" in err


def test_bad_type_reported_with_path(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"experiment": "poisson", "grid": {"M": "many"}}))
    code, _, err = run(["run", str(conf)], capsys)
    assert code == 1 and "grid.M" in err


def test_unknown_experiment(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"experiment": "nope"}))
    assert run(["run", str(conf)], capsys)[0] == 1


def test_bad_expression(capsys):
    code, _, err = run(["poisson", "--cost", "__import__('os')", "--grid", "-8:8:101"], capsys)
    assert code == 1 and "config error" in err


def test_narrow_grid_is_an_error(capsys):
    code, _, err = run(["poisson", "--cost", "x", "--grid", "-4:4:101"], capsys)
    assert code == 1 and "GridTooSmallError" in err


def test_decay_rows_and_fit(tmp_path, capsys):
    out = tmp_path / "d.csv"
    assert run(["decay", "--f", "x", "--tmax", "30", "--grid", "-8:8:201", "--out", str(out)],
               capsys)[0] == 0
    _, rows, footer = read_csv(out)
    assert len(rows) == 31
    assert any("rho0" in ln for ln in footer)


def test_drift_infeasible_exit_code(capsys):
    code, out, _ = run(["drift", "--delta", "0.1", "--grid", "-6:6:241", "--format", "json"], capsys)
    assert code == 2
    assert json.loads(out)["result"]["pass"] is False


def test_drift_feasible(capsys):
    code, out, _ = run(["drift", "--delta", "0.05", "--grid", "-6:6:1201", "--format", "json"],
                       capsys)
    assert code == 0
    res = json.loads(out)["result"]
    assert abs(res["min_C_radius"] - 2.94) <= 0.02 and abs(res["min_b"] - 0.162) <= 0.002


def test_bernstein_json(capsys):
    code, out, _ = run(["bernstein", "--f", "z2", "--m", "10", "--box", "0:1", "--dims", "1"], capsys)
    assert code == 0
    res = json.loads(out)["result"]
    assert res["sup_val_err"] == pytest.approx(0.025, abs=1e-9)


def test_spectrum_json(capsys):
    code, out, _ = run(["spectrum", "--grid", "-8:8:201", "--top", "4"], capsys)
    assert code == 0
    doc = json.loads(out)
    centered = doc["result"]["centered"]
    assert abs(centered["xi_v"] - 0.5) <= 1e-3 and centered["agreement"] <= 0.02
    assert doc["result"]["kernel"]["moduli"][0] == pytest.approx(1.0, abs=1e-12)


def test_truncation_rows(capsys):
    code, out, _ = run(["truncation", "--grid", "-8:8:201", "--levels", "2,3,4"], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()[1:]))
    assert [float(r["n"]) for r in rows] == [2.0, 3.0, 4.0]


def test_growth_warning(capsys):
    code, _, err = run(["gradcheck", "--f", "exp(0.01*x)", "--x", "0.5", "--t", "1", "--n", "2000",
                        "--seed", "1", "--weight", "0"], capsys)
    assert code in (0, 2)
    assert "ergokit: warning:" in err


def test_stochastic_lyapunov_deterministic(capsys):
    args = ["lyapunov", "--model", "tanh1", "--x0", "0.5", "--T", "20", "--reps", "500",
            "--seed", "9"]
    first = run(args, capsys)
    assert first[0] == 0
    assert run(args, capsys)[1] == first[1]
