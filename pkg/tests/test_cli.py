import csv
import hashlib
import json

import pytest

from rwremeet import cli


def _run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _digest(p):
    return hashlib.sha256(p.read_bytes()).hexdigest()


def test_gen_env_deterministic_with_manifest(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    flags = ["--law", "bernoulli", "--rho", "2.718", "--kappa", "2.718", "--n", "100000", "--seed", "7"]
    assert _run(capsys, "gen-env", *flags, "-o", a)[0] == 0
    assert _run(capsys, "gen-env", *flags, "-o", b)[0] == 0
    assert len(json.loads(a.read_text())["sites"]) == 100_000
    assert _digest(a) == _digest(b)
    man = json.loads((tmp_path / "a.json.manifest.json").read_text())
    assert man["schema"] == 1 and man["seed"] == 7 and man["version"]
    assert man["outputs"] == [{"path": str(a), "sha256": _digest(a)}]
    assert man["config"]["n"] == 100_000 and "wall_time" in man


def test_gen_env_condition_b(tmp_path, capsys):
    code, _, err = _run(capsys, "gen-env", "--kappa", "1", "--n", "10", "--seed", "0", "-o", tmp_path / "e.json")
    assert code == 2 and "Condition B" in err


def test_bad_flags_exit_nonzero(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["gen-env", "--n", "ten"])
    assert exc.value.code != 0


def test_analyze_worked_path(capsys):
    code, out, _ = _run(capsys, "analyze", "--values", "0,-3,1,-5,2", "--lnt", "2", "--gamma", "2")
    assert code == 0
    d = json.loads(out)
    assert d["schema"] == 1 and d["zeta"] == 2.0
    assert d["decomposition"]["minima"] == [1, 3] and d["decomposition"]["peaks"] == [0, 2]


def test_analyze_cascade_and_diagnostics(tmp_path, capsys):
    out = tmp_path / "a.json"
    code, _, _ = _run(capsys, "analyze", "--brownian", "--step", "0.01", "--length", "200000", "--seed", "2",
                      "--lnt", "3", "--gamma", "2", "--cascade", "--diagnostics", "-o", out)
    assert code == 0
    d = json.loads(out.read_text())
    assert d["cascade"]["N"] == len(d["cascade"]["a"]) >= 1
    assert len(d["diagnostics"]) >= 5
    assert (tmp_path / "a.json.manifest.json").exists()


def test_analyze_horizon_error(capsys):
    code, _, err = _run(capsys, "analyze", "--values", "0,-3,1", "--lnt", "2", "--gamma", "3")
    assert code == 3 and "horizon" in err


def test_simulate_csv(tmp_path, capsys):
    env = tmp_path / "e.json"
    _run(capsys, "gen-env", "--n", "300", "--seed", "1", "-o", env)
    out = tmp_path / "s.csv"
    code, _, _ = _run(capsys, "simulate", "--env", env, "--t-max", "20", "--t-grid", "0:20:5", "--replicas", "500",
                      "--seed", "3", "-o", out, "--dump-replicas", tmp_path / "r.json")
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,p,stderr,n_replicas"
    rows = list(csv.DictReader(lines))
    assert float(rows[0]["p"]) == 1.0 and len(rows) == 5
    dump = json.loads((tmp_path / "r.json").read_text())
    assert len(dump["replicas"]["kind"]) == 500
    man = json.loads((tmp_path / "s.csv.manifest.json").read_text())
    assert {o["path"] for o in man["outputs"]} == {str(out), str(tmp_path / "r.json")}


def test_simulate_t_max_below_grid(tmp_path, capsys):
    env = tmp_path / "e.json"
    _run(capsys, "gen-env", "--n", "50", "--seed", "1", "-o", env)
    code, _, err = _run(capsys, "simulate", "--env", env, "--t-max", "1", "--t-grid", "0,2", "--seed", "0")
    assert code == 2 and "t_max" in err


def test_simulate_coalescing_gamma2_like_meeting(tmp_path, capsys):
    env = tmp_path / "e.json"
    _run(capsys, "gen-env", "--n", "400", "--seed", "4", "-o", env)
    times = {}
    for mode, seed in (("meeting", 1), ("coalescing", 2)):
        dump = tmp_path / f"{mode}.json"
        code, _, _ = _run(capsys, "simulate", "--env", env, "--t-max", "1e5", "--t-grid", "1e5", "--replicas", "3000",
                          "--seed", seed, "--mode", mode, "--dump-replicas", dump, "-o", tmp_path / f"{mode}.csv")
        assert code == 0
        times[mode] = json.loads(dump.read_text())["replicas"]["time"]
    from rwremeet.lawcheck import ks_two_sample

    assert ks_two_sample(times["meeting"], times["coalescing"]).passed


def test_experiment_theorem3_schema(tmp_path, capsys):
    out = tmp_path / "t3.json"
    code, _, _ = _run(capsys, "experiment", "theorem3", "--gamma", "2", "--paths", "40", "--lnt", "3,4",
                      "--step", "0.01", "--seed", "1", "-o", out)
    assert code == 0
    d = json.loads(out.read_text())
    assert d["schema"] == 1 and len(d["one_sample"]) == 2 and len(d["two_sample"]) == 1
    assert set(d["two_sample"][0]["gof"]) >= {"n", "n2", "ks_stat", "p_value", "passed"}


def test_experiment_theorem1_schema(tmp_path, capsys):
    out = tmp_path / "t1.json"
    code, _, _ = _run(capsys, "experiment", "theorem1", "--n-envs", "2", "--n-sites", "800", "--lnt-grid", "2,3",
                      "--L", "200", "--seed", "5", "-o", out)
    assert code == 0
    d = json.loads(out.read_text())
    s = d["series"][0]
    assert len(d["series"]) == 2 and set(s) >= {"t", "e", "zeta"} and len(s["e"]) == 2


def test_experiment_infeasible_sizes(capsys):
    code, _, err = _run(capsys, "experiment", "theorem1", "--L", "100000")
    assert code == 3 and "L <=" in err
