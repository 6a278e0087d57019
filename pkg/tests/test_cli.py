import csv
import io
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from qamp import cli, corpus, detect, sweep, walks

SCHEMA = json.loads(resources.files("qamp").joinpath("report.schema.json").read_text())


@pytest.fixture
def workdir(tmp_path):
    return tmp_path


def run_json(args, out):
    code = cli.run(args + ["--out", str(out)])
    return code, json.loads(out.read_text())


def gen(workdir, name, *args):
    path = workdir / name
    assert cli.run(["gen", *args, "--out", str(path)]) == 0
    return path


def test_gen_and_theta_on_diagonal_instance(workdir):
    inst = gen(workdir, "neq.json", "--family", "diagonal-neq", "--graph", "k4")
    code, rep = run_json(["theta", str(inst)], workdir / "r.json")
    assert code == 0
    jsonschema.validate(rep, SCHEMA)
    assert rep["params"]["theta"] == 0.0
    assert rep["params"]["theta_exact"] is True


def test_layers_and_validate(workdir):
    inst = gen(workdir, "p.json", "--family", "random-rank", "--graph", "path6", "--rank", "2")
    code, rep = run_json(["layers", str(inst)], workdir / "l.json")
    assert code == 0 and rep["params"]["g"] == 2
    code, rep = run_json(["validate", str(inst)], workdir / "v.json")
    assert code == 0 and rep["passed"]


def test_validate_flags_bad_instance(workdir):
    bad = workdir / "bad.json"
    data = {"dims": [2, 2], "constraints": [{"support": [0, 1], "projector": {"dim": 4, "entries": [[2, 0]] + [[0, 0]] * 15}}]}
    bad.write_text(json.dumps(data))
    code, rep = run_json(["validate", str(bad)], workdir / "v.json")
    assert code == 1
    assert rep["checks"][0]["failures"]


def test_ground_kitaev_detect_decay(workdir):
    inst = gen(workdir, "a.json", "--family", "angle", "--angle", "0.7")
    for cmd in (["ground"], ["kitaev"], ["detect", "--trials", "10"], ["decay", "--trials", "10"]):
        code, rep = run_json(cmd + [str(inst)], workdir / "r.json")
        jsonschema.validate(rep, SCHEMA)
        assert code == 0, rep
    code, rep = run_json(["kitaev", str(inst)], workdir / "r.json")
    assert rep["checks"][0]["params"]["one_minus_cos"] == pytest.approx(rep["params"]["epsilon0"], abs=1e-9)


def test_detect_reports_regime_invalid(workdir):
    inst = gen(workdir, "a.json", "--family", "angle", "--angle", "0.7")
    code, rep = run_json(["detect", "--ell", "1", "--trials", "3", str(inst)], workdir / "r.json")
    assert code == 0
    assert rep["params"]["regime_valid"] is False
    assert "regime-invalid" in rep["checks"][0]["notes"]


def test_camp_deterministic_and_passing(workdir):
    g = gen(workdir, "k4.json", "--family", "random-regular", "--n", "4", "--d", "3")
    args = ["camp", "--graph", str(g), "--t", "4", "--trials", "50", "--seed", "7"]
    a, b = workdir / "a.json", workdir / "b.json"
    assert cli.run(args + ["--out", str(a)]) == 0
    assert cli.run(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    jsonschema.validate(rep, SCHEMA)
    assert rep["rows"] and all(r["pass"] for r in rep["rows"])


def test_csv_has_header(workdir):
    out = workdir / "c.csv"
    assert cli.run(["camp", "--graph", "k4", "--t", "3", "--format", "csv", "--out", str(out)]) == 0
    rows = list(csv.reader(io.StringIO(out.read_text())))
    header = rows[0]
    for col in ("sigma", "t", "unsat", "unsat_t", "bound", "pass"):
        assert col in header
    assert all(len(r) == len(header) for r in rows[1:])
    assert len(rows) == 1 + 16 * 3


def test_moments_and_qamp(workdir):
    code, rep = run_json(["moments", "--graph", "prism", "--trials", "5", "--t", "4"], workdir / "m.json")
    assert code == 0 and rep["passed"]
    code, rep = run_json(["qamp", "--graph", "k4", "--family", "rank3-entangled", "--t", "2"], workdir / "q.json")
    jsonschema.validate(rep, SCHEMA)
    assert code == 0
    assert rep["params"]["K_eff"] <= rep["params"]["K3"]


def test_qamp_experiment_file(workdir):
    exp = workdir / "exp.json"
    exp.write_text(json.dumps({"graph": "prism", "family": "diagonal-neq", "q": 2, "t": 2}))
    code, rep = run_json(["qamp", str(exp)], workdir / "q.json")
    assert code == 0
    assert [r["t"] for r in rep["rows"]] == [1, 2]


def test_exit_code_config_errors(workdir):
    assert cli.run(["theta", str(workdir / "missing.json"), "--out", str(workdir / "r.json")]) == 2
    rep = json.loads((workdir / "r.json").read_text())
    assert rep["error"]["type"] == "ConfigError"
    broken = workdir / "broken.json"
    broken.write_text("{\"dims\": [2], ")
    assert cli.run(["layers", str(broken), "--out", str(workdir / "r.json")]) == 2
    assert cli.run(["nonsense"]) == 2
    assert cli.run(["camp", "--graph", "k4", "--trials", "0"]) == 2
    assert cli.run(["verify-all", "--corpus", "other", "--out", str(workdir / "r.json")]) == 2


def test_exit_code_cap_exceeded(workdir):
    code, rep = run_json(["qamp", "--graph", "prism", "--t", "3", "--cap-enum", "10"], workdir / "r.json")
    assert code == 3
    assert rep["error"]["type"] == "EnumerationTooLarge"
    inst = gen(workdir, "s.json", "--family", "saturated", "--n", "7", "--stack", "2")
    code, rep = run_json(["ground", "--method", "dense", "--cap-dense", "64", str(inst)], workdir / "r.json")
    assert code == 3


def test_exit_code_violation(workdir, monkeypatch):
    # a deliberately wrong bound must surface as exit status 1
    monkeypatch.setattr(detect, "delta_sq", lambda p: 1.0)
    inst = gen(workdir, "a.json", "--family", "angle", "--angle", "0.7")
    code, rep = run_json(["kitaev", str(inst)], workdir / "r.json")
    assert code == 1
    assert not rep["passed"]


def test_timing_is_opt_in(workdir):
    code, rep = run_json(["camp", "--graph", "k4", "--t", "1", "--timing"], workdir / "r.json")
    assert "wall_time" in rep
    code, rep = run_json(["camp", "--graph", "k4", "--t", "1"], workdir / "r.json")
    assert "wall_time" not in rep


def test_thread_count_does_not_change_reports(monkeypatch):
    c = corpus.standard_corpus(0)
    systems = c.angle + c.two_layer[:4]
    out = []
    for n in ("1", "4"):
        monkeypatch.setenv("QAMP_THREADS", n)
        prep = sweep.prepare(systems)
        reps = [sweep.check_aux(prep, 10), sweep.check_detect(prep, 10), *sweep.check_decay_and_energy(prep, 10)]
        out.append(json.dumps([r.to_dict() for r in reps]))
    assert out[0] == out[1]


def test_module_entry_point(workdir):
    out = workdir / "r.json"
    proc = subprocess.run([sys.executable, "-m", "qamp", "camp", "--graph", "k4", "--t", "2", "--out", str(out)], capture_output=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(out.read_text())["command"] == "camp"


def test_gen_random_regular_graph_file(workdir):
    path = gen(workdir, "g.json", "--family", "random-regular", "--n", "20", "--seed", "3")
    g = walks.read_graph(path)
    assert g.n == 20 and g.is_regular


def test_verify_all_standard_corpus(workdir):
    code, rep = run_json(["verify-all", "--corpus", "standard", "--seed", "0"], workdir / "all.json")
    jsonschema.validate(rep, SCHEMA)
    assert code == 0, [c["check"] for c in rep["checks"] if not c["passed"]]
    names = {c["check"] for c in rep["checks"]}
    for need in ("aux", "decay", "energy", "detect", "kitaev", "classical-amp", "moments", "quantum-amp"):
        assert need in names
