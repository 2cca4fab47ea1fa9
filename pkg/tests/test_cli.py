import csv
import json

import pytest

from app.errors import ExitCode
from app.main import build_parser, run
from app.sim.seeding import THREADS_ENV


def write_conf(tmp_path, name, **keys):
    path = tmp_path / name
    path.write_text("".join(f"{k.replace('__', '.')}={v}\n" for k, v in keys.items()))
    return str(path)


def data_lines(text):
    return [line for line in text.splitlines() if line and not line.startswith("#")]


def test_parser_knows_every_command():
    parser = build_parser()
    for cmd in ("verify-partitions", "verify-moments", "converge", "simulate", "fdd-test", "tightness-probe"):
        assert parser.parse_args([cmd]).command == cmd
    with pytest.raises(SystemExit):
        parser.parse_args(["explode"])


def test_verify_partitions(tmp_path):
    out = tmp_path / "parts.csv"
    assert run(["verify-partitions", "--lmax", "3", "--out", str(out)]) == ExitCode.PASS
    text = out.read_text()
    assert text.startswith("# command=verify-partitions\n")
    rows = list(csv.DictReader(data_lines(text)))
    assert [r["L"] for r in rows] == ["1", "2", "3"]
    assert all(r["status"] == "pass" for r in rows)
    assert all(r["notes"] == "" for r in rows)


@pytest.mark.parametrize("lmax", ["0", "13"])
def test_verify_partitions_size_limit(lmax):
    assert run(["verify-partitions", "--lmax", lmax]) == ExitCode.USAGE


def test_bad_configs_exit_with_usage(tmp_path):
    assert run(["converge", "--config", write_conf(tmp_path, "a.conf", sweep__d="")]) == ExitCode.USAGE
    weights = write_conf(tmp_path, "b.conf", grid__times="0.5,1.0", grid__weights="1")
    assert run(["simulate", "--config", weights]) == ExitCode.USAGE
    assert run(["simulate", "--config", str(tmp_path / "missing.yaml")]) == ExitCode.USAGE
    assert run(["simulate", "--seed", "-1"]) == ExitCode.USAGE


def test_simulate_single_raw_path(tmp_path, capsys):
    conf = write_conf(tmp_path, "one.conf", walk__d=10, run__paths=1, output__raw="true", grid__times="0.5,1.0")
    assert run(["simulate", "--config", conf]) == ExitCode.PASS
    lines = data_lines(capsys.readouterr().out)
    assert lines[0] == "path,t=0.0,t=0.5,t=1.0"
    assert len(lines) == 2


def test_simulate_summary_has_ou_reference(tmp_path):
    conf = write_conf(tmp_path, "ou.conf", process="ou", run__paths=500, grid__times="1.0", output__format="json")
    out = tmp_path / "ou.json"
    assert run(["simulate", "--config", conf, "--out", str(out)]) == ExitCode.PASS
    doc = json.loads(out.read_text())
    assert doc["meta"]["command"] == "simulate"
    assert doc["process"] == "ou"
    assert [row["t"] for row in doc["summary"]] == [0.0, 1.0]


def test_outputs_are_identical_across_threads(tmp_path, monkeypatch):
    conf = write_conf(tmp_path, "sim.conf", walk__d=40, run__paths=3000, grid__times="0.5,1.0")
    outs = []
    for i, threads in enumerate(["1", "4"]):
        path = tmp_path / f"out{i}.csv"
        assert run(["simulate", "--config", conf, "--threads", threads, "--seed", "77", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    monkeypatch.setenv(THREADS_ENV, "3")
    env_out = tmp_path / "env.csv"
    assert run(["simulate", "--config", conf, "--seed", "77", "--out", str(env_out)]) == 0
    assert outs[0] == outs[1] == env_out.read_bytes()

    other = tmp_path / "other.csv"
    assert run(["simulate", "--config", conf, "--seed", "78", "--out", str(other)]) == 0
    assert other.read_bytes() != outs[0]


def test_output_location_is_not_in_the_header(tmp_path):
    conf = write_conf(tmp_path, "sim.conf", walk__d=10, run__paths=200)
    first, second = tmp_path / "a" / "run.csv", tmp_path / "b" / "other.csv"
    for path in (first, second):
        assert run(["simulate", "--config", conf, "--seed", "5", "--out", str(path)]) == ExitCode.PASS
    assert first.read_bytes() == second.read_bytes()
    assert "output.path" not in first.read_text()


def test_unwritable_output_exits_with_io(tmp_path):
    conf = write_conf(tmp_path, "sim.conf", walk__d=10, run__paths=200)
    assert run(["simulate", "--config", conf, "--out", str(tmp_path)]) == ExitCode.IO


def counterexample_conf(tmp_path):
    return write_conf(tmp_path, "basis.conf", walk__d=100, direction__kind="basis", direction__index=1,
                      grid__times="1.0", sweep__d="10,100", run__paths=2000, fdd__draws=4)


def test_counterexample_confirmed(tmp_path):
    out = tmp_path / "cx.json"
    code = run(["converge", "--config", counterexample_conf(tmp_path), "--expect-fail", "--format", "json",
                "--out", str(out)])
    assert code == ExitCode.COUNTEREXAMPLE
    doc = json.loads(out.read_text())
    assert doc["status"] == "fail"
    assert doc["counterexample"] is True
    assert doc["checks"]["fdd"] is False


def test_counterexample_without_expect_fail_is_a_failure(tmp_path):
    assert run(["converge", "--config", counterexample_conf(tmp_path)]) == ExitCode.FAIL


def test_fdd_test_for_ou(tmp_path):
    conf = write_conf(tmp_path, "fdd.conf", process="ou", run__paths=20000, grid__times="0.5,1.0", fdd__draws=4)
    out = tmp_path / "fdd.csv"
    assert run(["fdd-test", "--config", conf, "--out", str(out)]) == ExitCode.PASS
    rows = list(csv.DictReader(data_lines(out.read_text())))
    assert len(rows) == 4
    assert all(float(r["ks"]) < 0.05 for r in rows)


def test_verify_moments_small_run(tmp_path):
    conf = write_conf(tmp_path, "vm.conf", walk__d=10, run__paths=4000, run__lmax=2, sweep__d="10,100",
                      grid__times="0.5,1.0")
    out = tmp_path / "vm.csv"
    assert run(["verify-moments", "--config", conf, "--out", str(out)]) == ExitCode.PASS
    suites = {r["suite"] for r in csv.DictReader(data_lines(out.read_text()))}
    assert {"chain", "psi_chain", "representation", "monte_carlo", "moment_bound"} <= suites


def test_verify_moments_rejects_diffusions(tmp_path):
    conf = write_conf(tmp_path, "vm.conf", process="ou")
    assert run(["verify-moments", "--config", conf]) == ExitCode.USAGE


def test_tightness_probe(tmp_path):
    conf = write_conf(tmp_path, "tp.conf", walk__d=100, run__paths=4000, tightness__times="0.0,0.2,0.4",
                      tightness__eps="0.3")
    out = tmp_path / "tp.json"
    assert run(["tightness-probe", "--config", conf, "--format", "json", "--out", str(out)]) == ExitCode.PASS
    doc = json.loads(out.read_text())
    assert doc["monotone"] and doc["bound_holds"]
    assert [r["label"] for r in doc["rows"][:2]] == ["full", "half"]


@pytest.mark.slow
@pytest.mark.parametrize("u", ["0.0", "1.0"])
def test_flat_direction_converges(tmp_path, u):
    conf = write_conf(tmp_path, "flat.conf", walk__d=1000, direction__u=u, grid__times="0.5,1.0",
                      sweep__d="10,100,1000", run__paths=10000, fdd__draws=4)
    out = tmp_path / "flat.json"
    assert run(["converge", "--config", conf, "--format", "json", "--out", str(out)]) == ExitCode.PASS
    doc = json.loads(out.read_text())
    assert doc["status"] == "pass" and doc["counterexample"] is False
    assert all(doc["checks"].values())
