"""Command-line behavior: output lines, file emission, exit codes."""

import json

import pytest

import mpxlab.semantics as semantics
from mpxlab.cli import main
from mpxlab.semantics import ParallelismVerdict, Reason


def write_spec(tmp_path, name="spec.json", **overrides):
    spec = {
        "kind": "stencil-2d-9pt",
        "process_grid": [2, 2],
        "thread_grid": [3, 3],
    }
    spec.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(spec))
    return path


class TestAnalyze:
    def test_reference_lines_3d(self, tmp_path, capsys):
        spec = write_spec(tmp_path, kind="stencil-3d-27pt",
                          process_grid=[2, 2, 2], thread_grid=[4, 4, 4],
                          channel_pool=160)
        assert main(["analyze", "--spec", str(spec)]) == 0
        out = capsys.readouterr().out
        assert "communicators_ideal: 808" in out
        assert "endpoints: 56" in out
        assert "min_channels: 56" in out

    def test_reference_lines_2d(self, tmp_path, capsys):
        spec = write_spec(tmp_path, kind="stencil-2d-5pt")
        assert main(["analyze", "--spec", str(spec)]) == 0
        assert "communicators_ideal: 12" in capsys.readouterr().out

    def test_degenerate_3d_grid_is_a_domain_error(self, tmp_path):
        spec = write_spec(tmp_path, kind="stencil-3d-27pt",
                          process_grid=[2, 2, 2], thread_grid=[1, 4, 4])
        assert main(["analyze", "--spec", str(spec)]) == 3

    def test_malformed_spec(self, tmp_path):
        spec = write_spec(tmp_path, bogus=1)
        assert main(["analyze", "--spec", str(spec)]) == 2
        broken = tmp_path / "broken.json"
        broken.write_text("{nope")
        assert main(["analyze", "--spec", str(broken)]) == 2


class TestSimulate:
    def test_writes_reports_and_is_deterministic(self, tmp_path, capsys):
        spec = write_spec(tmp_path, mechanism="endpoints")
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--spec", str(spec), "--out", str(out1)]) == 0
        assert main(["simulate", "--spec", str(spec), "--out", str(out2)]) == 0
        j1 = (out1 / "spec.report.json").read_bytes()
        j2 = (out2 / "spec.report.json").read_bytes()
        assert j1 == j2
        csv_text = (out1 / "spec.report.csv").read_text()
        assert csv_text.splitlines()[1].startswith("endpoints,")

    def test_unsupported_combination_exit_code(self, tmp_path):
        spec = write_spec(tmp_path, kind="legion-polling", process_grid=[2],
                          thread_grid=[5], mechanism="partitioned")
        assert main(["simulate", "--spec", str(spec),
                     "--out", str(tmp_path)]) == 4

    def test_env_var_output_dir(self, tmp_path, monkeypatch):
        spec = write_spec(tmp_path, mechanism="endpoints")
        monkeypatch.setenv("MPXLAB_OUT", str(tmp_path / "envout"))
        assert main(["simulate", "--spec", str(spec)]) == 0
        assert (tmp_path / "envout" / "spec.report.json").exists()

    def test_mechanism_override(self, tmp_path):
        spec = write_spec(tmp_path)
        assert main(["simulate", "--spec", str(spec), "--out", str(tmp_path),
                     "--mechanism", "partitioned"]) == 0
        report = json.loads((tmp_path / "spec.report.json").read_text())
        assert report["mechanism"] == "partitioned"

    def test_parallel_jobs_keep_outputs_isolated(self, tmp_path):
        a = write_spec(tmp_path, "a.json", mechanism="endpoints")
        b = write_spec(tmp_path, "b.json", mechanism="partitioned")
        out = tmp_path / "par"
        assert main(["simulate", "--spec", str(a), str(b), "--jobs", "2",
                     "--out", str(out)]) == 0
        ra = json.loads((out / "a.report.json").read_text())
        rb = json.loads((out / "b.report.json").read_text())
        assert ra["mechanism"] == "endpoints"
        assert rb["mechanism"] == "partitioned"


class TestAssign:
    def test_corner_thread_reuses_one_communicator(self, tmp_path, capsys):
        spec = write_spec(tmp_path)
        assert main(["assign", "--spec", str(spec)]) == 0
        out = capsys.readouterr().out
        rows = [line.split("\t") for line in out.splitlines()
                if line and line[0].isdigit()]
        corner = [r for r in rows if r[0] == "0"
                  and r[1] in ("e", "n", "ne")]
        assert len(corner) == 6  # send + recv for each corner-partner direction
        assert len({r[3].split()[0] for r in corner}) == 1

    def test_partitioned_bindings_show_partition_indexes(self, tmp_path, capsys):
        spec = write_spec(tmp_path, kind="stencil-2d-5pt",
                          mechanism="partitioned")
        assert main(["assign", "--spec", str(spec)]) == 0
        out = capsys.readouterr().out
        north_rows = [line for line in out.splitlines()
                      if line.startswith("1\tn\tsend")]
        assert north_rows and "part:1" in north_rows[0]

    def test_endpoint_targets_printed(self, tmp_path, capsys):
        spec = write_spec(tmp_path, mechanism="endpoints")
        assert main(["assign", "--spec", str(spec)]) == 0
        assert "ep:" in capsys.readouterr().out

    def test_emit_spec_round_trips(self, tmp_path, capsys):
        spec = write_spec(tmp_path, mechanism="endpoints", seed=9)
        assert main(["assign", "--spec", str(spec), "--emit-spec"]) == 0
        emitted = json.loads(capsys.readouterr().out)
        path2 = tmp_path / "again.json"
        path2.write_text(json.dumps(emitted))
        assert main(["assign", "--spec", str(path2), "--emit-spec"]) == 0
        assert json.loads(capsys.readouterr().out) == emitted


class TestOracleCheck:
    def test_pass(self, capsys):
        assert main(["oracle-check", "--bound", "6"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_bound_too_large(self):
        assert main(["oracle-check", "--bound", "13"]) == 3

    def test_injected_classifier_bug_is_caught(self, capsys, monkeypatch):
        real = semantics.logically_parallel

        def flipped(a, b, hints):
            verdict = real(a, b, hints)
            if verdict.reason is Reason.DIFFERENT_COMMUNICATORS:
                return ParallelismVerdict(False, Reason.WILDCARD_RISK)
            return verdict

        monkeypatch.setattr(semantics, "logically_parallel", flipped)
        assert main(["oracle-check", "--bound", "12"]) == 1
        assert "counterexample" in capsys.readouterr().out
