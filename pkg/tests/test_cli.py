import csv
import io
import json
import subprocess
import sys

import pytest

from gequeue import cli
from gequeue.config import DEFAULTS, SCHEMA_VERSION, ConfigError, load_config

SIM = ["--blocks", "20000", "--warmup", "1000", "--batches", "20"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    lines = path.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    body = list(csv.DictReader(io.StringIO("\n".join(l for l in lines if not l.startswith("#")))))
    return header, body


class TestAnalyze:
    def test_default_report(self, capsys):
        code, out, _ = run(capsys, "analyze", "--q-max", "3")
        assert code == cli.EXIT_OK
        doc = json.loads(out)
        assert doc["schema_version"] == SCHEMA_VERSION and doc["command"] == "analyze"
        res = doc["result"]
        assert [t["tau"] for t in res["tail"]] == [5, 10, 15, 20, 25]
        assert res["tail"][0]["probability"] == pytest.approx(0.25363, rel=5e-4)
        assert len(res["levels"]) == 4
        assert res["spectral_radius"] == pytest.approx(0.78706344, abs=1e-8)
        assert res["rates"]["arrival_bits_per_sec"] == pytest.approx(10_563, abs=50)
        assert not res["empty_queue_certain"]

    def test_rerun_from_report(self, capsys, tmp_path):
        out = tmp_path / "a.json"
        assert run(capsys, "analyze", "--info-bits", "90", "--out", str(out))[0] == 0
        code, text, _ = run(capsys, "analyze", "--config", str(out))
        assert code == 0
        again = json.loads(text)
        first = json.loads(out.read_text())
        assert again == first

    def test_float_round_trip(self, capsys, tmp_path):
        out = tmp_path / "a.json"
        run(capsys, "analyze", "--rho", repr(1 / 195), "--out", str(out))
        assert json.loads(out.read_text())["config"]["traffic"]["rho"] == 1 / 195

    def test_yaml_config(self, capsys, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("code:\n  info_bits: 80\nanalysis:\n  tau_list: [1]\n")
        code, out, _ = run(capsys, "analyze", "--config", str(path))
        doc = json.loads(out)
        assert code == 0 and doc["config"]["code"]["info_bits"] == 80
        assert [t["tau"] for t in doc["result"]["tail"]] == [1]

    def test_no_arrivals(self, capsys):
        code, out, _ = run(capsys, "analyze", "--gamma", "0")
        res = json.loads(out)["result"]
        assert code == 0 and res["empty_queue_certain"]
        assert res["decay_rate"] == "-inf"
        assert all(t["probability"] == 0.0 for t in res["tail"])

    def test_unstable_exit(self, capsys):
        code, out, err = run(capsys, "analyze", "--info-bits", "114")
        assert code == cli.EXIT_UNSTABLE and out == ""
        rec = json.loads(err)["error"]
        assert rec["type"] == "unstable" and rec["stability_margin"] < 0

    def test_singular_exit(self, capsys):
        code, _, err = run(capsys, "analyze", "--alpha", "0.8", "--beta", "0.2", "--info-bits", "90", "--boundary", "closed_form")
        rec = json.loads(err)["error"]
        assert code == cli.EXIT_SINGULAR
        assert rec["matrix"] == "A2" and "alpha+beta=1" in rec["parameter"]

    def test_nonconvergence_exit(self, capsys):
        code, _, err = run(capsys, "analyze", "--max-iter", "2")
        assert code == cli.EXIT_NONCONVERGENCE
        assert json.loads(err)["error"]["iterations"] == 2


class TestConfigErrors:
    def test_unknown_key(self, capsys, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"channel": {"alpah": 0.1}}))
        code, _, err = run(capsys, "analyze", "--config", str(path))
        assert code == cli.EXIT_CONFIG
        assert "channel.alpah" in json.loads(err)["error"]["message"]

    @pytest.mark.parametrize("argv", [["--alpha", "2"], ["--eps-b", "0.1", "--eps-g", "0.2"], ["--k-max", "200"], ["--tol", "0"]])
    def test_invalid_values(self, capsys, argv):
        assert run(capsys, "analyze", *argv)[0] == cli.EXIT_CONFIG

    def test_missing_config_file(self, capsys, tmp_path):
        assert run(capsys, "analyze", "--config", str(tmp_path / "nope.json"))[0] == cli.EXIT_CONFIG

    def test_unwritable_output(self, capsys, tmp_path):
        code, _, err = run(capsys, "analyze", "--out", str(tmp_path / "missing" / "x.json"))
        assert code == cli.EXIT_IO
        assert json.loads(err)["error"]["type"] == "io_error"

    def test_load_config_layers(self):
        cfg = load_config(overrides={"code": {"info_bits": 70}})
        assert cfg["code"]["info_bits"] == 70
        assert cfg["channel"] == DEFAULTS["channel"]
        with pytest.raises(ConfigError):
            load_config(overrides={"nope": 1})


class TestSweep:
    def test_code_rate_csv_and_rerun(self, capsys, tmp_path):
        out = tmp_path / "s.csv"
        code, summary, _ = run(capsys, "sweep", "--k-min", "80", "--k-max", "86", "--out", str(out))
        assert code == 0
        assert json.loads(summary)["result"]["argmin_tail"] == {str(t): 83 for t in (5, 10, 15, 20, 25)}
        header, rows = read_csv(out)
        assert header[0] == f"# schema_version: {SCHEMA_VERSION}"
        assert [int(r["K"]) for r in rows] == list(range(80, 87))
        assert {"tail_5", "decay_rate", "throughput", "stable"} <= set(rows[0])
        assert rows[3]["stable"] == "true"

        again = tmp_path / "t.csv"
        assert run(capsys, "sweep", "--config", str(out), "--out", str(again))[0] == 0
        assert again.read_text() == out.read_text()

    def test_stdout_csv(self, capsys):
        code, out, _ = run(capsys, "sweep", "--kind", "throughput", "--k-min", "85", "--k-max", "89")
        assert code == 0 and out.startswith("# schema_version")
        rows = list(csv.DictReader(l for l in out.splitlines() if not l.startswith("#")))
        assert max(rows, key=lambda r: float(r["throughput"]))["K"] == "87"

    def test_decay_surface(self, capsys, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("sweep:\n  kind: decay-surface\n  k_min: 80\n  k_max: 86\n  arrival_bits: [47.5, 48.75]\n")
        code, summary, _ = run(capsys, "sweep", "--config", str(cfg), "--out", str(tmp_path / "d.csv"))
        assert code == 0
        assert json.loads(summary)["result"]["best_K_by_arrival"] == {"47.5": 83, "48.75": 83}

    def test_memory(self, capsys, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("sweep:\n  kind: memory\n  k_min: 78\n  k_max: 90\n  memories: [0.975]\n")
        out = tmp_path / "m.csv"
        assert run(capsys, "sweep", "--config", str(cfg), "--out", str(out))[0] == 0
        _, rows = read_csv(out)
        assert rows[0]["best_K_tail"] == "83"


class TestSimulateCompare:
    def test_simulate_deterministic(self, capsys, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run(capsys, "simulate", *SIM, "--seed", "4", "--out", str(a))[0] == 0
        assert run(capsys, "simulate", *SIM, "--seed", "4", "--out", str(b))[0] == 0
        assert a.read_text() == b.read_text()
        res = json.loads(a.read_text())["result"]
        assert res["seed"] == 4 and res["blocks_recorded"] == 19_000

    def test_matrix_sampling_over_cap(self, capsys):
        assert run(capsys, "simulate", *SIM, "--fidelity", "matrix_sampling")[0] == cli.EXIT_CONFIG

    def test_compare_no_arrivals_agrees_exactly(self, capsys):
        code, out, _ = run(capsys, "compare", *SIM, "--gamma", "0")
        res = json.loads(out)["result"]
        assert code == cli.EXIT_OK and res["agree"]
        assert all(r["analytical"] == r["empirical"] == 0.0 and r["z"] == 0.0 for r in res["comparison"])

    def test_compare_with_report(self, capsys, tmp_path):
        sim = tmp_path / "sim.json"
        run(capsys, "simulate", *SIM, "--out", str(sim))
        code, out, _ = run(capsys, "compare", "--sim-report", str(sim))
        res = json.loads(out)["result"]
        assert code in (cli.EXIT_OK, cli.EXIT_DISAGREE)
        assert res["agree"] == (code == cli.EXIT_OK)
        assert [r["tau"] for r in res["comparison"]] == [5, 10, 15, 20, 25]

    def test_compare_mismatched_report(self, capsys, tmp_path):
        sim = tmp_path / "sim.json"
        run(capsys, "simulate", *SIM, "--info-bits", "80", "--out", str(sim))
        code, _, err = run(capsys, "compare", "--sim-report", str(sim))
        rec = json.loads(err)["error"]
        assert code == cli.EXIT_CONFIG and rec["type"] == "config_mismatch"
        assert rec["differences"]["code"]["report"]["info_bits"] == 80

    def test_compare_rejects_foreign_report(self, capsys, tmp_path):
        other = tmp_path / "a.json"
        run(capsys, "analyze", "--out", str(other))
        assert run(capsys, "compare", "--sim-report", str(other))[0] == cli.EXIT_CONFIG
        assert run(capsys, "compare", "--sim-report", str(tmp_path / "none.json"))[0] == cli.EXIT_IO


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "gequeue", "analyze", "--tau-list", "5", "--q-max", "0"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["tail"][0]["tau"] == 5
