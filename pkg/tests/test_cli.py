"""CLI tests: subcommand behavior, exit codes, transcript replay."""

import json
import subprocess
import sys
import time
import urllib.request

import numpy as np
import pytest

from activerank.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    code = main(
        [
            "generate",
            "--out",
            str(out),
            "--seed",
            "9",
            "--clusters",
            "4",
            "--per-cluster",
            "8",
            "--dim",
            "16",
        ]
    )
    assert code == EXIT_OK
    return out


class TestGenerate:
    def test_deterministic_files(self, tmp_path):
        for sub in ("a", "b"):
            assert (
                main(
                    [
                        "generate",
                        "--out",
                        str(tmp_path / sub),
                        "--seed",
                        "3",
                        "--clusters",
                        "2",
                        "--per-cluster",
                        "4",
                        "--dim",
                        "8",
                    ]
                )
                == EXIT_OK
            )
        for name in ("features.f32", "ids.txt", "ground_truth.json", "manifest.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_default_sizes_emit_300_gallery(self, tmp_path):
        assert main(["generate", "--out", str(tmp_path)]) == EXIT_OK
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["n_samples"] - len(manifest["probes"]) == 300

    def test_unwritable_path_fails(self):
        assert main(["generate", "--out", "/proc/definitely/not/writable"]) != EXIT_OK


class TestRun:
    def test_oracle_mode_default_budget(self, dataset_dir, tmp_path):
        out = tmp_path / "transcript.json"
        code = main(
            [
                "run",
                "--manifest",
                str(dataset_dir / "manifest.json"),
                "--probe",
                "probe-00",
                "--out",
                str(out),
                "--k",
                "32",
                "--rounds",
                "4",
                "--q",
                "5",
            ]
        )
        assert code == EXIT_OK
        transcript = json.loads(out.read_text())
        label_count = sum(len(r["labels"] or {}) for r in transcript["rounds"])
        assert label_count == 20
        assert len(transcript["rounds"]) == 5
        assert len(transcript["final_ranking"]) == 32
        assert "ap_per_round" in transcript["metrics"]

    def test_zero_rounds_single_pass(self, dataset_dir, tmp_path):
        out = tmp_path / "t.json"
        code = main(
            [
                "run",
                "--manifest",
                str(dataset_dir / "manifest.json"),
                "--probe",
                "probe-01",
                "--out",
                str(out),
                "--k",
                "32",
                "--rounds",
                "0",
            ]
        )
        assert code == EXIT_OK
        transcript = json.loads(out.read_text())
        assert len(transcript["rounds"]) == 1
        assert transcript["rounds"][0]["labels"] is None

    def test_unknown_probe_is_data_error(self, dataset_dir, tmp_path):
        code = main(
            [
                "run",
                "--manifest",
                str(dataset_dir / "manifest.json"),
                "--probe",
                "ghost",
                "--out",
                str(tmp_path / "t.json"),
            ]
        )
        assert code == EXIT_DATA

    def test_replay_reproduces_scores(self, dataset_dir, tmp_path):
        first = tmp_path / "first.json"
        args = [
            "run",
            "--manifest",
            str(dataset_dir / "manifest.json"),
            "--probe",
            "probe-02",
            "--k",
            "32",
            "--rounds",
            "3",
            "--q",
            "4",
            "--seed",
            "11",
            "--unsure-rate",
            "0.2",
        ]
        assert main(args + ["--out", str(first)]) == EXIT_OK
        second = tmp_path / "second.json"
        assert (
            main(
                args
                + [
                    "--out",
                    str(second),
                    "--mode",
                    "replay",
                    "--labels-from",
                    str(first),
                ]
            )
            == EXIT_OK
        )
        a = json.loads(first.read_text())
        b = json.loads(second.read_text())
        for ra, rb in zip(a["rounds"], b["rounds"]):
            assert ra["scores"] == rb["scores"]
            assert ra["suggestions"] == rb["suggestions"]
        assert a["final_ranking"] == b["final_ranking"]

    def test_replay_without_source_is_usage_error(self, dataset_dir, tmp_path):
        code = main(
            [
                "run",
                "--manifest",
                str(dataset_dir / "manifest.json"),
                "--probe",
                "probe-00",
                "--out",
                str(tmp_path / "t.json"),
                "--mode",
                "replay",
            ]
        )
        assert code == EXIT_USAGE

    def test_interactive_mode_reads_stdin(self, dataset_dir, tmp_path):
        out = tmp_path / "interactive.json"
        answers = "\n".join(["r", "i", "u", "r", "i", "u"]) + "\n"
        proc = subprocess.run(
            [
                sys.executable,
                "-m",
                "activerank",
                "run",
                "--manifest",
                str(dataset_dir / "manifest.json"),
                "--probe",
                "probe-00",
                "--out",
                str(out),
                "--mode",
                "interactive",
                "--k",
                "32",
                "--rounds",
                "2",
                "--q",
                "3",
            ],
            input=answers,
            capture_output=True,
            text=True,
            timeout=120,
        )
        assert proc.returncode == EXIT_OK, proc.stderr
        transcript = json.loads(out.read_text())
        flat = [lab for r in transcript["rounds"] if r["labels"] for lab in r["labels"].values()]
        assert flat == ["relevant", "irrelevant", "unsure", "relevant", "irrelevant", "unsure"]


class TestExperiment:
    def test_two_strategies_report(self, dataset_dir, tmp_path):
        out = tmp_path / "report.json"
        code = main(
            [
                "experiment",
                "--manifest",
                str(dataset_dir / "manifest.json"),
                "--out",
                str(out),
                "--strategies",
                "active,random",
                "--seeds",
                "1,2",
                "--k",
                "32",
                "--rounds",
                "2",
                "--q",
                "3",
            ]
        )
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        assert {s["label"] for s in report["strategies"]} == {"active", "random"}
        assert len(report["summary"]["active"]["map_per_round"]) == 3
        csv_lines = (tmp_path / "report.csv").read_text().splitlines()
        assert csv_lines[0] == "strategy,probe,seed,round,map,elapsed_ms"

    def test_both_solvers_paired_columns(self, dataset_dir, tmp_path):
        out = tmp_path / "paired.json"
        code = main(
            [
                "experiment",
                "--manifest",
                str(dataset_dir / "manifest.json"),
                "--out",
                str(out),
                "--strategies",
                "active",
                "--solver",
                "both",
                "--seeds",
                "1",
                "--k",
                "24",
                "--rounds",
                "1",
            ]
        )
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        assert {s["label"] for s in report["strategies"]} == {"active", "active-qp"}

    def test_empty_strategy_list_usage_error(self, dataset_dir, tmp_path):
        code = main(
            [
                "experiment",
                "--manifest",
                str(dataset_dir / "manifest.json"),
                "--out",
                str(tmp_path / "r.json"),
                "--strategies",
                "",
            ]
        )
        assert code == EXIT_USAGE

    def test_missing_manifest_data_error(self, tmp_path):
        code = main(
            [
                "experiment",
                "--manifest",
                str(tmp_path / "nope.json"),
                "--out",
                str(tmp_path / "r.json"),
            ]
        )
        assert code == EXIT_DATA

    def test_partial_results_flushed_on_failure(self, dataset_dir, tmp_path):
        out = tmp_path / "partial.json"
        code = main(
            [
                "experiment",
                "--manifest",
                str(dataset_dir / "manifest.json"),
                "--out",
                str(out),
                "--strategies",
                "active",
                "--seeds",
                "1",
                "--probes",
                "probe-00,ghost",
                "--k",
                "24",
                "--rounds",
                "1",
            ]
        )
        assert code != EXIT_OK
        flushed = json.loads(out.read_text())
        assert flushed["partial"] is True
        assert len(flushed["results"]) == 1
        assert flushed["results"][0]["probe"] == "probe-00"


class TestServe:
    def test_ephemeral_port_and_health(self, dataset_dir):
        proc = subprocess.Popen(
            [
                sys.executable,
                "-m",
                "activerank",
                "serve",
                "--dataset",
                f"demo={dataset_dir / 'manifest.json'}",
                "--port",
                "0",
                "--k",
                "32",
            ],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        try:
            line = proc.stdout.readline().strip()
            assert line.startswith("listening on http://"), line
            base = line.split(" ", 2)[2]
            deadline = time.time() + 20
            status = None
            while time.time() < deadline:
                try:
                    with urllib.request.urlopen(f"{base}/healthz", timeout=2) as resp:
                        status = json.loads(resp.read())
                    break
                except Exception:
                    time.sleep(0.2)
            assert status == {"status": "ok"}
            with urllib.request.urlopen(f"{base}/datasets", timeout=5) as resp:
                listing = json.loads(resp.read())
            assert listing[0]["name"] == "demo"
        finally:
            proc.terminate()
            proc.wait(timeout=10)

    def test_missing_dataset_flag_usage_error(self):
        assert main(["serve", "--port", "0"]) == EXIT_USAGE

    def test_bad_manifest_data_error(self, tmp_path):
        assert (
            main(["serve", "--dataset", f"x={tmp_path/'absent.json'}", "--port", "0"])
            == EXIT_DATA
        )


class TestUsageErrors:
    def test_unknown_flag_exits_one(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["generate", "--bogus"])
        assert excinfo.value.code == EXIT_USAGE

    def test_invalid_param_value(self, dataset_dir, tmp_path):
        code = main(
            [
                "run",
                "--manifest",
                str(dataset_dir / "manifest.json"),
                "--probe",
                "probe-00",
                "--out",
                str(tmp_path / "t.json"),
                "--alpha",
                "7.0",
            ]
        )
        assert code == EXIT_USAGE
