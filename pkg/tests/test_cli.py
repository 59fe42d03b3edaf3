"""End-to-end command-line checks through the installed console script."""

import csv
import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parents[1]
_SCRIPT = shutil.which("prefsteer")
CMD = [_SCRIPT] if _SCRIPT else [sys.executable, "-m", "prefsteer.cli"]


def run_cli(*args, env_extra=None):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [*CMD, *map(str, args)],
        capture_output=True,
        text=True,
        cwd=REPO,
        env=env,
        timeout=300,
    )


def stderr_error(result):
    payload = json.loads(result.stderr.strip().splitlines()[-1])
    return payload["error"]


class TestDecode:
    def test_writes_trace_text_and_manifest(self, configs_dir, fixtures_dir, tmp_path):
        trace = tmp_path / "trace.jsonl"
        text = tmp_path / "text.txt"
        manifest = tmp_path / "manifest.json"
        result = run_cli(
            "decode", "--config", configs_dir / "conflict_decode.yaml",
            "--trace", trace, "--text", text, "--manifest", manifest,
        )
        assert result.returncode == 0, result.stderr
        assert result.stdout == text.read_text()

        lines = trace.read_text().splitlines()
        assert len(lines) == 6  # five step records plus one summary line
        golden = json.loads((fixtures_dir / "conflict_golden.json").read_text())
        tokens = [json.loads(line)["token_id"] for line in lines[:-1]]
        assert tokens == golden["full"]["tokens"]
        summary = json.loads(lines[-1])
        assert summary["stop_reason"] == "max_tokens"
        assert summary["variant"] == "full"

        record = json.loads(manifest.read_text())
        assert set(record) == {"config", "seeds", "fixtures"}
        assert record["seeds"] == [0]
        for path, digest in record["fixtures"].items():
            assert Path(path).exists()
            assert len(digest) == 64

    def test_rerun_is_byte_identical(self, configs_dir, tmp_path):
        outs = []
        for name in ("one", "two"):
            trace = tmp_path / f"{name}.jsonl"
            result = run_cli(
                "decode", "--config", configs_dir / "conflict_decode.yaml",
                "--trace", trace, "--text", tmp_path / f"{name}.txt",
                "--manifest", tmp_path / f"{name}.json",
            )
            assert result.returncode == 0, result.stderr
            outs.append(trace.read_bytes())
        assert outs[0] == outs[1]

    def test_variant_flag_changes_generation(self, configs_dir, tmp_path):
        paths = {}
        for variant in ("full", "neither"):
            trace = tmp_path / f"{variant}.jsonl"
            result = run_cli(
                "decode", "--config", configs_dir / "conflict_decode.yaml",
                "--variant", variant, "--trace", trace,
                "--text", tmp_path / f"{variant}.txt",
                "--manifest", tmp_path / f"{variant}.json",
            )
            assert result.returncode == 0, result.stderr
            paths[variant] = trace.read_text().splitlines()
        full_tokens = [json.loads(l)["token_id"] for l in paths["full"][:-1]]
        plain_tokens = [json.loads(l)["token_id"] for l in paths["neither"][:-1]]
        assert full_tokens != plain_tokens

    def test_max_tokens_flag(self, configs_dir, tmp_path):
        trace = tmp_path / "short.jsonl"
        result = run_cli(
            "decode", "--config", configs_dir / "conflict_decode.yaml",
            "--max-tokens", 2, "--trace", trace, "--text", tmp_path / "t.txt",
            "--manifest", tmp_path / "m.json",
        )
        assert result.returncode == 0, result.stderr
        assert len(trace.read_text().splitlines()) == 3

    def test_query_flag_replaces_query_file(self, configs_dir, tmp_path):
        base = run_cli(
            "decode", "--config", configs_dir / "ngram_ablate.yaml",
            "--trace", tmp_path / "a.jsonl", "--text", tmp_path / "a.txt",
        )
        assert base.returncode == 0, base.stderr
        assert len(base.stdout.rstrip("\n").split("\n")) == 2  # one per query

        single = run_cli(
            "decode", "--config", configs_dir / "ngram_ablate.yaml",
            "--query", "c",
            "--trace", tmp_path / "b.jsonl", "--text", tmp_path / "b.txt",
        )
        assert single.returncode == 0, single.stderr
        assert len(single.stdout.rstrip("\n").split("\n")) == 1


class TestSweep:
    def test_writes_pareto_csv(self, configs_dir, tmp_path):
        out = tmp_path / "pareto.csv"
        result = run_cli(
            "sweep", "--config", configs_dir / "sweep.yaml",
            "--csv", out, "--manifest", tmp_path / "m.json",
        )
        assert result.returncode == 0, result.stderr
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["weight_favor_a", "weight_favor_b",
                           "score_favor_a", "score_favor_b"]
        assert len(rows) == 7  # default grid has six weight pairs
        score_a = [float(r[2]) for r in rows[1:]]
        score_b = [float(r[3]) for r in rows[1:]]
        # shifting weight from a to b trades one objective for the other
        assert all(x >= y for x, y in zip(score_a, score_a[1:]))
        assert all(x <= y for x, y in zip(score_b, score_b[1:]))
        assert score_a[0] > score_a[-1]
        assert score_b[-1] > score_b[0]

    def test_rerun_is_byte_identical(self, configs_dir, tmp_path):
        outs = []
        for name in ("one", "two"):
            out = tmp_path / f"{name}.csv"
            result = run_cli(
                "sweep", "--config", configs_dir / "sweep.yaml",
                "--csv", out, "--manifest", tmp_path / f"{name}.json",
            )
            assert result.returncode == 0, result.stderr
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_missing_scorers_is_config_error(self, configs_dir, tmp_path):
        result = run_cli(
            "sweep", "--config", configs_dir / "conflict_decode.yaml",
            "--csv", tmp_path / "x.csv", "--manifest", tmp_path / "m.json",
        )
        assert result.returncode == 2
        assert stderr_error(result)["code"] == "config"


class TestAblate:
    def test_writes_variant_table(self, configs_dir, tmp_path):
        out = tmp_path / "ablation.csv"
        result = run_cli(
            "ablate", "--config", configs_dir / "ngram_ablate.yaml", "--csv", out
        )
        assert result.returncode == 0, result.stderr
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["variant", "amr", "aps", "worst"]
        assert [r[0] for r in rows[1:]] == [
            "full", "no_weight_opt", "no_online_opt", "neither"
        ]
        for row in rows[1:]:
            for cell in row[1:]:
                assert 0.0 <= float(cell) <= 5.0


class TestDynamics:
    def test_writes_per_step_rows(self, configs_dir, tmp_path):
        out = tmp_path / "dynamics.csv"
        result = run_cli(
            "dynamics", "--config", configs_dir / "conflict_decode.yaml",
            "--csv", out, "--manifest", tmp_path / "m.json",
        )
        assert result.returncode == 0, result.stderr
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["step", "pref_id", "cumulative_reward", "weight"]
        assert len(rows) == 1 + 5 * 2  # five steps, two preferences
        assert [r[1] for r in rows[1:3]] == ["favor_a", "favor_b"]
        assert int(rows[1][0]) == 0  # steps are zero-indexed


class TestSelftest:
    def test_passes_on_shipped_fixtures(self, fixtures_dir):
        result = run_cli("selftest", "--fixtures", fixtures_dir)
        assert result.returncode == 0, result.stdout + result.stderr
        assert "0 failed" in result.stdout
        assert "ok   " in result.stdout

    def test_fails_without_fixtures(self, tmp_path):
        result = run_cli("selftest", "--fixtures", tmp_path / "missing")
        assert result.returncode == 4
        assert "FAIL" in result.stdout


class TestErrorReporting:
    def test_unknown_config_key_exits_2(self, configs_dir, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text(
            (configs_dir / "conflict_decode.yaml").read_text()
            + "\nmystery_knob: 3\n"
        )
        # copied config resolves fixtures relative to its own directory
        result = run_cli("decode", "--config", bad)
        assert result.returncode == 2
        err = stderr_error(result)
        assert err["code"] == "config"
        assert "mystery_knob" in err["message"]

    def test_missing_config_file_exits_2(self, tmp_path):
        result = run_cli("decode", "--config", tmp_path / "ghost.yaml")
        assert result.returncode == 2
        assert stderr_error(result)["code"] == "config"

    def test_exhausted_table_exits_3(self, configs_dir, tmp_path):
        # the table only covers prefixes the five-step decode can reach,
        # so asking for a sixth token is an unknown-context backend error
        result = run_cli(
            "decode", "--config", configs_dir / "conflict_decode.yaml",
            "--max-tokens", 6,
            "--trace", tmp_path / "t.jsonl", "--text", tmp_path / "t.txt",
            "--manifest", tmp_path / "m.json",
        )
        assert result.returncode == 3
        assert stderr_error(result)["code"] == "backend"

    def test_unreachable_endpoint_exits_3(self, fixtures_dir, tmp_path):
        cfg = tmp_path / "remote.yaml"
        cfg.write_text(
            "backend:\n"
            "  kind: remote\n"
            f"  vocab_path: {fixtures_dir / 'conflict_vocab.json'}\n"
            "  max_attempts: 1\n"
            "  timeout: 2\n"
            "preferences:\n"
            "  - id: p\n"
            "    description: Be brief.\n"
            "    weight: 1.0\n"
            "query: hi\n"
        )
        result = run_cli(
            "decode", "--config", cfg,
            env_extra={"PREFSTEER_ENDPOINT": "http://127.0.0.1:1/logprobs"},
        )
        assert result.returncode == 3
        assert stderr_error(result)["code"] == "backend"

    def test_missing_required_flag_exits_2(self):
        result = run_cli("decode")
        assert result.returncode == 2
