import json

import yaml

from tokevo.cli import ENDPOINT_ENV, _resolve_endpoint, main


class TestSamplePrompts:
    def test_default_dataset_three_per_category(self, capsys):
        assert main(["sample-prompts", "--per-category", "3", "--seed", "1"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 36

    def test_writes_csv(self, tmp_path):
        out = tmp_path / "sampled.csv"
        assert main(["sample-prompts", "--per-category", "2", "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 1 + 24

    def test_oversampling_is_config_error(self):
        assert main(["sample-prompts", "--per-category", "10"]) == 2


class TestOptimize:
    def test_tiny_oracle_run(self, tmp_path, capsys):
        code = main(
            [
                "optimize",
                "--text",
                "a tiny red boat on a calm sea",
                "--method",
                "ga_mutated",
                "--population-size",
                "8",
                "--generations",
                "3",
                "--seed",
                "5",
                "--out",
                str(tmp_path / "opt"),
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "best" in out and "fitness" in out
        units = list((tmp_path / "opt" / "units").glob("*.jsonl"))
        assert len(units) == 1
        rows = [json.loads(line) for line in units[0].read_text().splitlines()]
        assert len(rows) == 8 + 3 * 7

    def test_rerun_skips(self, tmp_path, capsys):
        args = [
            "optimize",
            "--text",
            "same prompt",
            "--population-size",
            "4",
            "--generations",
            "1",
            "--out",
            str(tmp_path / "opt"),
        ]
        assert main(args) == 0
        capsys.readouterr()
        assert main(args) == 0
        assert "skipped" in capsys.readouterr().out

    def test_needs_text_or_dataset(self):
        assert main(["optimize", "--method", "ga_mutated"]) == 2

    def test_unknown_prompt_id(self, tmp_path):
        from tokevo.harness import demo_prompts, save_prompts_csv

        path = tmp_path / "prompts.csv"
        save_prompts_csv(demo_prompts()[:2], path)
        code = main(
            ["optimize", "--dataset", str(path), "--prompt-id", "nope", "--out", str(tmp_path / "o")]
        )
        assert code == 2

    def test_remote_run_resolves_vocab_and_tokens_from_service(self, tmp_path):
        from stub_service import StubScoringService

        with StubScoringService() as stub:
            stub.tokenize_map["stub prompt"] = [7, 8, 9]
            code = main(
                [
                    "optimize",
                    "--text",
                    "stub prompt",
                    "--evaluator",
                    "remote",
                    "--endpoint",
                    stub.endpoint,
                    "--population-size",
                    "4",
                    "--generations",
                    "1",
                    "--out",
                    str(tmp_path / "remote"),
                ]
            )
            assert code == 0
            # vocabulary came from /v1/meta (content_len 20), tokens from /v1/tokenize
            units = list((tmp_path / "remote" / "units").glob("*.jsonl"))
            rows = [json.loads(line) for line in units[0].read_text().splitlines()]
            assert len(rows) == 4 + 3
            assert all(len(r["token_ids"]) == 20 for r in rows)
            posted = [body for m, p, body in stub.requests if p == "/v1/tokenize"]
            assert posted == [{"text": "stub prompt"}]


class TestExperimentPipeline:
    def write_config(self, tmp_path, **overrides):
        config = {
            "output_dir": str(tmp_path / "runs"),
            "methods": ["baseline_no_opt", "ga_mutated", "random_search"],
            "prompts": ["p001", "p002"],
            "seeds": [0],
            "eval_budget": 16,
            "evaluator": "oracle",
            "ga": {"population_size": 8, "generations": 2},
        }
        config.update(overrides)
        path = tmp_path / "experiment.yaml"
        path.write_text(yaml.safe_dump(config), encoding="utf-8")
        return path

    def test_full_pipeline(self, tmp_path, capsys):
        config = self.write_config(tmp_path)
        assert main(["experiment", "--config", str(config)]) == 0
        out = capsys.readouterr().out
        assert "6/6 units complete" in out

        summary_csv = tmp_path / "summary.csv"
        assert (
            main(
                [
                    "aggregate",
                    "--runs",
                    str(tmp_path / "runs"),
                    "--out",
                    str(summary_csv),
                ]
            )
            == 0
        )
        out = capsys.readouterr().out
        assert summary_csv.exists()
        assert "baseline_no_opt" in out

        assert main(["report", "--summary", str(summary_csv)]) == 0
        text = capsys.readouterr().out
        assert "wins" in text.splitlines()[0]
        assert main(["report", "--summary", str(summary_csv), "--format", "csv"]) == 0
        csv_out = capsys.readouterr().out
        assert csv_out.splitlines()[0] == "method,metric,avg,std,max,delta_pct,wins"

    def test_aggregate_with_external_scores(self, tmp_path, capsys):
        config = self.write_config(tmp_path, methods=["baseline_no_opt"])
        assert main(["experiment", "--config", str(config)]) == 0
        external = tmp_path / "promptist.csv"
        external.write_text(
            "prompt_id,aesthetic,clip\np001,9.0,0.8\np002,8.5,0.7\n", encoding="utf-8"
        )
        code = main(
            [
                "aggregate",
                "--runs",
                str(tmp_path / "runs"),
                "--external",
                f"promptist={external}",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "promptist" in out

    def test_bad_method_is_config_error(self, tmp_path):
        config = self.write_config(tmp_path, methods=["simulated_annealing"])
        assert main(["experiment", "--config", str(config)]) == 2

    def test_unknown_prompt_filter_is_config_error(self, tmp_path):
        config = self.write_config(tmp_path, prompts=["zzz"])
        assert main(["experiment", "--config", str(config)]) == 2

    def test_missing_summary_is_config_error(self, tmp_path):
        assert main(["report", "--summary", str(tmp_path / "nope.csv")]) == 2

    def test_aggregate_empty_dir_is_config_error(self, tmp_path):
        (tmp_path / "units").mkdir(parents=True)
        assert main(["aggregate", "--runs", str(tmp_path)]) == 2


class TestEndpointResolution:
    def test_flag_beats_env_beats_config(self, monkeypatch):
        monkeypatch.setenv(ENDPOINT_ENV, "http://env:1")
        assert _resolve_endpoint("http://flag:1", "http://cfg:1") == "http://flag:1"
        assert _resolve_endpoint(None, "http://cfg:1") == "http://env:1"
        monkeypatch.delenv(ENDPOINT_ENV)
        assert _resolve_endpoint(None, "http://cfg:1") == "http://cfg:1"
        assert _resolve_endpoint(None, None) is None
