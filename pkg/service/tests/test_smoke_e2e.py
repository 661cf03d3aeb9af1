"""End-to-end smoke: a live service instance driven by the optimizer CLI."""

import json
import subprocess
import sys
import threading
import time

import pytest
import requests
import uvicorn

from tokevo_service.app import create_app
from tokevo_service.config import ServiceConfig

JSONL_KEYS = ["eval_index", "genotype_digest", "token_ids", "aesthetic", "clip", "fitness"]


@pytest.fixture(scope="module")
def live_endpoint(tmp_path_factory):
    config = ServiceConfig(
        backend="synthetic",
        max_batch=64,
        artifact_dir=tmp_path_factory.mktemp("artifacts"),
    )
    server = uvicorn.Server(
        uvicorn.Config(create_app(config), host="127.0.0.1", port=0, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("service did not start")
        time.sleep(0.05)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


def test_live_meta_and_tokenize(live_endpoint):
    meta = requests.get(f"{live_endpoint}/v1/meta", timeout=10).json()
    assert meta["max_content_len"] == 75
    ids = requests.post(
        f"{live_endpoint}/v1/tokenize",
        json={"text": "a red fox standing in fresh snow"},
        timeout=10,
    ).json()["token_ids"]
    assert ids and all(0 <= i < meta["vocab_size"] for i in ids)


def test_ga_run_against_live_service(live_endpoint, tmp_path):
    out_dir = tmp_path / "smoke"
    proc = subprocess.run(
        [
            sys.executable,
            "-m",
            "tokevo",
            "optimize",
            "--text",
            "a red fox standing in fresh snow",
            "--method",
            "ga_mutated",
            "--evaluator",
            "remote",
            "--endpoint",
            live_endpoint,
            "--population-size",
            "8",
            "--generations",
            "3",
            "--seed",
            "5",
            "--out",
            str(out_dir),
        ],
        capture_output=True,
        text=True,
        timeout=180,
    )
    assert proc.returncode == 0, proc.stderr

    logs = list((out_dir / "units").glob("*.jsonl"))
    assert len(logs) == 1
    rows = [json.loads(line) for line in logs[0].read_text().splitlines()]
    assert len(rows) == 8 + 3 * 7
    meta = requests.get(f"{live_endpoint}/v1/meta", timeout=10).json()
    best_so_far = -1.0
    for i, row in enumerate(rows):
        assert list(row.keys()) == JSONL_KEYS
        assert row["eval_index"] == i
        assert len(row["token_ids"]) == meta["max_content_len"]
        assert all(0 <= t < meta["vocab_size"] for t in row["token_ids"])
        assert 0.0 <= row["fitness"] <= 1.0
        best_so_far = max(best_so_far, row["fitness"])

    summaries = list((out_dir / "units").glob("*.json"))
    assert len(summaries) == 1
    summary = json.loads(summaries[0].read_text())
    assert summary["status"] == "complete"
    assert summary["best"]["fitness"] == best_so_far
    print(
        "[PASS] criterion 10 (end-to-end smoke): live-service GA run completed "
        f"with {len(rows)} logged evaluations"
    )
