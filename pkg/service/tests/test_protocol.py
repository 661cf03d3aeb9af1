from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from tokevo_service.app import create_app
from tokevo_service.config import ServiceConfig


@pytest.fixture(scope="module")
def config(tmp_path_factory):
    return ServiceConfig(
        backend="synthetic",
        max_batch=8,
        max_content_len=20,
        artifact_dir=tmp_path_factory.mktemp("artifacts"),
    )


@pytest.fixture(scope="module")
def client(config):
    with TestClient(create_app(config)) as test_client:
        yield test_client


def score_body(batch, **overrides):
    body = {
        "prompt": "a red fox standing in fresh snow",
        "generation_seed": 7,
        "steps": 1,
        "guidance_scale": 0.0,
        "width": 512,
        "height": 512,
        "return_images": False,
        "batch": [{"token_ids": ids} for ids in batch],
    }
    body.update(overrides)
    return body


class TestMeta:
    def test_unready_service_returns_503(self, config):
        app = create_app(config)
        unstarted = TestClient(app)  # no lifespan, backend never loads
        assert unstarted.get("/v1/meta").status_code == 503

    def test_meta_consistent_with_loaded_tokenizer(self, client):
        meta = client.get("/v1/meta").json()
        backend = client.app.state.backend
        assert meta["vocab_size"] == 3 + len(backend.words)
        assert meta["vocab_size"] == backend.vocab_size
        assert (meta["pad_id"], meta["bos_id"], meta["eos_id"]) == (0, 1, 2)
        assert meta["max_content_len"] == 20
        assert meta["max_batch"] == 8
        assert set(meta["model_ids"]) == {"generator", "clip", "aesthetic"}

    def test_repeated_calls_identical(self, client):
        assert client.get("/v1/meta").json() == client.get("/v1/meta").json()


class TestTokenize:
    def test_empty_text_is_400(self, client):
        assert client.post("/v1/tokenize", json={"text": ""}).status_code == 400
        assert client.post("/v1/tokenize", json={"text": "   "}).status_code == 400

    def test_missing_field_is_400(self, client):
        assert client.post("/v1/tokenize", json={}).status_code == 400

    def test_ids_bounded_and_marker_free(self, client):
        meta = client.get("/v1/meta").json()
        ids = client.post(
            "/v1/tokenize", json={"text": "A red fox, standing in FRESH snow!"}
        ).json()["token_ids"]
        assert ids
        for i in ids:
            assert 0 <= i < meta["vocab_size"]
            assert i not in (meta["bos_id"], meta["eos_id"])

    def test_truncates_to_max_content_len(self, client):
        text = " ".join(["red"] * 50)
        ids = client.post("/v1/tokenize", json={"text": text}).json()["token_ids"]
        assert len(ids) == 20

    def test_unknown_words_dropped_idempotently(self, client):
        backend = client.app.state.backend
        ids = client.post(
            "/v1/tokenize", json={"text": "red qwertyzzz fox"}
        ).json()["token_ids"]
        assert len(ids) == 2
        assert client.post(
            "/v1/tokenize", json={"text": backend.detokenize(ids)}
        ).json()["token_ids"] == ids


class TestScore:
    def test_identical_bodies_identical_results(self, client):
        body = score_body([[3, 4, 5, 0, 0], [6, 7, 8, 9, 10]])
        first = client.post("/v1/score", json=body)
        second = client.post("/v1/score", json=body)
        assert first.status_code == 200
        assert first.json()["results"] == second.json()["results"]
        print(
            "[PASS] criterion 10 (service determinism): identical bodies -> "
            "identical score arrays"
        )

    def test_scores_within_declared_ranges(self, client):
        body = score_body([[3 + i, 20 + i, 40 + i] for i in range(8)])
        results = client.post("/v1/score", json=body).json()["results"]
        assert len(results) == 8
        for item in results:
            assert 1.0 <= item["aesthetic"] <= 10.0
            assert -1.0 <= item["clip_score"] <= 1.0
            assert item["image_ref"] is None

    def test_seed_changes_scores(self, client):
        a = client.post("/v1/score", json=score_body([[3, 4, 5]], generation_seed=1))
        b = client.post("/v1/score", json=score_body([[3, 4, 5]], generation_seed=2))
        assert a.json()["results"] != b.json()["results"]

    def test_prompt_overlap_raises_alignment(self, client):
        meta = client.get("/v1/meta").json()
        prompt = "a red fox standing in fresh snow"
        on_prompt = client.post(
            "/v1/tokenize", json={"text": prompt}
        ).json()["token_ids"]
        off_prompt = client.post(
            "/v1/tokenize", json={"text": "purple robot pizza harbor violin"}
        ).json()["token_ids"]
        results = client.post(
            "/v1/score", json=score_body([on_prompt, off_prompt], prompt=prompt)
        ).json()["results"]
        assert results[0]["clip_score"] > results[1]["clip_score"]

    def test_over_batch_is_413(self, client):
        body = score_body([[3, 4]] * 9)
        assert client.post("/v1/score", json=body).status_code == 413

    def test_empty_batch_is_400(self, client):
        assert client.post("/v1/score", json=score_body([])).status_code == 400

    def test_over_long_genotype_is_400(self, client):
        assert (
            client.post("/v1/score", json=score_body([[3] * 21])).status_code == 400
        )

    def test_out_of_range_id_is_400(self, client):
        meta = client.get("/v1/meta").json()
        body = score_body([[meta["vocab_size"]]])
        assert client.post("/v1/score", json=body).status_code == 400

    def test_sequence_marker_in_content_is_400(self, client):
        assert client.post("/v1/score", json=score_body([[1, 3]])).status_code == 400
        assert client.post("/v1/score", json=score_body([[3, 2]])).status_code == 400

    def test_padding_is_a_legal_gene(self, client):
        body = score_body([[0, 0, 0, 0]])
        response = client.post("/v1/score", json=body)
        assert response.status_code == 200

    def test_return_images_persists_content_addressed_file(self, client, config):
        body = score_body([[3, 4, 5]], return_images=True, width=64, height=64)
        first = client.post("/v1/score", json=body).json()["results"][0]
        assert first["image_ref"]
        path = Path(config.artifact_dir) / first["image_ref"]
        assert path.exists()
        again = client.post("/v1/score", json=body).json()["results"][0]
        assert again["image_ref"] == first["image_ref"]

    def test_statelessness_meta_unchanged_after_scoring(self, client):
        before = client.get("/v1/meta").json()
        client.post("/v1/score", json=score_body([[3, 4]]))
        assert client.get("/v1/meta").json() == before

    def test_inference_fault_yields_500_with_item_errors(self, config, monkeypatch):
        from tokevo_service.backends import ScoredItem

        with TestClient(create_app(config)) as faulty:
            backend = faulty.app.state.backend
            real = backend.score_batch

            def flaky(request, artifact_dir):
                items = real(request, artifact_dir)
                items[-1] = ScoredItem(error="simulated inference fault")
                return items

            monkeypatch.setattr(backend, "score_batch", flaky)
            response = faulty.post("/v1/score", json=score_body([[3, 4], [5, 6]]))
            assert response.status_code == 500
            results = response.json()["results"]
            assert "aesthetic" in results[0]
            assert results[1] == {"error": "simulated inference fault"}
