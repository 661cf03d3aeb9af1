"""Deterministic model-free backend.

Stands in for the diffusion/scoring stack wherever real inference is
unavailable (CI, protocol tests, client development). Every token ID maps to
a fixed pseudo-random unit vector; a "generated image" is that bag of
vectors plus seed-keyed generation noise, so alignment genuinely rewards
genotypes whose tokens overlap the prompt and the whole thing is a pure
function of the request body.
"""

from __future__ import annotations

import hashlib
import re
from importlib import resources
from pathlib import Path

import numpy as np

from . import ScoredItem

EMBED_DIM = 16
WORD_RE = re.compile(r"[a-z0-9']+")

PAD, BOS, EOS = 0, 1, 2
SPECIAL_TOKENS = ("<pad>", "<start>", "<end>")


def _seed64(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "big")


def _unit(vector: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vector))
    return vector / norm if norm else vector


class SyntheticBackend:
    model_ids = {
        "generator": "synthetic-bag-of-tokens-v1",
        "clip": "synthetic-hash-embed-v1",
        "aesthetic": "synthetic-token-quality-v1",
    }

    def __init__(self, config) -> None:
        if config.vocab_path is not None:
            text = Path(config.vocab_path).read_text("utf-8")
        else:
            text = resources.files("tokevo_service.data").joinpath("words.txt").read_text("utf-8")
        self.words = [w for w in text.split() if w]
        if len(set(self.words)) != len(self.words):
            raise ValueError("vocabulary word list contains duplicates")
        self.word_to_id = {w: PAD + 3 + i for i, w in enumerate(self.words)}
        self.vocab_size = 3 + len(self.words)
        self.pad_id, self.bos_id, self.eos_id = PAD, BOS, EOS
        self.max_content_len = config.max_content_len
        self._embeddings = np.vstack(
            [self._token_embedding(i) for i in range(self.vocab_size)]
        )
        self._quality = np.array(
            [(_seed64(f"quality:{i}") % 10_000) / 10_000.0 for i in range(self.vocab_size)]
        )
        self._self_test()

    # -- tokenizer ----------------------------------------------------------

    def tokenize(self, text: str) -> list[int]:
        ids = [
            self.word_to_id[w]
            for w in WORD_RE.findall(text.lower())
            if w in self.word_to_id
        ]
        return ids[: self.max_content_len]

    def detokenize(self, token_ids) -> str:
        words = [
            self.words[i - 3]
            for i in token_ids
            if i not in (self.pad_id, self.bos_id, self.eos_id)
        ]
        return " ".join(words)

    def _self_test(self) -> None:
        # tokenize must be idempotent through detokenize, and meta-consistent
        for sample in ("a red fox standing in fresh snow", "harbor at dawn", ""):
            ids = self.tokenize(sample)
            assert all(0 <= i < self.vocab_size for i in ids)
            assert not any(i in (self.bos_id, self.eos_id) for i in ids)
            assert self.tokenize(self.detokenize(ids)) == ids

    # -- scoring --------------------------------------------------------------

    def _token_embedding(self, token_id: int) -> np.ndarray:
        rng = np.random.default_rng(_seed64(f"embed:{token_id}"))
        return _unit(rng.standard_normal(EMBED_DIM))

    def _text_embedding(self, text: str) -> np.ndarray:
        ids = self.tokenize(text)
        if not ids:
            rng = np.random.default_rng(_seed64(f"text:{text}"))
            return _unit(rng.standard_normal(EMBED_DIM))
        return _unit(self._embeddings[ids].mean(axis=0))

    def _image_embedding(self, content_ids, request) -> np.ndarray:
        label = (
            f"gen:{request.generation_seed}:{request.steps}:{request.guidance_scale}"
            f":{request.width}x{request.height}:" + ",".join(map(str, content_ids))
        )
        rng = np.random.default_rng(_seed64(label))
        noise = 0.05 * rng.standard_normal(EMBED_DIM)
        if not content_ids:
            rng_empty = np.random.default_rng(_seed64("empty-canvas"))
            return _unit(rng_empty.standard_normal(EMBED_DIM) + noise)
        return _unit(self._embeddings[content_ids].mean(axis=0) + noise)

    def _render_image(self, content_ids, request, artifact_dir: Path) -> str:
        from PIL import Image

        label = f"img:{request.generation_seed}:{request.width}x{request.height}:" + ",".join(
            map(str, content_ids)
        )
        digest = hashlib.sha256(label.encode("utf-8")).hexdigest()
        rel = Path("images") / f"{digest}.png"
        path = artifact_dir / rel
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            rng = np.random.default_rng(_seed64(label))
            pixels = rng.integers(0, 256, (request.height, request.width, 3), dtype=np.uint8)
            Image.fromarray(pixels, "RGB").save(path)
        return str(rel)

    def score_batch(self, request, artifact_dir: Path) -> list[ScoredItem]:
        text_embedding = self._text_embedding(request.prompt)
        items: list[ScoredItem] = []
        for genotype in request.batch:
            content = [i for i in genotype.token_ids if i != self.pad_id]
            image = self._image_embedding(content, request)
            clip = float(np.clip(np.dot(image, text_embedding), -1.0, 1.0))
            if content:
                quality = float(self._quality[content].mean())
            else:
                quality = 0.5
            jitter_rng = np.random.default_rng(
                _seed64(f"aest:{request.generation_seed}:" + ",".join(map(str, content)))
            )
            quality = quality + 0.05 * float(jitter_rng.standard_normal())
            aesthetic = float(np.clip(1.0 + 9.0 * quality, 1.0, 10.0))
            ref = (
                self._render_image(content, request, artifact_dir)
                if request.return_images
                else None
            )
            items.append(ScoredItem(aesthetic=aesthetic, clip_score=clip, image_ref=ref))
        return items
