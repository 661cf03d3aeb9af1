"""Pluggable fitness backends.

Three implementations of the same batch-scoring contract: a synthetic
oracle with a known optimum (for desk-scale verification), a memoizing
wrapper, and an HTTP client for the scoring service.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import requests

from .fitness import AESTHETIC_RANGE, CLIP_RANGE, RawScores
from .genome import Prompt, TokenVector, VocabSpec, validate

__all__ = [
    "EvaluatorError",
    "BackendUnavailableError",
    "SchemaMismatchError",
    "EvalRequest",
    "EvalResult",
    "cache_key",
    "OracleSpec",
    "oracle_score",
    "OracleEvaluator",
    "CachedEvaluator",
    "GenerationParams",
    "RetryPolicy",
    "RemoteEvaluator",
]


class EvaluatorError(Exception):
    """A fitness backend failed to score a batch."""


class BackendUnavailableError(EvaluatorError):
    """Transient transport-level failure; the call may be retried."""


class SchemaMismatchError(EvaluatorError):
    """The backend and client disagree about the wire contract; fatal."""


@dataclass(frozen=True)
class EvalRequest:
    """One batch of genotypes to score against a prompt, under a fixed
    generation seed so repeated genotypes map to identical images."""

    prompt: Prompt
    genotypes: tuple[TokenVector, ...]
    generation_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "genotypes", tuple(self.genotypes))
        if not self.genotypes:
            raise ValueError("evaluation batch must not be empty")


@dataclass(frozen=True)
class EvalResult:
    """Scores positionally matching the request batch."""

    scores: tuple[RawScores, ...]
    image_refs: Optional[tuple[Optional[str], ...]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "scores", tuple(self.scores))
        if self.image_refs is not None:
            object.__setattr__(self, "image_refs", tuple(self.image_refs))
            if len(self.image_refs) != len(self.scores):
                raise ValueError("image_refs length must match scores length")


def cache_key(genotype: TokenVector, prompt_id: str, generation_seed: int) -> str:
    """Digest identifying one deterministic scoring outcome."""
    payload = f"{prompt_id}\x00{generation_seed}\x00" + ",".join(
        str(i) for i in genotype.ids
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Synthetic oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleSpec:
    """A hidden-target landscape standing in for the image pipeline.

    Alignment rewards positionwise agreement with ``target``; aesthetics
    rewards membership of ``style_set``. Both channels are independently
    improvable, which is what makes the weighted trade-off testable.
    """

    vocab: VocabSpec
    target: TokenVector
    style_set: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "style_set", frozenset(self.style_set))
        problem = validate(self.target, self.vocab)
        if problem:
            raise ValueError(f"oracle target invalid: {problem}")
        for token_id in self.style_set:
            if not self.vocab.is_content_id(token_id):
                raise ValueError(f"style token {token_id} outside the mutation domain")

    @classmethod
    def derive(
        cls,
        vocab: VocabSpec,
        *,
        prompt_id: str = "",
        style_set_size: int = 50,
        seed: int = 0,
    ) -> "OracleSpec":
        """Deterministically derive a hidden landscape for a prompt."""
        digest = hashlib.sha256(f"{seed}\x00{prompt_id}".encode("utf-8")).digest()
        rng = random.Random(int.from_bytes(digest[:8], "big"))
        target = TokenVector(
            tuple(vocab.sample_content_id(rng) for _ in range(vocab.content_len))
        )
        domain = vocab.content_ids()
        if style_set_size > len(domain):
            raise ValueError("style_set_size exceeds the mutation domain")
        style = frozenset(rng.sample(domain, style_set_size))
        return cls(vocab=vocab, target=target, style_set=style)


def oracle_score(genotype: TokenVector, oracle: OracleSpec) -> RawScores:
    """Pure reference scoring: alignment is an affine image of the match
    fraction against the hidden target, aesthetics of the style-token
    fraction."""
    k = len(oracle.target.ids)
    if len(genotype.ids) != k:
        raise ValueError(f"genotype length {len(genotype.ids)} != target length {k}")
    matches = sum(1 for a, b in zip(genotype.ids, oracle.target.ids) if a == b)
    style_hits = sum(1 for a in genotype.ids if a in oracle.style_set)
    clip = 2.0 * (matches / k) - 1.0
    aesthetic = 1.0 + 9.0 * (style_hits / k)
    return RawScores(aesthetic=aesthetic, clip=clip)


class OracleEvaluator:
    """Batch evaluator over an OracleSpec; deterministic and seed-free."""

    def __init__(self, oracle: OracleSpec) -> None:
        self.oracle = oracle
        self._target = np.asarray(oracle.target.ids, dtype=np.int64)
        style_lut = np.zeros(oracle.vocab.vocab_size, dtype=bool)
        if oracle.style_set:
            style_lut[list(oracle.style_set)] = True
        self._style_lut = style_lut

    def evaluate_batch(self, request: EvalRequest) -> EvalResult:
        k = self._target.shape[0]
        batch = np.asarray([g.ids for g in request.genotypes], dtype=np.int64)
        if batch.shape[1] != k:
            raise SchemaMismatchError(
                f"genotype length {batch.shape[1]} != target length {k}"
            )
        matches = (batch == self._target).sum(axis=1)
        style_hits = self._style_lut[batch].sum(axis=1)
        # arithmetic kept in Python floats so results match oracle_score exactly
        scores = tuple(
            RawScores(aesthetic=1.0 + 9.0 * (int(s) / k), clip=2.0 * (int(m) / k) - 1.0)
            for m, s in zip(matches, style_hits)
        )
        return EvalResult(scores=scores)


# ---------------------------------------------------------------------------
# Memoizing wrapper
# ---------------------------------------------------------------------------


class CachedEvaluator:
    """Memoizes a deterministic evaluator per (genotype, prompt, seed) key.

    Repeated keys within a run are served from memory; a batch that mixes
    hits and misses is forwarded as one deduplicated sub-batch and merged
    back positionally. Optionally spills scored entries to an append-only
    JSONL file which is reloaded on construction.
    """

    def __init__(self, inner, spill_path=None) -> None:
        self.inner = inner
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()
        self._entries: dict[str, tuple[RawScores, Optional[str]]] = {}
        self._spill_path = spill_path
        self._spill_fh = None
        if spill_path is not None:
            self._load_spill(spill_path)
            self._spill_fh = open(spill_path, "a", encoding="utf-8", newline="\n")

    def _load_spill(self, path) -> None:
        try:
            fh = open(path, "r", encoding="utf-8")
        except FileNotFoundError:
            return
        with fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                self._entries[obj["key"]] = (
                    RawScores(aesthetic=obj["aesthetic"], clip=obj["clip"]),
                    obj.get("image_ref"),
                )

    def _spill(self, key: str, raw: RawScores, image_ref: Optional[str]) -> None:
        if self._spill_fh is None:
            return
        obj = {"key": key, "aesthetic": raw.aesthetic, "clip": raw.clip}
        if image_ref is not None:
            obj["image_ref"] = image_ref
        self._spill_fh.write(json.dumps(obj, separators=(",", ":")) + "\n")
        self._spill_fh.flush()

    def evaluate_batch(self, request: EvalRequest) -> EvalResult:
        keys = [
            cache_key(g, request.prompt.prompt_id, request.generation_seed)
            for g in request.genotypes
        ]
        with self._lock:
            known = {k: self._entries[k] for k in keys if k in self._entries}
        pending_keys: list[str] = []
        pending_genotypes: list[TokenVector] = []
        seen: set[str] = set()
        for key, genotype in zip(keys, request.genotypes):
            if key in known or key in seen:
                continue
            seen.add(key)
            pending_keys.append(key)
            pending_genotypes.append(genotype)

        fresh: dict[str, tuple[RawScores, Optional[str]]] = {}
        if pending_genotypes:
            sub = EvalRequest(
                prompt=request.prompt,
                genotypes=tuple(pending_genotypes),
                generation_seed=request.generation_seed,
            )
            result = self.inner.evaluate_batch(sub)
            refs = result.image_refs or (None,) * len(result.scores)
            for key, raw, ref in zip(pending_keys, result.scores, refs):
                fresh[key] = (raw, ref)
            with self._lock:
                for key, (raw, ref) in fresh.items():
                    if key not in self._entries:
                        self._entries[key] = (raw, ref)
                        self._spill(key, raw, ref)

        scores: list[RawScores] = []
        refs_out: list[Optional[str]] = []
        any_ref = False
        counted: set[str] = set()
        for key in keys:
            if key in known:
                raw, ref = known[key]
                self.hits += 1
            else:
                raw, ref = fresh[key]
                if key in counted:  # in-batch duplicate of a fresh key
                    self.hits += 1
                else:
                    counted.add(key)
                    self.misses += 1
            if ref is not None:
                any_ref = True
            scores.append(raw)
            refs_out.append(ref)
        return EvalResult(
            scores=tuple(scores),
            image_refs=tuple(refs_out) if any_ref else None,
        )

    def close(self) -> None:
        if self._spill_fh is not None:
            self._spill_fh.close()
            self._spill_fh = None


# ---------------------------------------------------------------------------
# Remote scoring-service client
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GenerationParams:
    """Generator knobs forwarded with every scoring call."""

    steps: int = 1
    guidance_scale: float = 0.0
    width: int = 512
    height: int = 512
    return_images: bool = False


@dataclass(frozen=True)
class RetryPolicy:
    """Bounded exponential backoff for transient transport failures."""

    max_attempts: int = 4
    backoff_base: float = 0.25
    backoff_cap: float = 4.0
    timeout: float = 120.0


def _clamp(value: float, lo: float, hi: float) -> float:
    return min(hi, max(lo, value))


class RemoteEvaluator:
    """Client of the scoring service's JSON-over-HTTP protocol.

    Transport failures and 5xx responses are retried with exponential
    backoff up to the policy's attempt budget; 4xx responses and shape
    violations are fatal. Scores are clamped into their declared ranges
    before anything downstream sees them.
    """

    def __init__(
        self,
        endpoint: str,
        *,
        params: GenerationParams = GenerationParams(),
        retry: RetryPolicy = RetryPolicy(),
        max_batch: Optional[int] = None,
        session: Optional[requests.Session] = None,
    ) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.params = params
        self.retry = retry
        self.max_batch = max_batch
        self._session = session or requests.Session()

    # -- low-level transport ------------------------------------------------

    def _request(self, method: str, path: str, body=None) -> dict:
        url = self.endpoint + path
        last_error: Optional[Exception] = None
        for attempt in range(self.retry.max_attempts):
            if attempt:
                delay = min(
                    self.retry.backoff_cap,
                    self.retry.backoff_base * (2 ** (attempt - 1)),
                )
                time.sleep(delay)
            try:
                response = self._session.request(
                    method, url, json=body, timeout=self.retry.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code >= 500 or response.status_code == 503:
                last_error = BackendUnavailableError(
                    f"{method} {path} -> {response.status_code}: {response.text[:200]}"
                )
                continue
            if response.status_code >= 400:
                raise SchemaMismatchError(
                    f"{method} {path} -> {response.status_code}: {response.text[:200]}"
                )
            try:
                return response.json()
            except ValueError as exc:
                raise SchemaMismatchError(f"{method} {path}: non-JSON response") from exc
        raise BackendUnavailableError(
            f"{method} {path} failed after {self.retry.max_attempts} attempts: {last_error}"
        )

    # -- protocol calls -----------------------------------------------------

    def fetch_meta(self) -> dict:
        meta = self._request("GET", "/v1/meta")
        for key in ("vocab_size", "pad_id", "bos_id", "eos_id", "max_content_len", "max_batch"):
            if key not in meta:
                raise SchemaMismatchError(f"/v1/meta missing key {key!r}")
        if self.max_batch is None:
            self.max_batch = int(meta["max_batch"])
        return meta

    def tokenize(self, text: str) -> list[int]:
        payload = self._request("POST", "/v1/tokenize", {"text": text})
        ids = payload.get("token_ids")
        if not isinstance(ids, list) or not all(isinstance(i, int) for i in ids):
            raise SchemaMismatchError("/v1/tokenize returned malformed token_ids")
        return ids

    def evaluate_batch(self, request: EvalRequest) -> EvalResult:
        limit = self.max_batch or len(request.genotypes)
        scores: list[RawScores] = []
        refs: list[Optional[str]] = []
        for start in range(0, len(request.genotypes), limit):
            chunk = request.genotypes[start : start + limit]
            body = {
                "prompt": request.prompt.text,
                "generation_seed": request.generation_seed,
                "steps": self.params.steps,
                "guidance_scale": self.params.guidance_scale,
                "width": self.params.width,
                "height": self.params.height,
                "return_images": self.params.return_images,
                "batch": [{"token_ids": list(g.ids)} for g in chunk],
            }
            payload = self._request("POST", "/v1/score", body)
            results = payload.get("results")
            if not isinstance(results, list):
                raise SchemaMismatchError("/v1/score response missing results array")
            if len(results) != len(chunk):
                raise SchemaMismatchError(
                    f"/v1/score returned {len(results)} results for {len(chunk)} genotypes"
                )
            for offset, item in enumerate(results):
                if not isinstance(item, dict):
                    raise SchemaMismatchError("/v1/score result item is not an object")
                if "error" in item and item["error"] is not None:
                    raise EvaluatorError(
                        f"scoring failed for batch item {start + offset}: {item['error']}"
                    )
                try:
                    aesthetic = float(item["aesthetic"])
                    clip = float(item["clip_score"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise SchemaMismatchError(
                        f"/v1/score result item {start + offset} malformed: {item!r}"
                    ) from exc
                scores.append(
                    RawScores(
                        aesthetic=_clamp(aesthetic, *AESTHETIC_RANGE),
                        clip=_clamp(clip, *CLIP_RANGE),
                    )
                )
                refs.append(item.get("image_ref"))
        return EvalResult(
            scores=tuple(scores),
            image_refs=tuple(refs) if any(r is not None for r in refs) else None,
        )
