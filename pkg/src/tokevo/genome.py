"""Vocabulary contract and the token-vector genotype shared by every optimizer."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Optional

__all__ = [
    "VocabSpec",
    "TokenVector",
    "Prompt",
    "validate",
    "effective_length",
    "genotype_from_prompt",
    "fixture_vocab",
]


@dataclass(frozen=True)
class VocabSpec:
    """Layout of a text encoder's token vocabulary.

    ``pad_id``, ``bos_id`` and ``eos_id`` may coincide (CLIP reuses its
    end-of-text token for padding); all three must be valid token IDs.
    ``content_len`` is the fixed number of genotype positions, defaulting
    to a 77-slot CLIP context minus the two sequence markers.
    """

    vocab_size: int
    pad_id: int = 0
    bos_id: int = 1
    eos_id: int = 2
    content_len: int = 75

    def __post_init__(self) -> None:
        if self.vocab_size < 1:
            raise ValueError(f"vocab_size must be positive, got {self.vocab_size}")
        for name in ("pad_id", "bos_id", "eos_id"):
            value = getattr(self, name)
            if not 0 <= value < self.vocab_size:
                raise ValueError(f"{name}={value} outside [0, {self.vocab_size})")
        if self.content_len < 1:
            raise ValueError(f"content_len must be positive, got {self.content_len}")
        # bos/eos never enter a genotype; pad stays a legal gene value
        object.__setattr__(self, "_excluded", tuple(sorted({self.bos_id, self.eos_id})))

    @property
    def mutation_domain_size(self) -> int:
        """Number of token IDs a mutation may draw from."""
        return self.vocab_size - len(self._excluded)

    def is_content_id(self, token_id: int) -> bool:
        return 0 <= token_id < self.vocab_size and token_id not in self._excluded

    def sample_content_id(self, rng) -> int:
        """Uniform draw from the mutation domain (all IDs except bos/eos)."""
        r = rng.randrange(self.mutation_domain_size)
        for special in self._excluded:
            if r >= special:
                r += 1
        return r

    def content_ids(self) -> list[int]:
        """All IDs in the mutation domain, ascending."""
        excluded = set(self._excluded)
        return [i for i in range(self.vocab_size) if i not in excluded]

    def to_json_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "pad_id": self.pad_id,
            "bos_id": self.bos_id,
            "eos_id": self.eos_id,
            "content_len": self.content_len,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "VocabSpec":
        try:
            return cls(
                vocab_size=int(data["vocab_size"]),
                pad_id=int(data["pad_id"]),
                bos_id=int(data["bos_id"]),
                eos_id=int(data["eos_id"]),
                content_len=int(data["content_len"]),
            )
        except KeyError as exc:
            raise ValueError(f"vocabulary spec missing key: {exc}") from exc

    @classmethod
    def from_meta(cls, meta: dict, content_len: Optional[int] = None) -> "VocabSpec":
        """Build from a scoring service /v1/meta payload."""
        limit = int(meta["max_content_len"])
        if content_len is None:
            content_len = limit
        if content_len > limit:
            raise ValueError(f"content_len {content_len} exceeds service limit {limit}")
        return cls(
            vocab_size=int(meta["vocab_size"]),
            pad_id=int(meta["pad_id"]),
            bos_id=int(meta["bos_id"]),
            eos_id=int(meta["eos_id"]),
            content_len=content_len,
        )

    @classmethod
    def load(cls, path) -> "VocabSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")


def fixture_vocab() -> VocabSpec:
    """Small bundled vocabulary used for oracle-mode runs and tests."""
    data = resources.files("tokevo.data").joinpath("fixture_vocab.json").read_text("utf-8")
    return VocabSpec.from_json_dict(json.loads(data))


@dataclass(frozen=True)
class TokenVector:
    """Fixed-length genotype: a tuple of token IDs."""

    ids: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)

    def digest(self) -> str:
        """Stable content digest, used for log rows and cache keys."""
        payload = ",".join(str(i) for i in self.ids).encode("ascii")
        return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class Prompt:
    """A user prompt: raw text plus its (service- or fixture-) tokenization."""

    prompt_id: str
    text: str
    category: str = ""
    token_ids: tuple[int, ...] = ()
    challenge: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "token_ids", tuple(int(i) for i in self.token_ids))

    def with_token_ids(self, token_ids: Iterable[int]) -> "Prompt":
        return Prompt(self.prompt_id, self.text, self.category, tuple(token_ids), self.challenge)


def validate(vector: TokenVector, spec: VocabSpec) -> Optional[str]:
    """Check all genotype invariants; return None if fine, else a description
    of the first violation (length, ID range, or a sequence marker leaking
    into the content positions)."""
    if len(vector.ids) != spec.content_len:
        return f"length {len(vector.ids)} != content_len {spec.content_len}"
    for index, token_id in enumerate(vector.ids):
        if not 0 <= token_id < spec.vocab_size:
            return f"index {index}: id {token_id} out of range [0, {spec.vocab_size})"
        if token_id == spec.bos_id or token_id == spec.eos_id:
            return f"index {index}: sequence marker {token_id} not allowed in content"
    return None


def effective_length(vector: TokenVector, spec: VocabSpec) -> int:
    """Number of non-padding positions."""
    return sum(1 for token_id in vector.ids if token_id != spec.pad_id)


def genotype_from_prompt(prompt: Prompt, spec: VocabSpec) -> TokenVector:
    """Seed genotype for a prompt: its token IDs, truncated to the content
    length and right-padded with ``pad_id``."""
    for index, token_id in enumerate(prompt.token_ids):
        if not 0 <= token_id < spec.vocab_size:
            raise ValueError(
                f"prompt {prompt.prompt_id!r} token {index}: id {token_id} "
                f"out of range [0, {spec.vocab_size})"
            )
        if token_id == spec.bos_id or token_id == spec.eos_id:
            raise ValueError(
                f"prompt {prompt.prompt_id!r} token {index}: sequence marker "
                f"{token_id} not allowed in prompt tokens"
            )
    ids = list(prompt.token_ids[: spec.content_len])
    ids.extend([spec.pad_id] * (spec.content_len - len(ids)))
    return TokenVector(tuple(ids))
