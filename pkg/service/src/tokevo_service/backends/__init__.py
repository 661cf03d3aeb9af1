"""Model backends. All of them satisfy the same small interface:

- vocab attributes: ``vocab_size``, ``pad_id``, ``bos_id``, ``eos_id``,
  ``max_content_len``, ``model_ids``
- ``tokenize(text) -> list[int]`` (content IDs only, truncated)
- ``score_batch(request, artifact_dir) -> list[ScoredItem]``
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class ScoredItem:
    aesthetic: Optional[float] = None
    clip_score: Optional[float] = None
    image_ref: Optional[str] = None
    error: Optional[str] = None


def build_backend(config):
    if config.backend == "synthetic":
        from .synthetic import SyntheticBackend

        return SyntheticBackend(config)
    if config.backend == "torch":
        from .torch_pipeline import TorchPipelineBackend

        return TorchPipelineBackend(config)
    raise ValueError(f"unknown backend {config.backend!r}")
