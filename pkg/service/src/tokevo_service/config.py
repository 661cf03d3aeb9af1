"""Service configuration, from constructor arguments or the environment."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

ENV_PREFIX = "TOKEVO_SERVICE_"


@dataclass
class ServiceConfig:
    backend: str = "synthetic"  # synthetic | torch
    host: str = "127.0.0.1"
    port: int = 8000
    max_batch: int = 64
    max_content_len: int = 75
    artifact_dir: Path = field(default_factory=lambda: Path("artifacts"))
    vocab_path: Optional[Path] = None  # synthetic backend word list override
    generator_model: str = "stabilityai/sdxl-turbo"
    clip_model: str = "openai/clip-vit-large-patch14"
    aesthetic_weights: Optional[Path] = None
    device: str = "cuda"

    def __post_init__(self) -> None:
        if self.max_batch < 1:
            raise ValueError("max_batch must be at least 1")
        if self.max_content_len < 1:
            raise ValueError("max_content_len must be at least 1")
        self.artifact_dir = Path(self.artifact_dir)

    @classmethod
    def from_env(cls, **overrides) -> "ServiceConfig":
        def env(name, default=None):
            return os.environ.get(ENV_PREFIX + name, default)

        kwargs = dict(
            backend=env("BACKEND", "synthetic"),
            host=env("HOST", "127.0.0.1"),
            port=int(env("PORT", "8000")),
            max_batch=int(env("MAX_BATCH", "64")),
            max_content_len=int(env("MAX_CONTENT_LEN", "75")),
            artifact_dir=Path(env("ARTIFACT_DIR", "artifacts")),
        )
        if env("VOCAB_PATH"):
            kwargs["vocab_path"] = Path(env("VOCAB_PATH"))
        if env("DEVICE"):
            kwargs["device"] = env("DEVICE")
        kwargs.update(overrides)
        return cls(**kwargs)
