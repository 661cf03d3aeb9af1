"""Pydantic models for the wire protocol."""

from __future__ import annotations

from pydantic import BaseModel, Field


class ModelIds(BaseModel):
    generator: str
    clip: str
    aesthetic: str


class MetaResponse(BaseModel):
    vocab_size: int
    pad_id: int
    bos_id: int
    eos_id: int
    max_content_len: int
    max_batch: int
    model_ids: ModelIds


class TokenizeRequest(BaseModel):
    text: str


class TokenizeResponse(BaseModel):
    token_ids: list[int]


class GenotypeIn(BaseModel):
    token_ids: list[int]


class ScoreRequest(BaseModel):
    prompt: str
    generation_seed: int = 0
    steps: int = Field(default=1, ge=1)
    guidance_scale: float = Field(default=0.0, ge=0.0)
    width: int = Field(default=512, ge=8)
    height: int = Field(default=512, ge=8)
    return_images: bool = False
    batch: list[GenotypeIn] = Field(min_length=1)
