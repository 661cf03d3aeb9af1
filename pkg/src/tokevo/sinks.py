"""Streaming sinks for evaluation rows and per-generation statistics.

The engine never touches files directly; anything it learns is pushed
through one of these.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Optional

from .fitness import FitnessScore, RawScores
from .genome import TokenVector

__all__ = [
    "EvaluationRecord",
    "GenerationStats",
    "EvaluationSink",
    "MemorySink",
    "JsonlSink",
    "TeeSink",
]


@dataclass(frozen=True)
class EvaluationRecord:
    """One scored genotype, in evaluation order."""

    eval_index: int
    generation: int
    genotype: TokenVector
    raw: RawScores
    fitness: FitnessScore

    def to_json_obj(self) -> dict:
        return {
            "eval_index": self.eval_index,
            "genotype_digest": self.genotype.digest(),
            "token_ids": list(self.genotype.ids),
            "aesthetic": self.raw.aesthetic,
            "clip": self.raw.clip,
            "fitness": self.fitness.combined,
        }


@dataclass(frozen=True)
class GenerationStats:
    """Population-level summary emitted once per generation (or per
    random-search batch)."""

    generation: int
    best: float
    mean: float
    std: float
    best_so_far: float

    def to_json_obj(self) -> dict:
        return {
            "generation": self.generation,
            "best": self.best,
            "mean": self.mean,
            "std": self.std,
            "best_so_far": self.best_so_far,
        }


class EvaluationSink:
    """No-op base sink; subclasses override what they care about."""

    def on_evaluation(self, record: EvaluationRecord) -> None:
        pass

    def on_generation(self, stats: GenerationStats) -> None:
        pass

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
        return False


class MemorySink(EvaluationSink):
    """Collects everything in memory; handy for tests and aggregation."""

    def __init__(self) -> None:
        self.evaluations: list[EvaluationRecord] = []
        self.generations: list[GenerationStats] = []

    def on_evaluation(self, record: EvaluationRecord) -> None:
        self.evaluations.append(record)

    def on_generation(self, stats: GenerationStats) -> None:
        self.generations.append(stats)


class JsonlSink(EvaluationSink):
    """Appends one JSON object per evaluation to a log file.

    Rows carry exactly the keys eval_index, genotype_digest, token_ids,
    aesthetic, clip and fitness; generation statistics are not written
    here (they belong to the unit summary). Each row is flushed so an
    interrupted run leaves a usable prefix.
    """

    def __init__(self, path) -> None:
        self.path = path
        self._fh: Optional[IO[str]] = open(path, "w", encoding="utf-8", newline="\n")

    def on_evaluation(self, record: EvaluationRecord) -> None:
        if self._fh is None:
            raise ValueError(f"sink for {self.path} already closed")
        self._fh.write(json.dumps(record.to_json_obj(), separators=(",", ":")))
        self._fh.write("\n")
        self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


class TeeSink(EvaluationSink):
    """Fans events out to several sinks."""

    def __init__(self, *sinks: EvaluationSink) -> None:
        self.sinks = sinks

    def on_evaluation(self, record: EvaluationRecord) -> None:
        for sink in self.sinks:
            sink.on_evaluation(record)

    def on_generation(self, stats: GenerationStats) -> None:
        for sink in self.sinks:
            sink.on_generation(stats)

    def close(self) -> None:
        for sink in self.sinks:
            sink.close()
