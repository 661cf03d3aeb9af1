"""Experiment orchestration: the random-search baseline, per-category prompt
sampling, the (prompt x method x seed) grid with resumable persistence, and
the fixture tokenizer used in oracle mode."""

from __future__ import annotations

import csv
import hashlib
import json
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from . import engine
from .engine import BestSoFar, GAConfig, Individual, ScoringSession
from .evaluators import (
    CachedEvaluator,
    EvaluatorError,
    GenerationParams,
    OracleEvaluator,
    OracleSpec,
    RemoteEvaluator,
)
from .fitness import FitnessWeights
from .genome import Prompt, TokenVector, VocabSpec, fixture_vocab, genotype_from_prompt, validate
from .sinks import EvaluationSink, JsonlSink, MemorySink, TeeSink

__all__ = [
    "METHODS",
    "GA_METHODS",
    "ExperimentConfig",
    "UnitResult",
    "random_search",
    "sample_prompts",
    "load_prompts_csv",
    "save_prompts_csv",
    "fixture_tokenize",
    "demo_prompts",
    "run_unit",
    "run_experiment",
    "unit_paths",
]

GA_METHODS = {
    "ga_mutated": "mutated",
    "ga_empty": "empty",
    "ga_random": "random",
}
METHODS = ("baseline_no_opt", "ga_mutated", "ga_empty", "ga_random", "random_search")

PROMPT_CSV_HEADER = ["prompt_id", "category", "challenge", "text"]


# ---------------------------------------------------------------------------
# Prompt datasets
# ---------------------------------------------------------------------------


def load_prompts_csv(path) -> list[Prompt]:
    """Read a prompt dataset (UTF-8 CSV with header
    prompt_id,category,challenge,text)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in PROMPT_CSV_HEADER if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"prompt CSV {path} missing columns: {missing}")
        prompts = [
            Prompt(
                prompt_id=row["prompt_id"].strip(),
                text=row["text"],
                category=row["category"].strip(),
                challenge=row["challenge"].strip(),
            )
            for row in reader
        ]
    seen: set[str] = set()
    for p in prompts:
        if not p.prompt_id:
            raise ValueError(f"prompt CSV {path} contains an empty prompt_id")
        if p.prompt_id in seen:
            raise ValueError(f"duplicate prompt_id {p.prompt_id!r} in {path}")
        seen.add(p.prompt_id)
    return prompts


def save_prompts_csv(prompts: Sequence[Prompt], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PROMPT_CSV_HEADER)
        for p in prompts:
            writer.writerow([p.prompt_id, p.category, p.challenge, p.text])


def demo_prompts() -> list[Prompt]:
    """The small bundled prompt set (12 categories, 4 prompts each)."""
    from importlib import resources

    with resources.as_file(
        resources.files("tokevo.data").joinpath("prompts_demo.csv")
    ) as path:
        return load_prompts_csv(path)


def sample_prompts(
    dataset: Sequence[Prompt], per_category: int, rng: random.Random
) -> list[Prompt]:
    """Uniform without-replacement sample of ``per_category`` prompts from
    every category present, returned in (category, prompt_id) order."""
    if per_category < 0:
        raise ValueError("per_category must be non-negative")
    if per_category == 0:
        return []
    by_category: dict[str, list[Prompt]] = {}
    for p in dataset:
        by_category.setdefault(p.category, []).append(p)
    chosen: list[Prompt] = []
    for category in sorted(by_category):
        pool = sorted(by_category[category], key=lambda p: p.prompt_id)
        if len(pool) < per_category:
            raise ValueError(
                f"category {category!r} has {len(pool)} prompts, "
                f"need {per_category}"
            )
        chosen.extend(rng.sample(pool, per_category))
    return sorted(chosen, key=lambda p: (p.category, p.prompt_id))


def fixture_tokenize(text: str, spec: VocabSpec) -> tuple[int, ...]:
    """Deterministic stand-in tokenizer for oracle mode: every word hashes
    to a stable content ID (never padding or a sequence marker)."""
    specials = sorted({spec.pad_id, spec.bos_id, spec.eos_id})
    domain_size = spec.vocab_size - len(specials)
    if domain_size < 1:
        raise ValueError("vocabulary has no usable content IDs")
    ids = []
    for word in re.findall(r"[a-z0-9']+", text.lower()):
        digest = hashlib.sha256(word.encode("utf-8")).digest()
        r = int.from_bytes(digest[:8], "big") % domain_size
        for special in specials:
            if r >= special:
                r += 1
        ids.append(r)
    return tuple(ids[: spec.content_len])


# ---------------------------------------------------------------------------
# Random-search baseline
# ---------------------------------------------------------------------------


def random_search(
    base: TokenVector,
    spec: VocabSpec,
    budget: int,
    evaluator,
    rng: random.Random,
    sink: Optional[EvaluationSink] = None,
    *,
    prompt: Optional[Prompt] = None,
    weights: FitnessWeights = FitnessWeights(),
    batch_size: int = 64,
    generation_seed: int = 0,
) -> BestSoFar:
    """Budgeted uniform sampling over the mutation domain, evaluated in
    batches of the evolutionary population size and logged the same way."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    problem = validate(base, spec)
    if problem:
        raise ValueError(f"base genotype invalid: {problem}")
    if prompt is None:
        prompt = Prompt(prompt_id="adhoc", text="")
    session = ScoringSession(
        evaluator, prompt, weights, generation_seed=generation_seed, sink=sink
    )
    k = spec.content_len
    remaining = budget
    batch_index = 0
    while remaining > 0:
        size = min(batch_size, remaining)
        members = tuple(
            Individual(
                TokenVector(tuple(spec.sample_content_id(rng) for _ in range(k)))
            )
            for _ in range(size)
        )
        session.evaluate(members, batch_index)
        if sink is not None:
            sink.on_generation(
                session.generation_stats(
                    engine.Population(generation_index=batch_index, members=members)
                )
            )
        remaining -= size
        batch_index += 1
    return session.best


# ---------------------------------------------------------------------------
# Experiment grid
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Everything needed to run an experiment grid."""

    prompts: list[Prompt]
    output_dir: Path
    methods: tuple[str, ...] = METHODS
    ga: GAConfig = field(default_factory=GAConfig)
    eval_budget: int = 6400
    seeds: tuple[int, ...] = (0,)
    evaluator: str = "oracle"
    endpoint: Optional[str] = None
    vocab: VocabSpec = field(default_factory=fixture_vocab)
    style_set_size: int = 50
    landscape_seed: int = 0
    concurrency: int = 1
    generation: GenerationParams = field(default_factory=GenerationParams)

    def __post_init__(self) -> None:
        self.output_dir = Path(self.output_dir)
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods: {unknown} (choose from {METHODS})")
        if not self.methods:
            raise ValueError("methods must not be empty")
        if not self.prompts:
            raise ValueError("prompts must not be empty")
        if self.evaluator not in ("oracle", "remote"):
            raise ValueError("evaluator must be 'oracle' or 'remote'")
        if self.evaluator == "remote" and not self.endpoint:
            raise ValueError("remote evaluator requires an endpoint")
        if self.eval_budget < 1:
            raise ValueError("eval_budget must be at least 1")
        if self.concurrency < 1:
            raise ValueError("concurrency must be at least 1")
        if not self.seeds:
            raise ValueError("seeds must not be empty")


@dataclass
class UnitResult:
    """Outcome of one (prompt, method, seed) unit."""

    prompt_id: str
    method: str
    seed: int
    status: str  # complete | failed | skipped
    summary: Optional[dict] = None
    error: Optional[str] = None


def _slug(value: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "-", value)


def unit_paths(output_dir: Path, prompt_id: str, method: str, seed: int) -> tuple[Path, Path]:
    stem = f"{_slug(prompt_id)}__{method}__s{seed}"
    units = Path(output_dir) / "units"
    return units / f"{stem}.jsonl", units / f"{stem}.json"


def _build_evaluator(cfg: ExperimentConfig, prompt: Prompt):
    if cfg.evaluator == "oracle":
        oracle = OracleSpec.derive(
            cfg.vocab,
            prompt_id=prompt.prompt_id,
            style_set_size=cfg.style_set_size,
            seed=cfg.landscape_seed,
        )
        return CachedEvaluator(OracleEvaluator(oracle))
    remote = RemoteEvaluator(cfg.endpoint, params=cfg.generation)
    remote.fetch_meta()  # learn the advertised batch limit before scoring
    return CachedEvaluator(remote)


def _resolve_tokens(cfg: ExperimentConfig, prompt: Prompt) -> Prompt:
    if prompt.token_ids:
        return prompt
    if cfg.evaluator == "remote":
        client = RemoteEvaluator(cfg.endpoint)
        return prompt.with_token_ids(client.tokenize(prompt.text))
    return prompt.with_token_ids(fixture_tokenize(prompt.text, cfg.vocab))


def _summary_obj(
    prompt: Prompt,
    method: str,
    seed: int,
    cfg: ExperimentConfig,
    best: BestSoFar,
    memory: MemorySink,
) -> dict:
    score = best.individual.fitness
    return {
        "prompt_id": prompt.prompt_id,
        "method": method,
        "seed": seed,
        "status": "complete",
        "n_evaluations": len(memory.evaluations),
        "weights": {
            "aesthetic": cfg.ga.weights.aesthetic,
            "clip": cfg.ga.weights.clip,
        },
        "generations": [g.to_json_obj() for g in memory.generations],
        "best": {
            "token_ids": list(best.individual.genotype.ids),
            "genotype_digest": best.individual.genotype.digest(),
            "aesthetic": score.raw.aesthetic,
            "clip": score.raw.clip,
            "norm_aesthetic": score.norm_aesthetic,
            "norm_clip": score.norm_clip,
            "fitness": score.combined,
            "found_at_generation": best.found_at_generation,
            "found_at_evaluation": best.found_at_evaluation,
            "text": None,
        },
    }


def run_unit(
    prompt: Prompt, method: str, seed: int, cfg: ExperimentConfig
) -> UnitResult:
    """Execute one grid unit, writing its evaluation JSONL and summary JSON.
    A unit whose summary already reports completion is skipped."""
    jsonl_path, summary_path = unit_paths(cfg.output_dir, prompt.prompt_id, method, seed)
    if summary_path.exists():
        with open(summary_path, "r", encoding="utf-8") as fh:
            existing = json.load(fh)
        if existing.get("status") == "complete":
            return UnitResult(prompt.prompt_id, method, seed, "skipped", existing)

    jsonl_path.parent.mkdir(parents=True, exist_ok=True)
    memory = MemorySink()

    try:
        prompt = _resolve_tokens(cfg, prompt)
        evaluator = _build_evaluator(cfg, prompt)
        base = genotype_from_prompt(prompt, cfg.vocab)
        with JsonlSink(jsonl_path) as jsonl:
            sink = TeeSink(memory, jsonl)
            if method == "baseline_no_opt":
                session = ScoringSession(
                    evaluator, prompt, cfg.ga.weights, generation_seed=seed, sink=sink
                )
                members = (Individual(base),)
                session.evaluate(members, 0)
                sink.on_generation(
                    session.generation_stats(
                        engine.Population(generation_index=0, members=members)
                    )
                )
                best = session.best
            elif method in GA_METHODS:
                ga_cfg = replace(
                    cfg.ga, seed=seed, init_strategy=GA_METHODS[method]
                )
                best = engine.run(
                    ga_cfg, base, cfg.vocab, evaluator, sink, prompt=prompt
                )
            elif method == "random_search":
                best = random_search(
                    base,
                    cfg.vocab,
                    cfg.eval_budget,
                    evaluator,
                    random.Random(seed),
                    sink,
                    prompt=prompt,
                    weights=cfg.ga.weights,
                    batch_size=cfg.ga.population_size,
                    generation_seed=seed,
                )
            else:
                raise ValueError(f"unknown method {method!r}")
    except EvaluatorError as exc:
        failure = {
            "prompt_id": prompt.prompt_id,
            "method": method,
            "seed": seed,
            "status": "failed",
            "error": str(exc),
        }
        with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(failure, fh, indent=2)
            fh.write("\n")
        return UnitResult(prompt.prompt_id, method, seed, "failed", failure, str(exc))

    summary = _summary_obj(prompt, method, seed, cfg, best, memory)
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return UnitResult(prompt.prompt_id, method, seed, "complete", summary)


def run_experiment(cfg: ExperimentConfig) -> list[UnitResult]:
    """Run the full (prompt x method x seed) grid. Completed units are never
    re-executed; failed units are recorded and the rest continue."""
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    units = [
        (prompt, method, seed)
        for prompt in cfg.prompts
        for method in cfg.methods
        for seed in cfg.seeds
    ]

    def _one(unit) -> UnitResult:
        prompt, method, seed = unit
        try:
            return run_unit(prompt, method, seed, cfg)
        except Exception as exc:  # defensive: a unit crash must not kill the grid
            return UnitResult(prompt.prompt_id, method, seed, "failed", None, str(exc))

    if cfg.concurrency > 1:
        with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
            results = list(pool.map(_one, units))
    else:
        results = [_one(u) for u in units]
    return results
