import random
import time
from dataclasses import dataclass, field

import pytest

from tokevo.engine import BestSoFar, GAConfig, run
from tokevo.evaluators import CachedEvaluator, OracleEvaluator, OracleSpec
from tokevo.genome import Prompt, genotype_from_prompt, fixture_vocab
from tokevo.harness import fixture_tokenize, random_search
from tokevo.sinks import EvaluationSink, GenerationStats


@pytest.fixture(scope="session")
def vocab():
    return fixture_vocab()


@pytest.fixture(scope="session")
def landscape(vocab):
    return OracleSpec.derive(vocab, prompt_id="acceptance", style_set_size=50, seed=0)


@pytest.fixture(scope="session")
def base_prompt(vocab):
    prompt = Prompt(prompt_id="acceptance", text="a red fox standing in fresh snow")
    return prompt.with_token_ids(fixture_tokenize(prompt.text, vocab))


class StatsSink(EvaluationSink):
    """Keeps per-generation statistics only; evaluation rows are dropped."""

    def __init__(self):
        self.generations: list[GenerationStats] = []

    def on_generation(self, stats: GenerationStats) -> None:
        self.generations.append(stats)


class CountingEvaluator:
    """Wraps an evaluator and counts how often each genotype hits the backend."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0
        self.scored = 0
        self.per_digest: dict[str, int] = {}

    def evaluate_batch(self, request):
        self.calls += 1
        self.scored += len(request.genotypes)
        for g in request.genotypes:
            d = g.digest()
            self.per_digest[d] = self.per_digest.get(d, 0) + 1
        return self.inner.evaluate_batch(request)


@dataclass
class PairedRun:
    seed: int
    ga_best: BestSoFar
    ga_stats: list
    rs_best: BestSoFar
    rs_stats: list


@dataclass
class Campaign:
    runs: list[PairedRun] = field(default_factory=list)
    elapsed: float = 0.0


@pytest.fixture(scope="session")
def campaign(vocab, landscape, base_prompt):
    """20 paired GA (mutated init, stock parameters) vs random-search runs on
    the shared hidden-target landscape, seeds 0..19."""
    base = genotype_from_prompt(base_prompt, vocab)
    result = Campaign()
    start = time.time()
    for seed in range(20):
        ga_sink = StatsSink()
        cfg = GAConfig(seed=seed, init_strategy="mutated")
        ga_best = run(
            cfg,
            base,
            vocab,
            CachedEvaluator(OracleEvaluator(landscape)),
            ga_sink,
            prompt=base_prompt,
        )
        rs_sink = StatsSink()
        rs_best = random_search(
            base,
            vocab,
            6400,
            CachedEvaluator(OracleEvaluator(landscape)),
            random.Random(seed),
            rs_sink,
            prompt=base_prompt,
            batch_size=cfg.population_size,
            generation_seed=seed,
        )
        result.runs.append(
            PairedRun(seed, ga_best, ga_sink.generations, rs_best, rs_sink.generations)
        )
    result.elapsed = time.time() - start
    return result
