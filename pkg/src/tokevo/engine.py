"""The evolution loop: population initialization, tournament selection,
one-point crossover, uniform integer mutation, elitism, and best-so-far
tracking."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .evaluators import EvalRequest
from .fitness import FitnessScore, FitnessWeights, combine
from .genome import Prompt, TokenVector, VocabSpec, validate
from .sinks import EvaluationRecord, EvaluationSink, GenerationStats

__all__ = [
    "INIT_STRATEGIES",
    "GAConfig",
    "Individual",
    "Population",
    "BestSoFar",
    "ScoringSession",
    "init_population",
    "tournament_select",
    "one_point_crossover",
    "uniform_gene_mutation",
    "step_generation",
    "run",
]

INIT_STRATEGIES = ("mutated", "empty", "random")


@dataclass(frozen=True)
class GAConfig:
    """All evolution hyperparameters for one run.

    ``mutation_prob`` gates whether an individual is mutated at all;
    ``gene_mutation_prob`` is the per-position resampling rate inside a
    mutated individual.
    """

    population_size: int = 64
    generations: int = 100
    crossover_prob: float = 0.7
    mutation_prob: float = 0.9
    gene_mutation_prob: float = 0.1
    tournament_size: int = 3
    elite_count: int = 1
    weights: FitnessWeights = field(default_factory=FitnessWeights)
    seed: int = 0
    init_strategy: str = "mutated"

    def __post_init__(self) -> None:
        if self.population_size < 1:
            raise ValueError("population_size must be positive")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        for name in ("crossover_prob", "mutation_prob", "gene_mutation_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")
        if not 1 <= self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must be in [1, population_size]")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must be in [0, population_size)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValueError(
                f"init_strategy {self.init_strategy!r} not one of {INIT_STRATEGIES}"
            )


@dataclass
class Individual:
    """A genotype plus its score, absent until evaluated."""

    genotype: TokenVector
    fitness: Optional[FitnessScore] = None

    def set_fitness(self, score: FitnessScore) -> None:
        if self.fitness is not None:
            raise ValueError("fitness is immutable once assigned")
        self.fitness = score


@dataclass(frozen=True)
class Population:
    generation_index: int
    members: tuple[Individual, ...]


@dataclass(frozen=True)
class BestSoFar:
    """The highest-fitness individual seen so far and where it was found."""

    individual: Individual
    found_at_generation: int
    found_at_evaluation: int


class ScoringSession:
    """Turns raw backend scores into combined fitness for one run.

    Owns the evaluation counter, streams every evaluation to the sink,
    and tracks the best individual ever scored. Ties keep the earliest
    find, so the best-so-far fitness is non-decreasing by construction.
    """

    def __init__(
        self,
        evaluator,
        prompt: Prompt,
        weights: FitnessWeights,
        generation_seed: int = 0,
        sink: Optional[EvaluationSink] = None,
    ) -> None:
        self.evaluator = evaluator
        self.prompt = prompt
        self.weights = weights
        self.generation_seed = generation_seed
        self.sink = sink
        self.eval_count = 0
        self.best: Optional[BestSoFar] = None

    def evaluate(self, members: Sequence[Individual], generation: int) -> None:
        pending = [m for m in members if m.fitness is None]
        if not pending:
            return
        request = EvalRequest(
            prompt=self.prompt,
            genotypes=tuple(m.genotype for m in pending),
            generation_seed=self.generation_seed,
        )
        result = self.evaluator.evaluate_batch(request)
        if len(result.scores) != len(pending):
            raise ValueError(
                f"evaluator returned {len(result.scores)} scores for "
                f"{len(pending)} genotypes"
            )
        for member, raw in zip(pending, result.scores):
            score = combine(raw, self.weights)
            member.set_fitness(score)
            if self.sink is not None:
                self.sink.on_evaluation(
                    EvaluationRecord(
                        eval_index=self.eval_count,
                        generation=generation,
                        genotype=member.genotype,
                        raw=raw,
                        fitness=score,
                    )
                )
            if self.best is None or score.combined > self.best.individual.fitness.combined:
                self.best = BestSoFar(member, generation, self.eval_count)
            self.eval_count += 1

    def generation_stats(self, population: Population) -> GenerationStats:
        values = [m.fitness.combined for m in population.members]
        mean = math.fsum(values) / len(values)
        var = math.fsum((x - mean) ** 2 for x in values) / len(values)
        return GenerationStats(
            generation=population.generation_index,
            best=max(values),
            mean=mean,
            std=math.sqrt(var),
            best_so_far=self.best.individual.fitness.combined,
        )


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


def init_population(
    cfg: GAConfig, base: TokenVector, spec: VocabSpec, rng: random.Random
) -> Population:
    """Generation-zero population under one of three strategies: mutated
    copies of ``base``, all-padding vectors, or uniformly random vectors."""
    n = cfg.population_size
    if cfg.init_strategy == "mutated":
        problem = validate(base, spec)
        if problem:
            raise ValueError(f"base genotype invalid: {problem}")
        members = [
            Individual(uniform_gene_mutation(base, cfg.gene_mutation_prob, spec, rng))
            for _ in range(n)
        ]
    elif cfg.init_strategy == "empty":
        empty = TokenVector((spec.pad_id,) * spec.content_len)
        members = [Individual(empty) for _ in range(n)]
    else:  # random
        members = [
            Individual(
                TokenVector(
                    tuple(spec.sample_content_id(rng) for _ in range(spec.content_len))
                )
            )
            for _ in range(n)
        ]
    return Population(generation_index=0, members=tuple(members))


def tournament_select(pop: Population, k: int, rng: random.Random) -> Individual:
    """Sample k members uniformly with replacement and return the fittest;
    ties keep the earliest-sampled contestant, so the winner is a
    deterministic function of the sampled pool."""
    members = pop.members
    if not 1 <= k <= len(members):
        raise ValueError(f"tournament size {k} outside [1, {len(members)}]")
    best: Optional[Individual] = None
    for _ in range(k):
        candidate = members[rng.randrange(len(members))]
        if candidate.fitness is None:
            raise ValueError("tournament encountered an unevaluated member")
        if best is None or candidate.fitness.combined > best.fitness.combined:
            best = candidate
    return best


def one_point_crossover(
    p1: TokenVector, p2: TokenVector, rng: random.Random
) -> tuple[TokenVector, TokenVector]:
    """Swap suffixes at a cut point drawn from {1, ..., K-1}, so children
    always mix both parents."""
    k = len(p1.ids)
    if len(p2.ids) != k:
        raise ValueError(f"parent length mismatch: {k} vs {len(p2.ids)}")
    if k < 2:
        raise ValueError("crossover needs at least 2 positions")
    cut = rng.randrange(1, k)
    return (
        TokenVector(p1.ids[:cut] + p2.ids[cut:]),
        TokenVector(p2.ids[:cut] + p1.ids[cut:]),
    )


def uniform_gene_mutation(
    v: TokenVector, gene_prob: float, spec: VocabSpec, rng: random.Random
) -> TokenVector:
    """Independently resample each position with probability ``gene_prob``,
    uniformly over the mutation domain (every token ID except the sequence
    markers; padding is a legal draw, letting vectors shrink)."""
    if not 0.0 <= gene_prob <= 1.0:
        raise ValueError(f"gene_prob {gene_prob} outside [0, 1]")
    ids = list(v.ids)
    for i in range(len(ids)):
        if rng.random() < gene_prob:
            ids[i] = spec.sample_content_id(rng)
    return TokenVector(tuple(ids))


def _top_members(members: Sequence[Individual], count: int) -> list[Individual]:
    if count == 0:
        return []
    for member in members:
        if member.fitness is None:
            raise ValueError("elitism requires a fully evaluated population")
    order = sorted(
        range(len(members)), key=lambda i: (-members[i].fitness.combined, i)
    )
    return [members[i] for i in order[:count]]


def _breed(
    pop: Population, cfg: GAConfig, spec: VocabSpec, rng: random.Random
) -> list[Individual]:
    n = cfg.population_size
    children: list[Individual] = list(_top_members(pop.members, cfg.elite_count))
    k = spec.content_len
    while len(children) < n:
        parent1 = tournament_select(pop, cfg.tournament_size, rng)
        parent2 = tournament_select(pop, cfg.tournament_size, rng)
        g1, g2 = parent1.genotype, parent2.genotype
        if k >= 2 and rng.random() < cfg.crossover_prob:
            g1, g2 = one_point_crossover(g1, g2, rng)
        # an odd trailing slot takes only the first child of the pair
        for genotype in (g1, g2)[: n - len(children)]:
            if rng.random() < cfg.mutation_prob:
                genotype = uniform_gene_mutation(
                    genotype, cfg.gene_mutation_prob, spec, rng
                )
            children.append(Individual(genotype))
    return children


def step_generation(
    pop: Population,
    cfg: GAConfig,
    spec: VocabSpec,
    rng: random.Random,
    session: ScoringSession,
) -> Population:
    """One generation turn: carry elites unchanged (keeping their scores),
    fill the rest with selected/crossed/mutated children, evaluate whatever
    is new, bump the generation index."""
    children = _breed(pop, cfg, spec, rng)
    nxt = Population(generation_index=pop.generation_index + 1, members=tuple(children))
    session.evaluate(nxt.members, nxt.generation_index)
    return nxt


def run(
    cfg: GAConfig,
    base: TokenVector,
    spec: VocabSpec,
    evaluator,
    sink: Optional[EvaluationSink] = None,
    *,
    prompt: Optional[Prompt] = None,
) -> BestSoFar:
    """Full evolutionary run: initialize, evaluate generation zero, iterate
    ``cfg.generations`` turns, and return the best individual ever scored.
    Every evaluation and per-generation statistic is streamed to the sink."""
    if prompt is None:
        prompt = Prompt(prompt_id="adhoc", text="")
    rng = random.Random(cfg.seed)
    session = ScoringSession(
        evaluator, prompt, cfg.weights, generation_seed=cfg.seed, sink=sink
    )
    pop = init_population(cfg, base, spec, rng)
    session.evaluate(pop.members, 0)
    if sink is not None:
        sink.on_generation(session.generation_stats(pop))
    for _ in range(cfg.generations):
        pop = step_generation(pop, cfg, spec, rng, session)
        if sink is not None:
            sink.on_generation(session.generation_stats(pop))
    return session.best
