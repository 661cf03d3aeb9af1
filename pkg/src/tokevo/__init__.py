"""tokevo: evolutionary search over text-encoder token IDs, driven by a
weighted aesthetic/alignment fitness from a pluggable scoring backend."""

from .engine import (
    BestSoFar,
    GAConfig,
    Individual,
    Population,
    init_population,
    one_point_crossover,
    run,
    step_generation,
    tournament_select,
    uniform_gene_mutation,
)
from .evaluators import (
    CachedEvaluator,
    EvalRequest,
    EvalResult,
    OracleEvaluator,
    OracleSpec,
    RemoteEvaluator,
    oracle_score,
)
from .fitness import (
    FitnessScore,
    FitnessWeights,
    RawScores,
    combine,
    cosine_similarity,
    delta_percent,
    norm_aesthetic,
    norm_clip,
)
from .genome import (
    Prompt,
    TokenVector,
    VocabSpec,
    effective_length,
    fixture_vocab,
    genotype_from_prompt,
    validate,
)
from .harness import ExperimentConfig, random_search, run_experiment, sample_prompts
from .reporting import SummaryTable, aggregate, render_csv, render_text

__version__ = "0.1.0"
