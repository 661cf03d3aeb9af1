"""Command-line interface.

Subcommands: optimize (one prompt, one method), experiment (full grid from a
config file), aggregate (run directory -> summary CSV), report (summary CSV ->
rendered table), sample-prompts (per-category sampling of a dataset).

Exit codes: 0 success, 1 partial failures, 2 configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import random
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .engine import GAConfig
from .evaluators import GenerationParams, RemoteEvaluator
from .fitness import FitnessWeights
from .genome import Prompt, VocabSpec, fixture_vocab
from .harness import (
    METHODS,
    ExperimentConfig,
    load_prompts_csv,
    demo_prompts,
    run_experiment,
    run_unit,
    sample_prompts,
    save_prompts_csv,
)
from .reporting import (
    aggregate,
    ingest_external_scores,
    parse_summary_csv,
    records_from_run_dir,
    render_csv,
    render_text,
)

ENDPOINT_ENV = "TOKEVO_ENDPOINT"


class ConfigError(Exception):
    """Bad flags, config file, or input data."""


def _resolve_endpoint(flag_value, config_value=None):
    return flag_value or os.environ.get(ENDPOINT_ENV) or config_value


def _ga_config(data: dict, seed: int) -> GAConfig:
    weights = FitnessWeights(
        aesthetic=float(data.get("weight_aesthetic", 0.4)),
        clip=float(data.get("weight_clip", 0.6)),
    )
    return GAConfig(
        population_size=int(data.get("population_size", 64)),
        generations=int(data.get("generations", 100)),
        crossover_prob=float(data.get("crossover_prob", 0.7)),
        mutation_prob=float(data.get("mutation_prob", 0.9)),
        gene_mutation_prob=float(data.get("gene_mutation_prob", 0.1)),
        tournament_size=int(data.get("tournament_size", 3)),
        elite_count=int(data.get("elite_count", 1)),
        weights=weights,
        seed=seed,
    )


def _resolve_vocab(vocab_opt, evaluator, endpoint, content_len=None) -> VocabSpec:
    if vocab_opt is None:
        # remote runs must match the service's encoder, oracle runs the fixture
        vocab_opt = "meta" if evaluator == "remote" else "fixture"
    if vocab_opt == "fixture":
        spec = fixture_vocab()
    elif vocab_opt == "meta":
        if evaluator != "remote" or not endpoint:
            raise ConfigError("vocab 'meta' needs a remote evaluator with an endpoint")
        spec = VocabSpec.from_meta(RemoteEvaluator(endpoint).fetch_meta(), content_len)
        return spec
    else:
        spec = VocabSpec.load(vocab_opt)
    if content_len is not None:
        spec = replace(spec, content_len=int(content_len))
    return spec


def _load_experiment_config(path, args) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping of keys to values")

    evaluator = str(data.get("evaluator", "oracle"))
    endpoint = _resolve_endpoint(args.endpoint, data.get("endpoint"))
    try:
        vocab = _resolve_vocab(
            data.get("vocab"), evaluator, endpoint, data.get("content_len")
        )
    except (OSError, ValueError) as exc:
        raise ConfigError(f"bad vocab setting: {exc}") from exc

    dataset = data.get("dataset")
    try:
        prompts = load_prompts_csv(dataset) if dataset else demo_prompts()
    except (OSError, ValueError) as exc:
        raise ConfigError(f"bad prompt dataset: {exc}") from exc

    wanted = data.get("prompts")
    if wanted:
        by_id = {p.prompt_id: p for p in prompts}
        missing = [pid for pid in wanted if pid not in by_id]
        if missing:
            raise ConfigError(f"prompt ids not in dataset: {missing}")
        prompts = [by_id[pid] for pid in wanted]
    per_category = data.get("per_category")
    if per_category is not None:
        rng = random.Random(int(data.get("sample_seed", 0)))
        try:
            prompts = sample_prompts(prompts, int(per_category), rng)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    seeds = data.get("seeds", [0])
    if isinstance(seeds, int):
        seeds = [seeds]
    gen_data = data.get("generation") or {}
    try:
        return ExperimentConfig(
            prompts=prompts,
            output_dir=Path(args.output_dir or data.get("output_dir", "runs/experiment")),
            methods=tuple(data.get("methods", list(METHODS))),
            ga=_ga_config(data.get("ga") or {}, seed=int(seeds[0])),
            eval_budget=int(data.get("eval_budget", 6400)),
            seeds=tuple(int(s) for s in seeds),
            evaluator=evaluator,
            endpoint=endpoint,
            vocab=vocab,
            style_set_size=int(data.get("style_set_size", 50)),
            landscape_seed=int(data.get("landscape_seed", 0)),
            concurrency=int(data.get("concurrency", 1)),
            generation=GenerationParams(
                steps=int(gen_data.get("steps", 1)),
                guidance_scale=float(gen_data.get("guidance_scale", 0.0)),
                width=int(gen_data.get("width", 512)),
                height=int(gen_data.get("height", 512)),
                return_images=bool(gen_data.get("return_images", False)),
            ),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_optimize(args) -> int:
    endpoint = _resolve_endpoint(args.endpoint)
    if args.text:
        pid = args.prompt_id or "cli-" + hashlib.sha256(args.text.encode()).hexdigest()[:8]
        prompt = Prompt(prompt_id=pid, text=args.text, category="adhoc")
    else:
        if not args.dataset or not args.prompt_id:
            raise ConfigError("optimize needs either --text or --dataset with --prompt-id")
        prompts = load_prompts_csv(args.dataset)
        match = [p for p in prompts if p.prompt_id == args.prompt_id]
        if not match:
            raise ConfigError(f"prompt id {args.prompt_id!r} not found in {args.dataset}")
        prompt = match[0]

    try:
        vocab = _resolve_vocab(
            args.vocab,
            args.evaluator,
            endpoint,
            args.content_len,
        )
    except (OSError, ValueError) as exc:
        raise ConfigError(f"bad vocab setting: {exc}") from exc

    ga = _ga_config(
        {
            "population_size": args.population_size,
            "generations": args.generations,
            "crossover_prob": args.crossover_prob,
            "mutation_prob": args.mutation_prob,
            "gene_mutation_prob": args.gene_mutation_prob,
            "tournament_size": args.tournament_size,
            "elite_count": args.elite_count,
            "weight_aesthetic": args.weight_aesthetic,
            "weight_clip": args.weight_clip,
        },
        seed=args.seed,
    )
    try:
        cfg = ExperimentConfig(
            prompts=[prompt],
            output_dir=Path(args.out),
            methods=(args.method,),
            ga=ga,
            eval_budget=args.eval_budget or ga.population_size * ga.generations,
            seeds=(args.seed,),
            evaluator=args.evaluator,
            endpoint=endpoint,
            vocab=vocab,
            style_set_size=args.style_set_size,
            landscape_seed=args.landscape_seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    result = run_unit(prompt, args.method, args.seed, cfg)
    if result.status == "failed":
        print(f"unit failed: {result.error}", file=sys.stderr)
        return 1
    best = result.summary["best"]
    print(f"prompt      {prompt.prompt_id}")
    print(f"method      {args.method} (seed {args.seed}, {result.status})")
    print(f"evaluations {result.summary['n_evaluations']}")
    print(
        f"best        fitness {best['fitness']:.6f} "
        f"(aesthetic {best['aesthetic']:.4f}, clip {best['clip']:.4f}) "
        f"at evaluation {best['found_at_evaluation']}"
    )
    return 0


def cmd_experiment(args) -> int:
    cfg = _load_experiment_config(args.config, args)
    results = run_experiment(cfg)
    completed = sum(1 for r in results if r.status in ("complete", "skipped"))
    failed = [r for r in results if r.status == "failed"]
    print(f"{completed}/{len(results)} units complete, {len(failed)} failed")
    for r in failed:
        print(f"  failed: {r.prompt_id} {r.method} seed {r.seed}: {r.error}", file=sys.stderr)
    return 1 if failed else 0


def cmd_aggregate(args) -> int:
    records = records_from_run_dir(args.runs)
    if not records:
        raise ConfigError(f"no completed unit summaries under {args.runs}")
    for item in args.external or []:
        if "=" not in item:
            raise ConfigError("--external expects NAME=path.csv")
        name, path = item.split("=", 1)
        records.extend(ingest_external_scores(path, name.strip()))
    try:
        table = aggregate(records, baseline_method=args.baseline)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    csv_text = render_csv(table)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(csv_text)
        print(f"wrote {args.out}")
    print(render_text(table), end="")
    return 0


def cmd_report(args) -> int:
    try:
        table = parse_summary_csv(args.summary)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if args.format == "csv":
        print(render_csv(table), end="")
    else:
        print(render_text(table), end="")
    return 0


def cmd_sample_prompts(args) -> int:
    try:
        dataset = load_prompts_csv(args.dataset) if args.dataset else demo_prompts()
        chosen = sample_prompts(dataset, args.per_category, random.Random(args.seed))
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if args.out:
        save_prompts_csv(chosen, args.out)
        print(f"wrote {len(chosen)} prompts to {args.out}")
    else:
        for p in chosen:
            print(f"{p.prompt_id},{p.category},{p.challenge},{p.text}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tokevo",
        description="Evolve text-encoder token vectors against a scoring backend.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run one method on one prompt")
    p_opt.add_argument("--text", help="ad-hoc prompt text")
    p_opt.add_argument("--dataset", help="prompt CSV (with --prompt-id)")
    p_opt.add_argument("--prompt-id", help="prompt to pick from the dataset")
    p_opt.add_argument("--method", choices=METHODS, default="ga_mutated")
    p_opt.add_argument("--evaluator", choices=("oracle", "remote"), default="oracle")
    p_opt.add_argument("--endpoint", help=f"scoring service URL (or ${ENDPOINT_ENV})")
    p_opt.add_argument("--vocab", help="'fixture', 'meta', or a vocab JSON path")
    p_opt.add_argument("--content-len", type=int, help="genotype length override")
    p_opt.add_argument("--out", default="runs/optimize", help="output directory")
    p_opt.add_argument("--seed", type=int, default=0)
    p_opt.add_argument("--population-size", type=int, default=64)
    p_opt.add_argument("--generations", type=int, default=100)
    p_opt.add_argument("--crossover-prob", type=float, default=0.7)
    p_opt.add_argument("--mutation-prob", type=float, default=0.9)
    p_opt.add_argument("--gene-mutation-prob", type=float, default=0.1)
    p_opt.add_argument("--tournament-size", type=int, default=3)
    p_opt.add_argument("--elite-count", type=int, default=1)
    p_opt.add_argument("--weight-aesthetic", type=float, default=0.4)
    p_opt.add_argument("--weight-clip", type=float, default=0.6)
    p_opt.add_argument("--eval-budget", type=int, help="random_search evaluation budget")
    p_opt.add_argument("--style-set-size", type=int, default=50)
    p_opt.add_argument("--landscape-seed", type=int, default=0)
    p_opt.set_defaults(func=cmd_optimize)

    p_exp = sub.add_parser("experiment", help="run a full grid from a config file")
    p_exp.add_argument("--config", required=True, help="YAML experiment config")
    p_exp.add_argument("--output-dir", help="override the config's output_dir")
    p_exp.add_argument("--endpoint", help=f"override endpoint (or ${ENDPOINT_ENV})")
    p_exp.set_defaults(func=cmd_experiment)

    p_agg = sub.add_parser("aggregate", help="summarize a run directory")
    p_agg.add_argument("--runs", required=True, help="experiment output directory")
    p_agg.add_argument("--out", help="write the summary CSV here")
    p_agg.add_argument("--baseline", default="baseline_no_opt")
    p_agg.add_argument(
        "--external",
        action="append",
        help="ingest external per-prompt scores: NAME=path.csv (repeatable)",
    )
    p_agg.set_defaults(func=cmd_aggregate)

    p_rep = sub.add_parser("report", help="render a summary CSV")
    p_rep.add_argument("--summary", required=True, help="summary CSV from aggregate")
    p_rep.add_argument("--format", choices=("text", "csv"), default="text")
    p_rep.set_defaults(func=cmd_report)

    p_smp = sub.add_parser("sample-prompts", help="sample N prompts per category")
    p_smp.add_argument("--dataset", help="prompt CSV (bundled demo set if omitted)")
    p_smp.add_argument("--per-category", type=int, default=3)
    p_smp.add_argument("--seed", type=int, default=0)
    p_smp.add_argument("--out", help="write the sampled CSV here")
    p_smp.set_defaults(func=cmd_sample_prompts)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
