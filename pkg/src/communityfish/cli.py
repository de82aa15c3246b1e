"""Batch command-line front end.

Subcommands: ``communities``, ``scale``, ``compare``, ``simulate``.
Configuration is a flat ``key = value`` text file; command-line flags win
over file values. Exit codes: 1 IO/config error, 2 empty pipeline stage,
3 estimation failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import (
    Corpus,
    CorpusError,
    apply_lemmas,
    count_bigrams,
    filter_bigrams,
    load_corpus,
    read_lemma_table,
    read_stopwords,
    tokenize,
    TokenizerConfig,
)
from .features import MatrixError, community_dtm, unigram_dtm
from .graph import (
    GraphError,
    build_graph,
    export_partition_csv,
    leiden,
    louvain,
    modularity,
    Partition,
)
from .scaling import (
    FitConfig,
    ScalingError,
    ScalingResult,
    analytic_theta_se,
    bootstrap,
    dispersion,
    fit,
)
from .synthbench import (
    SyntheticSpec,
    compare_models,
    generate_matrix,
    recovery_report,
)

EXIT_CONFIG = 1
EXIT_EMPTY = 2
EXIT_ESTIMATION = 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    input: str = ""
    format: str = "jsonl"
    stopwords: str = ""
    lemmas: str = ""
    min_bigram_count: int = 30
    strict_greater: bool = False
    clustering: str = "louvain"
    min_community_size: int = 2
    dtm: str = "member-count"
    unigram_min_count: int = 1
    tol: float = 1e-8
    max_iter: int = 500
    anchor_low: str = ""
    anchor_high: str = ""
    clamp: float = 30.0
    bootstrap_b: int = 200
    seed: int = 0
    out: str = "run_output"

    @classmethod
    def from_file(cls, path: Path) -> "RunConfig":
        if not path.exists():
            raise CliError(f"config file not found: {path}", EXIT_CONFIG)
        values = {}
        fields = {f.name: f.type for f in dataclasses.fields(cls)}
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key = value", EXIT_CONFIG)
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in fields:
                raise CliError(f"{path}:{lineno}: unknown config key {key!r}", EXIT_CONFIG)
            values[key] = _coerce(key, raw.strip())
        return cls(**values)


def _coerce(key: str, raw: str):
    default = getattr(RunConfig(), key)
    if isinstance(default, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise CliError(f"config key {key!r}: expected boolean, got {raw!r}", EXIT_CONFIG)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="communityfish",
        description="Community-based and unigram Poisson document scaling.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("communities", "detect word communities and export them"),
        ("scale", "run the full scaling pipeline"),
        ("compare", "fit community and unigram models side by side"),
        ("simulate", "planted-truth recovery simulation"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--quiet", action="store_true")
        if name in ("communities", "scale", "compare"):
            p.add_argument("--input", help="corpus path")
            p.add_argument("--format", choices=["jsonl", "text-directory", "csv"])
            p.add_argument("--pi", type=int, dest="min_bigram_count",
                           help="minimum bigram count")
            p.add_argument("--clustering", choices=["louvain", "leiden"])
        if name == "scale":
            p.add_argument("--baseline", action="store_true",
                           help="fit the unigram baseline instead of community features")
            p.add_argument("--no-bootstrap", action="store_true")
            p.add_argument("--se", choices=["bootstrap", "analytic"], default="bootstrap")
        if name == "simulate":
            p.add_argument("spec_file", nargs="?", help="simulation spec (key=value)")
    return parser


def _resolve_config(args) -> RunConfig:
    config = RunConfig.from_file(Path(args.config)) if args.config else RunConfig()
    for key in ("input", "format", "min_bigram_count", "clustering", "seed", "out"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(config, key, val)
    return config


def _load_pipeline_corpus(config: RunConfig) -> Corpus:
    if not config.input:
        raise CliError("no input corpus configured (set input= or --input)", EXIT_CONFIG)
    try:
        corpus = load_corpus(config.input, config.format)
    except CorpusError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    stopwords = frozenset()
    if config.stopwords:
        stopwords = read_stopwords(config.stopwords)
    rules = TokenizerConfig(stopwords=stopwords)
    corpus = corpus.map_documents(lambda d: tokenize(d, rules))
    if config.lemmas:
        table = read_lemma_table(config.lemmas)
        corpus = corpus.map_documents(lambda d: apply_lemmas(d, table))
    return corpus


def _detect_communities(corpus: Corpus, config: RunConfig):
    counts = count_bigrams(corpus)
    kept = filter_bigrams(counts, config.min_bigram_count, config.strict_greater)
    if not kept.pairs:
        raise CliError("no bigrams survive threshold", EXIT_EMPTY)
    graph = build_graph(kept)
    cluster = louvain if config.clustering == "louvain" else leiden
    partition = cluster(graph, seed=config.seed,
                        min_community_size=config.min_community_size)
    if not partition.assignment:
        raise CliError("no communities", EXIT_EMPTY)
    return graph, partition


def _fit_config(config: RunConfig) -> FitConfig:
    return FitConfig(
        tol=config.tol,
        max_iter=config.max_iter,
        anchor_low=config.anchor_low or None,
        anchor_high=config.anchor_high or None,
        linear_predictor_clamp=config.clamp,
        seed=config.seed,
    )


def _write_manifest(out: Path, config: RunConfig, extra: dict) -> None:
    config_dict = dataclasses.asdict(config)
    blob = json.dumps(config_dict, sort_keys=True).encode()
    manifest = {
        "version": __version__,
        "config": config_dict,
        "config_hash": hashlib.sha256(blob).hexdigest(),
        **extra,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def cmd_communities(args) -> int:
    config = _resolve_config(args)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = _load_pipeline_corpus(config)
    graph, partition = _detect_communities(corpus, config)
    export_partition_csv(partition, out / "communities.csv")
    sizes = sorted((len(v) for v in partition.members.values()), reverse=True)
    stats = {
        "num_communities": partition.num_communities,
        "community_sizes": sizes,
        "modularity": partition.quality,
        "num_nodes": len(graph),
        "num_edges": int(sum(len(n) for n in graph.adjacency) // 2),
        "total_weight": graph.total_weight,
    }
    (out / "graph_stats.json").write_text(json.dumps(stats, indent=2))
    _write_manifest(out, config, {"command": "communities",
                                  "k": partition.num_communities,
                                  "exit_status": 0})
    if not args.quiet:
        print(f"wrote {out}/communities.csv ({partition.num_communities} communities, "
              f"Q={partition.quality:.4f})")
    return 0


def _write_positions(out: Path, corpus: Corpus, result: ScalingResult) -> None:
    meta_keys = sorted({k for d in corpus.documents for k in d.metadata})
    meta = {d.id: d.metadata for d in corpus.documents}
    with open(out / "positions.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id", "theta", "se", "ci_low", "ci_high", "alpha", *meta_keys])
        for i, doc_id in enumerate(result.matrix.doc_ids):
            se = f"{result.theta_se[i]:.6f}" if result.theta_se is not None else ""
            lo = f"{result.theta_ci_low[i]:.6f}" if result.theta_ci_low is not None else ""
            hi = f"{result.theta_ci_high[i]:.6f}" if result.theta_ci_high is not None else ""
            row = [
                doc_id,
                f"{result.params.theta[i]:.6f}",
                se,
                lo,
                hi,
                f"{result.params.alpha[i]:.6f}",
            ]
            row += [meta.get(doc_id, {}).get(k, "") for k in meta_keys]
            writer.writerow(row)


def _write_features(out: Path, result: ScalingResult) -> None:
    with open(out / "features.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "beta", "psi"])
        for j, label in enumerate(result.matrix.feature_labels):
            writer.writerow([label, f"{result.params.beta[j]:.6f}",
                             f"{result.params.psi[j]:.6f}"])


def cmd_scale(args) -> int:
    config = _resolve_config(args)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = _load_pipeline_corpus(config)
    partition: Partition | None = None
    if args.baseline:
        try:
            matrix, trim_report = unigram_dtm(corpus, min_count=config.unigram_min_count)
        except MatrixError as exc:
            raise CliError(str(exc), EXIT_EMPTY) from exc
    else:
        _, partition = _detect_communities(corpus, config)
        try:
            matrix, trim_report = community_dtm(
                corpus, partition, bigram_match=(config.dtm == "bigram-match")
            )
        except MatrixError as exc:
            raise CliError(str(exc), EXIT_EMPTY) from exc
    fit_cfg = _fit_config(config)
    try:
        result = fit(matrix, fit_cfg)
        if not args.no_bootstrap and config.bootstrap_b > 0:
            if args.se == "analytic":
                se = analytic_theta_se(result)
                result = dataclasses.replace(
                    result,
                    theta_se=se,
                    theta_ci_low=result.params.theta - 1.96 * se,
                    theta_ci_high=result.params.theta + 1.96 * se,
                )
            else:
                result = bootstrap(matrix, result, B=config.bootstrap_b,
                                   seed=config.seed, config=fit_cfg)
    except ScalingError as exc:
        raise CliError(str(exc), EXIT_ESTIMATION) from exc
    _write_positions(out, corpus, result)
    _write_features(out, result)
    report = {
        "converged": result.converged,
        "iterations": len(result.loglik_trace) - 1,
        "log_likelihood": result.loglik_trace[-1],
        "dispersion": dispersion(matrix, result.params),
        "runtime_seconds": result.runtime,
        "clamp_activated": result.clamp_activated,
        "matrix_shape": list(matrix.shape),
        "dropped_documents": list(trim_report.dropped_doc_ids),
        "bootstrap_failures": result.bootstrap_failures,
        "baseline": bool(args.baseline),
    }
    (out / "fit_report.json").write_text(json.dumps(report, indent=2))
    _write_manifest(out, config, {
        "command": "scale",
        "k": partition.num_communities if partition else None,
        "matrix_shape": list(matrix.shape),
        "exit_status": 0,
    })
    if not args.quiet:
        print(f"wrote {out}/positions.csv ({matrix.shape[0]} documents, "
              f"{matrix.shape[1]} features)")
    return 0


def cmd_compare(args) -> int:
    config = _resolve_config(args)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = _load_pipeline_corpus(config)
    report = compare_models(
        corpus,
        bigram_threshold=config.min_bigram_count,
        config=_fit_config(config),
        unigram_min_count=config.unigram_min_count,
        min_community_size=config.min_community_size,
    )
    if report.community_result is None and report.unigram_result is None:
        raise CliError(f"both branches failed: {report.errors}", EXIT_ESTIMATION)
    com, uni = report.community_result, report.unigram_result
    doc_ids = sorted(
        set(com.matrix.doc_ids if com else ()) | set(uni.matrix.doc_ids if uni else ())
    )
    ci = {d: i for i, d in enumerate(com.matrix.doc_ids)} if com else {}
    ui = {d: i for i, d in enumerate(uni.matrix.doc_ids)} if uni else {}
    with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id", "theta_community", "theta_unigram"])
        for d in doc_ids:
            tc = f"{com.params.theta[ci[d]]:.6f}" if com and d in ci else ""
            tu = f"{uni.params.theta[ui[d]]:.6f}" if uni and d in ui else ""
            writer.writerow([d, tc, tu])
    summary = {
        "k_community_features": report.k_community_features,
        "vocabulary_size": report.vocabulary_size,
        "runtime_community": report.runtime_community,
        "runtime_unigram": report.runtime_unigram,
        "rank_correlation": report.rank_correlation,
        "dispersion_community": report.dispersion_community,
        "dispersion_unigram": report.dispersion_unigram,
        "errors": report.errors,
    }
    (out / "report.json").write_text(json.dumps(summary, indent=2))
    _write_manifest(out, config, {"command": "compare", "exit_status": 0})
    if not args.quiet:
        print(f"wrote {out}/comparison.csv")
    return 0


_SIM_DEFAULTS = {"n_docs": 25, "n_features": 40, "expected_row_total": 500,
                 "seed": 0, "bootstrap_b": 0}


def cmd_simulate(args) -> int:
    config = _resolve_config(args)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    sim = dict(_SIM_DEFAULTS)
    if args.spec_file:
        path = Path(args.spec_file)
        if not path.exists():
            raise CliError(f"spec file not found: {path}", EXIT_CONFIG)
        for lineno, line in enumerate(path.read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in sim:
                raise CliError(f"{path}:{lineno}: unknown spec key {key!r}", EXIT_CONFIG)
            sim[key] = int(raw.strip())
    if args.seed is not None:
        sim["seed"] = args.seed
    spec = SyntheticSpec.create(
        n_docs=sim["n_docs"],
        n_features=sim["n_features"],
        expected_row_total=sim["expected_row_total"],
        seed=sim["seed"],
    )
    matrix, spec = generate_matrix(spec)
    fit_cfg = _fit_config(config)
    try:
        result = fit(matrix, fit_cfg)
        if sim["bootstrap_b"] > 0:
            result = bootstrap(matrix, result, B=sim["bootstrap_b"],
                               seed=sim["seed"], config=fit_cfg)
    except ScalingError as exc:
        raise CliError(str(exc), EXIT_ESTIMATION) from exc
    metrics = recovery_report(spec.theta_star, result)
    report = {
        "spec": {k: v for k, v in sim.items()},
        "converged": result.converged,
        "log_likelihood": result.loglik_trace[-1],
        **metrics,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2))
    _write_manifest(out, config, {"command": "simulate", "exit_status": 0})
    if not args.quiet:
        print(f"recovery pearson = {metrics['pearson']:.4f}")
    return 0


_COMMANDS = {
    "communities": cmd_communities,
    "scale": cmd_scale,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (CorpusError, GraphError, MatrixError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except ScalingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
