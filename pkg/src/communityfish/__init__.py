"""Community-based and unigram Poisson document scaling."""

__version__ = "0.1.0"

from .corpus import (
    BigramCounts,
    Corpus,
    CorpusError,
    Document,
    TokenizerConfig,
    apply_lemmas,
    count_bigrams,
    filter_bigrams,
    load_corpus,
    tokenize,
)
from .features import CountMatrix, MatrixError, community_dtm, trim, unigram_dtm
from .graph import (
    GraphError,
    Partition,
    WordGraph,
    brute_force_best_partition,
    build_graph,
    leiden,
    louvain,
    modularity,
)
from .scaling import (
    FitConfig,
    ScalingError,
    ScalingParams,
    ScalingResult,
    analytic_theta_se,
    bootstrap,
    dispersion,
    fit,
    initialize,
    log_likelihood,
)
from .synthbench import (
    ComparisonReport,
    PlantedCorpusSpec,
    SyntheticSpec,
    compare_models,
    generate_corpus,
    generate_matrix,
    recovery_report,
)

__all__ = [
    "BigramCounts",
    "ComparisonReport",
    "Corpus",
    "CorpusError",
    "CountMatrix",
    "Document",
    "FitConfig",
    "GraphError",
    "MatrixError",
    "Partition",
    "PlantedCorpusSpec",
    "ScalingError",
    "ScalingParams",
    "ScalingResult",
    "SyntheticSpec",
    "TokenizerConfig",
    "WordGraph",
    "analytic_theta_se",
    "apply_lemmas",
    "bootstrap",
    "brute_force_best_partition",
    "build_graph",
    "community_dtm",
    "compare_models",
    "count_bigrams",
    "dispersion",
    "filter_bigrams",
    "fit",
    "generate_corpus",
    "generate_matrix",
    "initialize",
    "leiden",
    "load_corpus",
    "log_likelihood",
    "louvain",
    "modularity",
    "recovery_report",
    "tokenize",
    "trim",
    "unigram_dtm",
]
