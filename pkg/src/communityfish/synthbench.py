"""Generative simulation harness: planted-truth matrices and corpora,
recovery metrics, and the community-vs-unigram model comparison."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .corpus import Corpus, Document, count_bigrams, filter_bigrams
from .features import community_dtm, unigram_dtm, CountMatrix
from .graph import build_graph, louvain
from .scaling import FitConfig, ScalingError, ScalingResult, dispersion, fit


class SynthError(ValueError):
    """Raised for invalid simulation specs or persistently degenerate draws."""


@dataclass(frozen=True)
class SyntheticSpec:
    n_docs: int
    n_features: int
    expected_row_total: int
    seed: int
    theta_star: np.ndarray
    beta_star: np.ndarray
    psi_star: np.ndarray
    alpha_star: np.ndarray

    @classmethod
    def create(
        cls,
        n_docs: int = 25,
        n_features: int = 40,
        expected_row_total: int = 500,
        seed: int = 0,
        beta_scale: float = 1.0,
    ) -> "SyntheticSpec":
        if n_docs < 2 or n_features < 2 or expected_row_total < 1:
            raise SynthError("spec dimensions must be positive (>= 2 docs/features)")
        rng = np.random.default_rng(seed)
        theta = rng.normal(size=n_docs)
        theta = (theta - theta.mean()) / theta.std(ddof=1)
        beta = rng.normal(scale=beta_scale, size=n_features)
        psi = rng.normal(scale=0.5, size=n_features)
        alpha = rng.normal(scale=0.3, size=n_docs)
        alpha[0] = 0.0
        # shift psi so the average expected row total hits the target
        rates = np.exp(alpha[:, None] + psi[None, :] + theta[:, None] * beta[None, :])
        psi = psi + np.log(expected_row_total / rates.sum(axis=1).mean())
        return cls(
            n_docs=n_docs,
            n_features=n_features,
            expected_row_total=expected_row_total,
            seed=seed,
            theta_star=theta,
            beta_star=beta,
            psi_star=psi,
            alpha_star=alpha,
        )


def generate_matrix(spec: SyntheticSpec) -> tuple[CountMatrix, SyntheticSpec]:
    """Draw counts from the exact Poisson model; degenerate draws (all-zero
    row or column) are resampled up to 10 times."""
    rng = np.random.default_rng(spec.seed)
    rates = np.exp(
        spec.alpha_star[:, None]
        + spec.psi_star[None, :]
        + spec.theta_star[:, None] * spec.beta_star[None, :]
    )
    for _ in range(10):
        y = rng.poisson(rates)
        if (y.sum(axis=1) > 0).all() and (y.sum(axis=0) > 0).all():
            matrix = CountMatrix(
                doc_ids=tuple(f"doc_{i}" for i in range(spec.n_docs)),
                feature_labels=tuple(f"feat_{j}" for j in range(spec.n_features)),
                counts=y,
            )
            return matrix, spec
    raise SynthError("persistent degenerate draws: all-zero row or column")


@dataclass(frozen=True)
class PlantedCorpusSpec:
    """Corpus generator spec: documents are streams of word runs, each run
    drawn from one planted community with a theta-dependent intensity."""

    communities: tuple[tuple[str, ...], ...]
    polarity: tuple[float, ...]  # per-community log-rate slope in theta
    n_docs: int = 20
    runs_per_doc: int = 40
    run_length: int = 10
    # Dirichlet concentration of per-document word preferences inside a
    # community; small values give each document idiosyncratic word choice
    # (community totals are unaffected, word-level counts become noisy)
    word_concentration: float = 1.0
    seed: int = 0
    theta_star: np.ndarray | None = None

    def __post_init__(self):
        if len(self.communities) < 2:
            raise SynthError("need >= 2 planted communities")
        if len(self.polarity) != len(self.communities):
            raise SynthError("polarity must match the number of communities")
        if self.n_docs < 1:
            raise SynthError("need at least one document")
        for com in self.communities:
            if len(com) < 2:
                raise SynthError("planted communities need >= 2 words")


def generate_corpus(
    spec: PlantedCorpusSpec, doc_metadata: list[dict] | None = None
) -> tuple[Corpus, PlantedCorpusSpec]:
    """Sample documents so that each planted community's words co-occur
    adjacently within runs, with run frequencies following the planted
    theta-dependent intensities."""
    rng = np.random.default_rng(spec.seed)
    theta = spec.theta_star
    if theta is None:
        theta = rng.normal(size=spec.n_docs)
        theta = (theta - theta.mean()) / theta.std(ddof=1)
    polarity = np.asarray(spec.polarity)
    docs = []
    for i in range(spec.n_docs):
        weights = np.exp(polarity * theta[i])
        probs = weights / weights.sum()
        word_prefs = [
            rng.dirichlet(np.full(len(com), spec.word_concentration))
            for com in spec.communities
        ]
        tokens: list[str] = []
        for _ in range(spec.runs_per_doc):
            c = int(rng.choice(len(spec.communities), p=probs))
            words = spec.communities[c]
            pref = word_prefs[c]
            prev = None
            for _ in range(spec.run_length):
                if prev is not None and len(words) > 1:
                    p = pref.copy()
                    p[words.index(prev)] = 0.0
                    p = p / p.sum()
                else:
                    p = pref
                w = words[int(rng.choice(len(words), p=p))]
                tokens.append(w)
                prev = w
        meta = dict(doc_metadata[i]) if doc_metadata else {}
        meta.setdefault("theta_star", f"{theta[i]:.6f}")
        docs.append(
            Document(id=f"doc_{i}", text=" ".join(tokens), metadata=meta,
                     tokens=tuple(tokens))
        )
    return Corpus(tuple(docs)), replace(spec, theta_star=theta)


def recovery_report(theta_star: np.ndarray, result: ScalingResult) -> dict:
    """Recovery metrics for a fit against the planted positions, after sign
    alignment (the model's direction is arbitrary)."""
    theta_hat = result.params.theta
    if theta_hat.shape != theta_star.shape:
        raise SynthError("dimension mismatch between truth and fit")
    sign = 1.0 if np.corrcoef(theta_hat, theta_star)[0, 1] >= 0 else -1.0
    aligned = sign * theta_hat
    pearson = float(np.corrcoef(aligned, theta_star)[0, 1])
    spearman = float(stats.spearmanr(aligned, theta_star).statistic)
    # affine alignment before RMSE: truth regressed on the aligned estimate
    slope, intercept = np.polyfit(aligned, theta_star, 1)
    rmse = float(np.sqrt(np.mean((slope * aligned + intercept - theta_star) ** 2)))
    report = {
        "pearson": pearson,
        "spearman": spearman,
        "rmse_affine": rmse,
        "sign": sign,
    }
    if result.theta_ci_low is not None:
        covered = (sign * result.theta_ci_low <= theta_star) & (
            theta_star <= sign * result.theta_ci_high
        ) if sign > 0 else (
            (-result.theta_ci_high <= theta_star) & (theta_star <= -result.theta_ci_low)
        )
        report["ci_coverage"] = float(np.mean(covered))
    return report


@dataclass(frozen=True)
class ComparisonReport:
    k_community_features: int | None
    vocabulary_size: int | None
    runtime_community: float | None
    runtime_unigram: float | None
    rank_correlation: float | None
    dispersion_community: float | None
    dispersion_unigram: float | None
    community_result: ScalingResult | None
    unigram_result: ScalingResult | None
    errors: dict = field(default_factory=dict)


def run_community_pipeline(
    corpus: Corpus,
    bigram_threshold: int,
    config: FitConfig,
    min_community_size: int = 2,
    strict_greater: bool = False,
    bigram_match: bool = False,
):
    """Full community branch: bigram graph -> clustering -> DTM -> fit."""
    counts = filter_bigrams(count_bigrams(corpus), bigram_threshold, strict_greater)
    graph = build_graph(counts)
    partition = louvain(graph, seed=config.seed, min_community_size=min_community_size)
    matrix, trim_report = community_dtm(corpus, partition, bigram_match=bigram_match)
    result = fit(matrix, config)
    return result, partition, trim_report


def compare_models(
    corpus: Corpus,
    bigram_threshold: int,
    config: FitConfig,
    unigram_min_count: int = 1,
    min_community_size: int = 2,
) -> ComparisonReport:
    """Fit the community-feature model and the unigram baseline on the same
    corpus; one branch failing still reports the other."""
    if len(corpus) == 0:
        raise SynthError("empty corpus")
    errors: dict = {}
    com_result = uni_result = None
    k = vocab = None
    rt_com = rt_uni = None
    try:
        t0 = time.perf_counter()
        com_result, partition, _ = run_community_pipeline(
            corpus, bigram_threshold, config, min_community_size
        )
        rt_com = time.perf_counter() - t0
        k = com_result.matrix.shape[1]
    except (ValueError, ScalingError) as exc:
        errors["community"] = str(exc)
    try:
        t0 = time.perf_counter()
        uni_matrix, _ = unigram_dtm(corpus, min_count=unigram_min_count)
        uni_result = fit(uni_matrix, config)
        rt_uni = time.perf_counter() - t0
        vocab = uni_matrix.shape[1]
    except (ValueError, ScalingError) as exc:
        errors["unigram"] = str(exc)
    rank_corr = None
    if com_result is not None and uni_result is not None:
        common = [d for d in com_result.matrix.doc_ids if d in set(uni_result.matrix.doc_ids)]
        if len(common) >= 3:
            ci = {d: i for i, d in enumerate(com_result.matrix.doc_ids)}
            ui = {d: i for i, d in enumerate(uni_result.matrix.doc_ids)}
            tc = np.array([com_result.params.theta[ci[d]] for d in common])
            tu = np.array([uni_result.params.theta[ui[d]] for d in common])
            rank_corr = float(stats.spearmanr(tc, tu).statistic)
    return ComparisonReport(
        k_community_features=k,
        vocabulary_size=vocab,
        runtime_community=rt_com,
        runtime_unigram=rt_uni,
        rank_correlation=rank_corr,
        dispersion_community=(
            dispersion(com_result.matrix, com_result.params) if com_result else None
        ),
        dispersion_unigram=(
            dispersion(uni_result.matrix, uni_result.params) if uni_result else None
        ),
        community_result=com_result,
        unigram_result=uni_result,
        errors=errors,
    )
