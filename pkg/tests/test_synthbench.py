import dataclasses

import numpy as np
import pytest

from communityfish.graph import build_graph, louvain
from communityfish.corpus import count_bigrams, filter_bigrams
from communityfish.scaling import FitConfig, bootstrap, fit
from communityfish.synthbench import (
    PlantedCorpusSpec,
    SynthError,
    SyntheticSpec,
    compare_models,
    generate_corpus,
    generate_matrix,
    recovery_report,
    run_community_pipeline,
)

COM_A = tuple(f"alpha{i}" for i in range(6))
COM_B = tuple(f"beta{i}" for i in range(6))


def planted_spec(seed, polarity=0.6, n_docs=20, runs=150, run_length=6):
    return PlantedCorpusSpec(
        communities=(COM_A, COM_B),
        polarity=(polarity, -polarity),
        n_docs=n_docs,
        runs_per_doc=runs,
        run_length=run_length,
        word_concentration=0.5,
        seed=seed,
    )


class TestGenerateMatrix:
    def test_deterministic(self):
        spec = SyntheticSpec.create(seed=4)
        a, _ = generate_matrix(spec)
        b, _ = generate_matrix(spec)
        assert (a.counts == b.counts).all()

    def test_expected_row_total_approximate(self):
        spec = SyntheticSpec.create(25, 40, 500, seed=5)
        matrix, _ = generate_matrix(spec)
        assert 350 < matrix.counts.sum(axis=1).mean() < 700

    def test_recovery_on_default_task(self):
        spec = SyntheticSpec.create(25, 40, 500, seed=6)
        matrix, spec = generate_matrix(spec)
        result = fit(matrix, FitConfig(seed=6))
        assert recovery_report(spec.theta_star, result)["pearson"] >= 0.95

    def test_null_discrimination_gives_small_beta(self):
        spec = SyntheticSpec.create(30, 20, 800, seed=8)
        spec = dataclasses.replace(spec, beta_star=np.zeros(20))
        matrix, _ = generate_matrix(spec)
        result = fit(matrix, FitConfig(seed=8))
        boot = bootstrap(matrix, result, B=40, seed=8)
        # beta magnitudes indistinguishable from zero for most features:
        # compare against the spread of bootstrap thetas as a rough scale
        assert np.median(np.abs(result.params.beta)) < 0.3

    def test_invalid_spec(self):
        with pytest.raises(SynthError):
            SyntheticSpec.create(n_docs=1)


class TestGenerateCorpus:
    def test_deterministic(self):
        a, _ = generate_corpus(planted_spec(3))
        b, _ = generate_corpus(planted_spec(3))
        assert [d.tokens for d in a.documents] == [d.tokens for d in b.documents]

    def test_louvain_recovers_planted_partition(self):
        corpus, _ = generate_corpus(planted_spec(1))
        counts = filter_bigrams(count_bigrams(corpus), 30)
        part = louvain(build_graph(counts), seed=1)
        got = {frozenset(v) for v in part.members.values()}
        assert got == {frozenset(COM_A), frozenset(COM_B)}

    def test_shared_community_has_small_beta(self):
        shared = tuple(f"shared{i}" for i in range(6))
        spec = PlantedCorpusSpec(
            communities=(COM_A, COM_B, shared),
            polarity=(0.8, -0.8, 0.0),
            n_docs=20,
            runs_per_doc=150,
            run_length=6,
            word_concentration=2.0,
            seed=2,
        )
        corpus, spec = generate_corpus(spec)
        result, partition, _ = run_community_pipeline(corpus, 30, FitConfig(seed=2))
        labels = result.matrix.feature_labels
        shared_j = next(j for j, l in enumerate(labels) if "shared" in l)
        others = [j for j in range(len(labels)) if j != shared_j]
        assert abs(result.params.beta[shared_j]) < min(
            abs(result.params.beta[j]) for j in others
        )

    def test_zero_documents_rejected(self):
        with pytest.raises(SynthError):
            PlantedCorpusSpec((COM_A, COM_B), (1.0, -1.0), n_docs=0)

    def test_single_community_rejected(self):
        with pytest.raises(SynthError):
            PlantedCorpusSpec((COM_A,), (1.0,))


class TestRecoveryReport:
    def test_exact_recovery(self):
        spec = SyntheticSpec.create(10, 12, 400, seed=9)
        matrix, spec = generate_matrix(spec)
        result = fit(matrix)
        fake = dataclasses.replace(result, params=dataclasses.replace(
            result.params, theta=spec.theta_star))
        report = recovery_report(spec.theta_star, fake)
        assert report["pearson"] == pytest.approx(1.0)
        assert report["rmse_affine"] == pytest.approx(0.0, abs=1e-10)

    def test_sign_alignment(self):
        spec = SyntheticSpec.create(10, 12, 400, seed=10)
        matrix, spec = generate_matrix(spec)
        result = fit(matrix)
        fake = dataclasses.replace(result, params=dataclasses.replace(
            result.params, theta=-spec.theta_star))
        assert recovery_report(spec.theta_star, fake)["pearson"] == pytest.approx(1.0)

    def test_independent_estimate_has_low_correlation(self):
        rng = np.random.default_rng(987654)
        spec = SyntheticSpec.create(40, 12, 400, seed=11)
        matrix, spec = generate_matrix(spec)
        result = fit(matrix)
        noise = rng.normal(size=40)
        noise = (noise - noise.mean()) / noise.std(ddof=1)
        fake = dataclasses.replace(result, params=dataclasses.replace(
            result.params, theta=noise))
        assert abs(recovery_report(spec.theta_star, fake)["pearson"]) < 0.5

    def test_dimension_mismatch(self):
        spec = SyntheticSpec.create(10, 12, 400, seed=12)
        matrix, spec = generate_matrix(spec)
        result = fit(matrix)
        with pytest.raises(SynthError):
            recovery_report(spec.theta_star[:-1], result)


class TestCompareModels:
    def test_community_branch_has_fewer_features(self):
        corpus, _ = generate_corpus(planted_spec(13))
        report = compare_models(corpus, 30, FitConfig(seed=13))
        assert report.errors == {}
        assert report.k_community_features < report.vocabulary_size

    def test_reports_both_thetas_and_rank_correlation(self):
        corpus, _ = generate_corpus(planted_spec(14))
        report = compare_models(corpus, 30, FitConfig(seed=14))
        assert report.rank_correlation is not None
        assert report.runtime_community > 0
        assert report.runtime_unigram > 0

    def test_one_branch_failing_still_reports_other(self):
        corpus, _ = generate_corpus(planted_spec(15))
        # threshold too high: community branch dies, unigram survives
        report = compare_models(corpus, 10**6, FitConfig(seed=15))
        assert "community" in report.errors
        assert report.unigram_result is not None

    def test_empty_corpus_rejected(self):
        from communityfish.corpus import Corpus
        with pytest.raises(SynthError):
            compare_models(Corpus(()), 30, FitConfig())
