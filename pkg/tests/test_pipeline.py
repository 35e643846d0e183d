import json

import pytest

from unaware.classifier import TrainConfig, evaluate
from unaware.corpus import load_corpus, save_corpus
from unaware.explainer import ExplainerConfig
from unaware.identifier import ProtectedCategory, save_annotations_tsv, Annotation
from unaware.pipeline import (
    FairnessStats,
    IdentifierSettings,
    PipelineConfig,
    PlanTemplate,
    compare_rankings,
    load_pipeline_config,
    render_report_table,
    report_payload,
    run_measurement,
    run_mitigation,
)
from unaware.synthetic import (
    POSITIVE,
    PlantedBiasSpec,
    make_planted_bias_corpus,
)

SPEC = PlantedBiasSpec(
    n_documents=800,
    n_filler=300,
    protected_doc_rate_positive=0.5,
    protected_doc_rate_negative=0.055,
)
TRAIN = TrainConfig(epochs=15, learning_rate=0.3, l2=1e-4, seed=0, batch_size=64)


def dictionary_file(tmp_path, spec=SPEC):
    path = tmp_path / "dictionary.tsv"
    lines = [f"{w}\t{c.value}\t100" for w, c in spec.protected_dictionary().items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_corpora(tmp_path, spec=SPEC, seeds=(11, 22)):
    train_path = tmp_path / "train.jsonl"
    unlabeled_path = tmp_path / "unlabeled.jsonl"
    save_corpus(make_planted_bias_corpus(spec, seed=seeds[0]), train_path)
    save_corpus(make_planted_bias_corpus(spec, seed=seeds[1]), unlabeled_path)
    return train_path, unlabeled_path


def make_config(tmp_path, strategy="MS2", top_k=60, output_dir=None, **kwargs):
    train_path, unlabeled_path = write_corpora(tmp_path)
    return PipelineConfig(
        training_corpus=str(train_path),
        unlabeled_corpus=str(unlabeled_path),
        target_class=POSITIVE,
        explainer=ExplainerConfig(method="linear-exact", top_k=top_k),
        identifier=IdentifierSettings(
            backend="dictionary", dictionary_path=str(dictionary_file(tmp_path))
        ),
        plan=PlanTemplate(strategy=strategy),
        train=TRAIN,
        output_dir=str(output_dir) if output_dir else None,
        **kwargs,
    )


class TestFairnessStats:
    def test_percent_must_match_counts(self):
        with pytest.raises(ValueError, match="percent"):
            FairnessStats(protected_count=10, top_n=100, percent=11.0, retained_from_original=0)

    def test_ratio_rendering_matches_report_style(self):
        stats = FairnessStats(protected_count=37, top_n=400, percent=9.25, retained_from_original=16)
        assert stats.ratio_text(show_retained=True) == "37/400 {16}"
        assert stats.ratio_text() == "37/400"

    def test_percent_display_rounds_to_whole(self):
        stats = FairnessStats(protected_count=93, top_n=400, percent=23.25, retained_from_original=93)
        assert f"{stats.percent:.0f}%" == "23%"

    def test_retained_bounded_by_protected(self):
        with pytest.raises(ValueError, match="retained"):
            FairnessStats(protected_count=2, top_n=10, percent=20.0, retained_from_original=3)


class TestRunMeasurement:
    def test_planted_tokens_dominate_top_words(self, tmp_path):
        config = make_config(tmp_path)
        result = run_measurement(config)
        planted = set(SPEC.protected_words)
        assert planted <= set(result.top_words)
        assert result.fairness.protected_count == len(planted)
        assert result.fairness.top_n == 60
        assert result.fairness.percent == pytest.approx(100 * 20 / 60)

    def test_empty_dictionary_yields_zero_protected(self, tmp_path):
        config = make_config(tmp_path)
        empty = tmp_path / "empty.tsv"
        empty.write_text("")
        config = PipelineConfig(
            **{
                **config.__dict__,
                "identifier": IdentifierSettings(backend="dictionary", dictionary_path=str(empty)),
            }
        )
        result = run_measurement(config)
        assert result.fairness.protected_count == 0

    def test_no_target_predictions_is_an_error(self, tmp_path):
        config = make_config(tmp_path)
        # a model that never predicts the positive class
        from .test_classifier import toy_model

        model = toy_model({"nothing": -5.0}, bias=-5.0, classes=("benign", "flagged"))
        with pytest.raises(ValueError, match="nothing to explain"):
            run_measurement(config, model=model)

    def test_unknown_target_class(self, tmp_path):
        config = make_config(tmp_path)
        bad = PipelineConfig(**{**config.__dict__, "target_class": "mystery"})
        with pytest.raises(ValueError, match="mystery"):
            run_measurement(bad)

    def test_metrics_match_standalone_evaluate(self, tmp_path):
        config = make_config(tmp_path)
        result = run_measurement(config)
        unlabeled = load_corpus(config.unlabeled_corpus)
        assert result.metrics == evaluate(result.model, unlabeled, threshold=config.threshold)


class TestRunMitigation:
    def test_ms2_reduces_protected_reliance(self, tmp_path):
        out = tmp_path / "out"
        config = make_config(tmp_path, strategy="MS2", output_dir=out)
        report = run_mitigation(config)
        original = report.original.fairness
        mitigated = report.mitigated.fairness
        assert original.protected_count >= 16
        assert mitigated.protected_count <= original.protected_count * 0.4
        assert mitigated.retained_from_original == len(
            set(report.mitigated.protected_words) & set(report.original.protected_words)
        )
        assert abs(report.mitigated.metrics.f1_macro - report.original.metrics.f1_macro) < 0.05
        assert report.delta.tokens_removed > 0
        for name in (
            "report.json", "report.txt", "timings.json",
            "ranking_original.csv", "ranking_mitigated.csv",
            "annotations_original.tsv", "annotations_mitigated.tsv",
            "corpus_mitigated.jsonl", "model_original.json", "model_mitigated.json",
        ):
            assert (out / name).exists(), name

    def test_stage_timings_recorded(self, tmp_path):
        config = make_config(tmp_path)
        report = run_mitigation(config)
        for stage in ("train", "predict", "explain", "identify", "moderate", "retrain"):
            assert stage in report.timings

    def test_no_protected_words_is_noop(self, tmp_path):
        config = make_config(tmp_path)
        empty = tmp_path / "empty.tsv"
        empty.write_text("")
        config = PipelineConfig(
            **{
                **config.__dict__,
                "identifier": IdentifierSettings(backend="dictionary", dictionary_path=str(empty)),
            }
        )
        report = run_mitigation(config)
        assert report.mitigated.top_words == report.original.top_words
        assert report.delta.documents_removed == 0
        assert report.delta.tokens_removed == 0
        assert report.mitigated.metrics == report.original.metrics

    def test_category_scope_limits_mitigation(self, tmp_path):
        config = make_config(tmp_path)
        scoped = PipelineConfig(
            **{
                **config.__dict__,
                "plan": PlanTemplate(
                    strategy="MS2",
                    category_scope=frozenset({ProtectedCategory.AGE}),
                ),
            }
        )
        report = run_mitigation(scoped)
        dictionary = SPEC.protected_dictionary()
        age_words = {w for w, c in dictionary.items() if c is ProtectedCategory.AGE}
        removed = set(report.original.protected_words) - set(report.mitigated.top_words)
        # words outside the scoped category were not the target of mitigation
        mitigated_training = load_corpus(config.training_corpus)
        assert report.delta.tokens_removed > 0
        assert age_words & set(report.original.protected_words)

    def test_tsv_backend(self, tmp_path):
        config = make_config(tmp_path)
        annotations = [
            Annotation(w, c, 100, source="expert")
            for w, c in SPEC.protected_dictionary().items()
        ]
        tsv = tmp_path / "expert.tsv"
        save_annotations_tsv(annotations, tsv)
        config = PipelineConfig(
            **{
                **config.__dict__,
                "identifier": IdentifierSettings(backend="tsv", annotations_path=str(tsv)),
            }
        )
        result = run_measurement(config)
        assert result.fairness.protected_count == 20


class TestDeterminism:
    def test_identical_runs_produce_identical_reports(self, tmp_path):
        config_a = make_config(tmp_path, output_dir=tmp_path / "out_a")
        unlabeled_before = (tmp_path / "unlabeled.jsonl").read_bytes()
        report_a = run_mitigation(config_a)
        config_b = PipelineConfig(**{**config_a.__dict__, "output_dir": str(tmp_path / "out_b")})
        report_b = run_mitigation(config_b)
        # measurement-only input: mitigation must never touch the unlabeled corpus
        assert (tmp_path / "unlabeled.jsonl").read_bytes() == unlabeled_before
        payload_a = json.dumps(report_payload(report_a), sort_keys=True)
        payload_b = json.dumps(report_payload(report_b), sort_keys=True)
        assert payload_a == payload_b
        bytes_a = (tmp_path / "out_a" / "report.json").read_bytes()
        bytes_b = (tmp_path / "out_b" / "report.json").read_bytes()
        assert bytes_a == bytes_b


class TestCompareRankings:
    def test_identical(self):
        words = [f"w{i}" for i in range(50)]
        assert compare_rankings(words, list(words)) == (50, 1.0)

    def test_disjoint(self):
        assert compare_rankings(["a"], ["b"]) == (0, 0.0)

    def test_linear_vs_occlusion_overlap_high(self, tmp_path):
        config = make_config(tmp_path, top_k=25)
        linear = run_measurement(config)
        occl_config = PipelineConfig(
            **{
                **config.__dict__,
                "explainer": ExplainerConfig(method="occlusion", top_k=25),
            }
        )
        occlusion = run_measurement(occl_config, model=linear.model)
        count, fraction = compare_rankings(linear.top_words, occlusion.top_words)
        assert fraction >= 0.9


class TestConfigFile:
    def test_load_and_run(self, tmp_path):
        train_path, unlabeled_path = write_corpora(tmp_path)
        raw = {
            "training_corpus": str(train_path),
            "unlabeled_corpus": str(unlabeled_path),
            "target_class": POSITIVE,
            "explainer": {"method": "linear-exact", "top_k": 30},
            "identifier": {"backend": "dictionary", "dictionary_path": str(dictionary_file(tmp_path))},
            "plan": {"strategy": "MS2", "seed": 0},
            "train": {"epochs": 10, "learning_rate": 0.3, "seed": 0, "batch_size": 64},
            "output_dir": str(tmp_path / "out"),
        }
        config_path = tmp_path / "pipeline.json"
        config_path.write_text(json.dumps(raw))
        config = load_pipeline_config(config_path)
        assert config.explainer.top_k == 30
        report = run_mitigation(config)
        assert (tmp_path / "out" / "report.json").exists()
        table = render_report_table(report)
        assert "original" in table and "mitigated" in table

    def test_identical_paths_rejected(self, tmp_path):
        path = tmp_path / "same.jsonl"
        with pytest.raises(ValueError, match="distinct"):
            PipelineConfig(
                training_corpus=str(path),
                unlabeled_corpus=str(path),
                target_class="x",
                explainer=ExplainerConfig(top_k=10),
                identifier=IdentifierSettings(backend="dictionary"),
                plan=PlanTemplate(),
            )

    def test_llm_backend_requires_config(self):
        with pytest.raises(ValueError, match="LlmConfig"):
            IdentifierSettings(backend="llm")
