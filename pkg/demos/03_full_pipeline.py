"""
End-to-end mitigation run
=========================

Measure, moderate, retrain, and re-measure in one call, then print the
before/after table: fairness (protected words among the top-ranked) next
to predictive performance (F1, AUC), plus per-stage timings. Artifacts
(report JSON, rankings, annotations, the mitigated corpus, both models)
land in a scratch directory.
"""

import tempfile
from pathlib import Path

from unaware.classifier import TrainConfig
from unaware.corpus import save_corpus
from unaware.explainer import ExplainerConfig
from unaware.pipeline import (
    IdentifierSettings,
    PipelineConfig,
    PlanTemplate,
    render_report_table,
    run_mitigation,
)
from unaware.synthetic import POSITIVE, PlantedBiasSpec, make_planted_bias_corpus

spec = PlantedBiasSpec()
workdir = Path(tempfile.mkdtemp(prefix="unaware_demo_"))
save_corpus(make_planted_bias_corpus(spec, seed=11), workdir / "train.jsonl")
save_corpus(make_planted_bias_corpus(spec, seed=22), workdir / "unlabeled.jsonl")
dictionary_path = workdir / "dictionary.tsv"
dictionary_path.write_text(
    "\n".join(f"{w}\t{c.value}\t100" for w, c in spec.protected_dictionary().items()) + "\n"
)

config = PipelineConfig(
    training_corpus=str(workdir / "train.jsonl"),
    unlabeled_corpus=str(workdir / "unlabeled.jsonl"),
    target_class=POSITIVE,
    explainer=ExplainerConfig(method="linear-exact", top_k=100),
    identifier=IdentifierSettings(backend="dictionary", dictionary_path=str(dictionary_path)),
    plan=PlanTemplate(strategy="MS2", seed=0),
    train=TrainConfig(epochs=20, learning_rate=0.3, l2=1e-4, seed=0, batch_size=128),
    output_dir=str(workdir / "out"),
)

report = run_mitigation(config)
print(render_report_table(report))
print(f"artifacts: {workdir / 'out'}")
