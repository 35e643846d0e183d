"""
Measuring a classifier's reliance on protected words
=====================================================

Train the reference bag-of-words classifier on a synthetic corpus where
20 planted "protected" tokens shadow the positive class without carrying
the real signal, then rank the globally most important words and count
how many of them are protected.
"""

from unaware.classifier import TrainConfig, evaluate, predict_corpus, train
from unaware.explainer import (
    ExplainerConfig,
    ablation_curve,
    aggregate_global,
    attribute_linear,
    select_top,
)
from unaware.identifier import identify_dictionary
from unaware.synthetic import POSITIVE, PlantedBiasSpec, make_planted_bias_corpus

spec = PlantedBiasSpec()
training = make_planted_bias_corpus(spec, seed=11)
unlabeled = make_planted_bias_corpus(spec, seed=22)
print(f"training corpus: {len(training)} documents, "
      f"{len({t for d in training for t in d.tokens})} distinct words")

model = train(training, TrainConfig(epochs=20, learning_rate=0.3, l2=1e-4, seed=0, batch_size=128))
metrics = evaluate(model, unlabeled)
print(f"F1 macro {metrics.f1_macro:.3f}, AUC {metrics.auc:.3f}")

# Local attributions over the documents the model flags, aggregated into a
# global ranking (sum of occurrence scores / occurrence count).
predictions = predict_corpus(model, unlabeled)
flagged = [d for d in unlabeled if predictions[d.id][POSITIVE] >= 0.5]
records = [attribute_linear(model, d, POSITIVE) for d in flagged]
ranking = aggregate_global(records)
top = select_top(ranking, ExplainerConfig(top_k=100))

annotations = identify_dictionary(top, spec.protected_dictionary())
protected = [a.word for a in annotations if a.is_protected]
print(f"\ntop-100 words: {len(protected)} annotated as protected "
      f"({100 * len(protected) / len(top):.0f}%)")
print("first ten:", ", ".join(top[:10]))

# Deleting the ranking's head from the corpus should hurt the model:
# a quick sanity check that the ranking really names load-bearing words.
print("\nablation curve (words removed -> F1 macro):")
for step, f1 in ablation_curve(model, unlabeled, top, [0, 10, 20, 40, 60, 80, 100]):
    print(f"  {step:>3} removed -> {f1:.3f}")
