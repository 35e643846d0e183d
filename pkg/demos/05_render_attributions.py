"""
Rendering local attributions
============================

Shade each token of a document by its contribution to the predicted class:
red for evidence toward the target class, blue against, intensity scaled
by the strongest score in the document. ANSI output goes straight to the
terminal; the HTML variant can be dropped into any page.
"""

from unaware.classifier import TrainConfig, train
from unaware.corpus import Document, make_corpus
from unaware.explainer import attribute_linear, render_attributions

training = make_corpus(
    [Document.from_text(f"p{i}", "hate shitty awful city", label="flagged") for i in range(10)]
    + [Document.from_text(f"n{i}", "lovely modern friendly city", label="benign") for i in range(10)]
)
model = train(training, TrainConfig(epochs=30, learning_rate=0.5, seed=0))

sentence = Document.from_text("demo", "I hate this shitty city! There are many friendly people!")
record = attribute_linear(model, sentence, "flagged")

print("token scores:")
for _, token, score in record.token_scores:
    print(f"  {token:<10} {score:+.3f}")

print("\nANSI rendering:")
print(render_attributions(record, format="ansi"))

print("\nHTML rendering:")
print(render_attributions(record, format="html"))
