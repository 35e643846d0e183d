"""
The five training-corpus mitigation strategies
==============================================

Apply each strategy to one tiny corpus and print the rewritten documents:

  MS1  drop sentences containing protected words
  MS2  delete the protected words
  MS3  replace each occurrence with a random embedding neighbor
  MS4  append k variants per protected word, one neighbor each
  MS5  replace each occurrence with its hypernym
"""

import numpy as np

from unaware.corpus import Document, make_corpus
from unaware.lexical import make_embedding_table, make_hypernym_lexicon
from unaware.moderator import MitigationPlan, apply_plan

corpus = make_corpus([
    Document.from_text("1", "i like this city many black people", label="benign"),
    Document.from_text("2", "the homosexual marriage bill passed", label="benign"),
    Document.from_text("3", "nice modern city", label="benign"),
    Document.from_text("4", "i hate this shitty city black people", label="flagged"),
    Document.from_text("5", "awful horrible experience", label="flagged"),
])
protected = ("black", "homosexual")

# toy resources: a few near-synonyms per protected word, one hypernym each
rng = np.random.default_rng(0)
clusters = {}
for word, neighbors in {
    "black": ["dark", "ebony", "shadowy"],
    "homosexual": ["samesex", "queer", "gC"],
}.items():
    center = rng.normal(size=8)
    clusters[word] = center
    for i, neighbor in enumerate(neighbors):
        clusters[neighbor] = center + 0.02 * (i + 1)
embeddings = make_embedding_table(clusters)
lexicon = make_hypernym_lexicon({"black": "color", "homosexual": "person"})

for strategy in ("MS1", "MS2", "MS3", "MS4", "MS5"):
    plan = MitigationPlan(strategy=strategy, protected_words=protected, k=2, seed=7)
    rewritten, delta = apply_plan(corpus, plan, embeddings=embeddings, lexicon=lexicon)
    print(f"\n{strategy}: {len(corpus)} -> {len(rewritten)} documents "
          f"(-{delta.documents_removed} +{delta.documents_added} docs, "
          f"{delta.tokens_removed} tokens removed, {delta.tokens_replaced} replaced)")
    for doc in rewritten:
        print(f"  [{doc.id}] {' '.join(doc.tokens)}")
