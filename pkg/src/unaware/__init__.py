"""Measure and reduce an NLP classifier's reliance on protected-attribute words.

The toolkit extracts the globally most important words behind a
classifier's predictions, annotates them against the nine protected
categories of the UK Equality Act (via dictionary, LLM, or human
annotation), rewrites the training corpus with one of five mitigation
strategies, retrains, and reports the fairness and performance deltas.
"""

__version__ = "0.1.0"

from .classifier import LinearModel, Metrics, TrainConfig, evaluate, predict, train
from .corpus import Document, LabeledCorpus, load_corpus, make_corpus, save_corpus, tokenize
from .explainer import (
    AttributionRecord,
    ExplainerConfig,
    GlobalWordScore,
    aggregate_global,
    attribute_linear,
    attribute_occlusion,
    overlap,
    select_top,
)
from .identifier import (
    Annotation,
    LlmConfig,
    ProtectedCategory,
    TrapItem,
    VoteSheet,
    cohen_kappa,
    identify_dictionary,
    identify_llm,
    majority_vote,
    parse_llm_reply,
    trap_filter,
)
from .lexical import EmbeddingTable, HypernymLexicon, cosine, hypernym, k_nearest, load_embeddings
from .moderator import MitigationDelta, MitigationPlan, apply_plan, scope_words
from .pipeline import (
    FairnessStats,
    MitigationReport,
    PipelineConfig,
    PlanTemplate,
    IdentifierSettings,
    run_measurement,
    run_mitigation,
)
