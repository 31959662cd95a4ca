"""Temporal shift detection, retrieval, and augmentation pipeline."""

import os as _os

# DRIFTFORGE_THREADS caps BLAS-level parallelism; it must land in the
# environment before numpy loads its backend.
_threads = _os.environ.get("DRIFTFORGE_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .adapt import AdaptConfig, MetricsReport, evaluate, run_adaptation
from .augment import AugmentConfig, augment_batch, substitute_synonyms
from .corpus import Document, Split, TimePartition, load_corpus, partition_by_time, split_train_test
from .lexicon import (
    ConceptLexicon,
    ConceptMatcher,
    ingest_llm_lexicon,
    ingest_mesh_xml,
    ingest_tabular_thesaurus,
    match_concepts,
    merge,
)
from .retrieval import cosine_sim, retrieve_topk
from .shift import ShiftConfig, ShiftScores, ShiftSet, detect, overlap_report, trend_report
from .stats import (
    ConceptStats,
    EmbeddingMatrix,
    SourceFeatureStats,
    fit_concept_stats,
    fit_feature_stats,
    mahalanobis,
    surprisal,
)
from .trainer import StubTrainer, SubprocessTrainer

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig",
    "AugmentConfig",
    "ConceptLexicon",
    "ConceptMatcher",
    "ConceptStats",
    "Document",
    "EmbeddingMatrix",
    "MetricsReport",
    "ShiftConfig",
    "ShiftScores",
    "ShiftSet",
    "SourceFeatureStats",
    "Split",
    "StubTrainer",
    "SubprocessTrainer",
    "TimePartition",
    "augment_batch",
    "cosine_sim",
    "detect",
    "evaluate",
    "fit_concept_stats",
    "fit_feature_stats",
    "ingest_llm_lexicon",
    "ingest_mesh_xml",
    "ingest_tabular_thesaurus",
    "load_corpus",
    "mahalanobis",
    "match_concepts",
    "merge",
    "overlap_report",
    "partition_by_time",
    "retrieve_topk",
    "run_adaptation",
    "split_train_test",
    "substitute_synonyms",
    "surprisal",
    "trend_report",
]
