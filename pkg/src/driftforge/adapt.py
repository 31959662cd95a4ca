"""Adaptation loop and multi-label evaluation.

The loop streams target batches through the trainer: score each batch,
detect shifted documents (top-rho ranked within the batch), retrieve
their nearest source documents, augment those with synonym substitution,
and hand the batch to the trainer for one update. After the stream is
exhausted the final model predicts once over the full target split.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .augment import AugmentConfig, AugmentedSample, augment_batch, derive_seed
from .corpus import Document
from .errors import TrainerError, ValidationError
from .lexicon import ConceptLexicon, ConceptMatcher
from .retrieval import retrieve_topk
from .shift import ShiftConfig, detect, score_documents
from .stats import ConceptStats, SourceFeatureStats
from .trainer import Trainer

PREDICTION_THRESHOLD = 0.5


@dataclass(frozen=True)
class AdaptConfig:
    batch_size: int = 32
    k: int = 3
    shift: ShiftConfig = field(default_factory=ShiftConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    seed: int = 0
    re_encode_source: bool = False  # re-embed the source corpus every batch
    replay_source: int = 0  # unaugmented source docs mixed into each update

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.replay_source < 0:
            raise ValidationError("replay_source must be >= 0")


@dataclass(frozen=True)
class ModelHandle:
    model: str
    version: int


@dataclass
class BatchRecord:
    """What happened for one streamed batch; enough to replay it."""

    index: int
    doc_ids: list[str]
    uncertainty_ids: list[str]
    feature_ids: list[str]
    ontology_ids: list[str]
    shifted_ids: list[str]
    retrieved: dict[str, list[str]]
    samples_sent: int
    model_version: int

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "doc_ids": self.doc_ids,
            "uncertainty_ids": self.uncertainty_ids,
            "feature_ids": self.feature_ids,
            "ontology_ids": self.ontology_ids,
            "shifted_ids": self.shifted_ids,
            "retrieved": self.retrieved,
            "samples_sent": self.samples_sent,
            "model_version": self.model_version,
        }


@dataclass
class AdaptationResult:
    log: list[BatchRecord]
    model: ModelHandle
    probabilities: dict[str, np.ndarray]
    predictions: dict[str, frozenset[str]]
    metadata: dict


def batched(docs: Sequence[Document], size: int) -> Iterable[list[Document]]:
    for start in range(0, len(docs), size):
        yield list(docs[start : start + size])


def threshold_predictions(
    probabilities: Mapping[str, np.ndarray],
    labels: Sequence[str],
    threshold: float = PREDICTION_THRESHOLD,
) -> dict[str, frozenset[str]]:
    """Label set per document: labels whose probability reaches the threshold."""
    out = {}
    for doc_id, probs in probabilities.items():
        out[doc_id] = frozenset(
            label for label, p in zip(labels, probs) if p >= threshold
        )
    return out


def run_adaptation(
    target_stream: Iterable[Sequence[Document]],
    source_corpus: Sequence[Document],
    lexicon: ConceptLexicon,
    feature_stats: SourceFeatureStats,
    concept_stats: ConceptStats,
    config: AdaptConfig,
    trainer: Trainer,
    augment_lexicon: ConceptLexicon | None = None,
    eval_docs: Sequence[Document] | None = None,
    log_path: str | Path | None = None,
) -> AdaptationResult:
    """Stream target batches, adapt the trainer, then predict once.

    ``lexicon`` drives concept detection for the ontology score;
    ``augment_lexicon`` (defaulting to the same lexicon) drives synonym
    substitution. The log is appended to ``log_path`` batch by batch, so a
    partial log survives a trainer failure.
    """
    source_docs = list(source_corpus)
    source_by_id = {doc.id: doc for doc in source_docs}
    detect_matcher = ConceptMatcher(lexicon)
    augment_lexicon = augment_lexicon if augment_lexicon is not None else lexicon
    augment_matcher = ConceptMatcher(augment_lexicon)

    info = trainer.info()
    labels = info.get("labels")
    if labels is None:
        raise TrainerError("trainer info does not expose the label vocabulary")
    source_emb, _ = trainer.encode(source_docs)
    metadata = {
        "model": info.get("model", "unknown"),
        "initial_version": info.get("version", 0),
        "target_encoder": "current-model",
        "source_encoder": "per-batch current-model" if config.re_encode_source
        else "initial-model",
        "k": config.k,
        "rho": config.shift.rho,
        "seed": config.seed,
    }

    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    if log_fh:
        log_fh.write(json.dumps({"_meta": metadata}, sort_keys=True) + "\n")

    log: list[BatchRecord] = []
    seen_docs: list[Document] = []
    version = metadata["initial_version"]
    try:
        for index, batch in enumerate(target_stream):
            batch = list(batch)
            seen_docs.extend(batch)
            if not batch:
                continue
            if config.re_encode_source:
                source_emb, _ = trainer.encode(source_docs)
            emb, logits = trainer.encode(batch)
            scores = score_documents(
                batch, logits, emb, feature_stats, concept_stats,
                detect_matcher, config.shift,
            )
            shift_set = detect(scores, config.shift)
            shifted = sorted(shift_set.shifted)
            retrieved: dict[str, list[str]] = {}
            samples_sent = 0
            if shifted:
                retrievals = retrieve_topk(shifted, emb, source_emb, config.k)
                retrieved = {
                    r.target_id: [sid for sid, _ in r.neighbors] for r in retrievals
                }
                batch_samples = augment_batch(
                    retrievals,
                    source_by_id,
                    augment_lexicon,
                    config.augment,
                    matcher=augment_matcher,
                )
                if config.replay_source > 0:
                    rng = random.Random(derive_seed(config.seed, "replay", index))
                    take = min(config.replay_source, len(source_docs))
                    for doc in rng.sample(source_docs, take):
                        batch_samples.samples.append(
                            AugmentedSample(
                                origin_id=doc.id,
                                variant_index=0,
                                text=doc.text,
                                labels=doc.labels,
                                substitutions=(),
                            )
                        )
                if batch_samples.samples:
                    version = trainer.update(batch_samples)
                    samples_sent = len(batch_samples.samples)
            record = BatchRecord(
                index=index,
                doc_ids=[d.id for d in batch],
                uncertainty_ids=sorted(shift_set.uncertainty_set),
                feature_ids=sorted(shift_set.feature_set),
                ontology_ids=sorted(shift_set.ontology_set),
                shifted_ids=shifted,
                retrieved=retrieved,
                samples_sent=samples_sent,
                model_version=version,
            )
            log.append(record)
            if log_fh:
                log_fh.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
                log_fh.flush()

        final_docs = list(eval_docs) if eval_docs is not None else seen_docs
        probabilities = trainer.predict(final_docs)
        predictions = threshold_predictions(probabilities, labels)
    finally:
        if log_fh:
            log_fh.close()

    return AdaptationResult(
        log=log,
        model=ModelHandle(model=metadata["model"], version=version),
        probabilities=probabilities,
        predictions=predictions,
        metadata=metadata,
    )


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass
class MetricsReport:
    """Multi-label metrics in percent, plus per-label pooled counts."""

    sample_precision: float
    sample_recall: float
    sample_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    macro_f1: float
    per_label: dict[str, dict[str, int]]

    def to_json(self) -> dict:
        return {
            "sample_precision": self.sample_precision,
            "sample_recall": self.sample_recall,
            "sample_f1": self.sample_f1,
            "micro_precision": self.micro_precision,
            "micro_recall": self.micro_recall,
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "per_label": self.per_label,
        }

    def render(self) -> str:
        return (
            f"{'P':>8} {'R':>8} {'sa-F1':>8} {'mi-F1':>8} {'ma-F1':>8}\n"
            f"{self.sample_precision:>8.2f} {self.sample_recall:>8.2f} "
            f"{self.sample_f1:>8.2f} {self.micro_f1:>8.2f} {self.macro_f1:>8.2f}\n"
        )


def _f1(precision: float, recall: float) -> float:
    return (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0.0
        else 0.0
    )


def evaluate(
    predictions: Mapping[str, frozenset[str] | set[str]],
    gold: Mapping[str, frozenset[str] | set[str]],
    labels: Sequence[str] | None = None,
) -> MetricsReport:
    """Sample-averaged P/R/F1, micro-F1 over pooled counts, and macro-F1
    over the label vocabulary (0/0 ratios count as 0).

    ``labels`` fixes the macro vocabulary; by default it is the union of
    labels observed in predictions and gold.
    """
    if set(predictions) != set(gold):
        raise ValidationError("prediction and gold document ids differ")
    if labels is None:
        observed: set[str] = set()
        for label_set in list(predictions.values()) + list(gold.values()):
            observed |= set(label_set)
        labels = sorted(observed)

    sample_p = []
    sample_r = []
    sample_f = []
    label_set = set(labels)
    counts = {label: {"tp": 0, "fp": 0, "fn": 0, "gold": 0} for label in labels}
    for doc_id in gold:
        pred = set(predictions[doc_id])
        true = set(gold[doc_id])
        if not (pred <= label_set) or not (true <= label_set):
            raise ValidationError(f"document {doc_id!r} uses labels outside the vocabulary")
        hit = len(pred & true)
        p = hit / len(pred) if pred else 0.0
        r = hit / len(true) if true else 0.0
        sample_p.append(p)
        sample_r.append(r)
        sample_f.append(_f1(p, r))
        for label in pred & true:
            counts[label]["tp"] += 1
        for label in pred - true:
            counts[label]["fp"] += 1
        for label in true - pred:
            counts[label]["fn"] += 1
        for label in true:
            counts[label]["gold"] += 1

    tp = sum(c["tp"] for c in counts.values())
    fp = sum(c["fp"] for c in counts.values())
    fn = sum(c["fn"] for c in counts.values())
    micro_p = tp / (tp + fp) if tp + fp else 0.0
    micro_r = tp / (tp + fn) if tp + fn else 0.0
    label_f1 = []
    for label in labels:
        c = counts[label]
        lp = c["tp"] / (c["tp"] + c["fp"]) if c["tp"] + c["fp"] else 0.0
        lr = c["tp"] / (c["tp"] + c["fn"]) if c["tp"] + c["fn"] else 0.0
        label_f1.append(_f1(lp, lr))

    def mean(xs) -> float:
        return float(np.mean(xs)) if xs else 0.0

    return MetricsReport(
        sample_precision=100.0 * mean(sample_p),
        sample_recall=100.0 * mean(sample_r),
        sample_f1=100.0 * mean(sample_f),
        micro_precision=100.0 * micro_p,
        micro_recall=100.0 * micro_r,
        micro_f1=100.0 * _f1(micro_p, micro_r),
        macro_f1=100.0 * mean(label_f1),
        per_label=counts,
    )


def save_predictions(
    path: str | Path,
    predictions: Mapping[str, frozenset[str]],
    probabilities: Mapping[str, np.ndarray] | None = None,
    meta: dict | None = None,
) -> None:
    """JSON Lines: {id, labels[, probs]} per document, sorted by id."""
    with open(path, "w", encoding="utf-8") as fh:
        if meta:
            fh.write(json.dumps({"_meta": meta}, sort_keys=True) + "\n")
        for doc_id in sorted(predictions):
            record: dict = {"id": doc_id, "labels": sorted(predictions[doc_id])}
            if probabilities is not None:
                record["probs"] = [round(float(p), 9) for p in probabilities[doc_id]]
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_label_sets(path: str | Path) -> dict[str, frozenset[str]]:
    """Read {id, labels} JSON Lines (corpus files work too)."""
    out: dict[str, frozenset[str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            record = json.loads(raw)
            if "_meta" in record:
                continue
            if record["id"] in out:
                raise ValidationError(f"duplicate id {record['id']!r}")
            out[record["id"]] = frozenset(record["labels"])
    return out
