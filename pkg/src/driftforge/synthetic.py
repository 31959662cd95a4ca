"""Synthetic drifted corpus generator and end-to-end experiment harness.

Two periods share a label-indicative vocabulary. In the later period a
planted subset of documents adopts new terminology: a fixed fraction of
the indicative terms is replaced by synonyms that never occur in the
earlier period. Planted documents come in two families so that the two
ranked detectors are complementary rather than redundant:

* ontology drift: the new synonyms are present in the detection lexicon
  (as concepts unseen in the source period), so mean surprisal flags
  these documents;
* feature drift: the new synonyms are absent from the detection lexicon
  and the documents additionally pick up period-2 style tokens, so only
  the embedding deviation flags them.

An augmentation lexicon maps every replaced term to its new synonym for
both families (the broader of the two synonym-knowledge sources). The
generator therefore plants exactly the effect the pipeline is meant to
find: emerging terminology, feature-space deviation, small detector
overlap, and a recoverable performance gap.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

from .adapt import (
    AdaptationResult,
    AdaptConfig,
    MetricsReport,
    batched,
    evaluate,
    run_adaptation,
    threshold_predictions,
)
from .augment import AugmentConfig
from .corpus import Document, TimePartition, save_corpus, split_train_test
from .lexicon import Concept, ConceptLexicon, save_lexicon
from .shift import ShiftConfig, ShiftSet, detect, score_documents
from .stats import fit_concept_stats, fit_feature_stats
from .trainer import StubTrainer


@dataclass(frozen=True)
class SyntheticConfig:
    seed: int = 7
    n_labels: int = 12
    terms_per_label: int = 10
    replaced_fraction: float = 0.3  # indicative terms given a drift synonym
    drift_rate: float = 0.24  # target documents planted as drifted
    drift_bias: float = 0.7  # how strongly planted docs prefer drifting terms
    style_rate: float = 0.9  # period-2 style tokens in feature-drift docs
    style_extra: tuple[int, int] = (6, 10)  # appended style tokens, feature drift
    n_source: int = 3000
    n_target: int = 300
    source_years: tuple[int, int] = (2010, 2012)
    target_years: tuple[int, int] = (2017, 2019)
    filler_vocab: int = 200
    style_vocab: int = 100
    filler_range: tuple[int, int] = (6, 10)
    terms_per_label_range: tuple[int, int] = (3, 5)
    labels_range: tuple[int, int] = (1, 3)
    planted_labels_range: tuple[int, int] = (2, 3)


@dataclass
class SyntheticCorpus:
    config: SyntheticConfig
    labels: list[str]
    documents: list[Document]  # both periods
    partition: TimePartition
    detect_lexicon: ConceptLexicon
    augment_lexicon: ConceptLexicon
    planted_ids: frozenset[str]
    drift_kind: dict[str, str]  # planted id -> "ontology" | "feature"
    replaced_terms: dict[str, str]  # original surface -> drift synonym

    @property
    def source_docs(self) -> list[Document]:
        lo, hi = self.partition.intervals[self.partition.source_index]
        return [d for d in self.documents if lo <= d.timestamp < hi]

    @property
    def target_docs(self) -> list[Document]:
        lo, hi = self.partition.intervals[self.partition.target_index]
        return [d for d in self.documents if lo <= d.timestamp < hi]


def _term_surfaces(label_index: int, term_index: int) -> tuple[str, str]:
    """(original, novel drift synonym); index 0 is a two-token phrase."""
    if term_index == 0:
        return (
            f"proto{label_index:02d} method{label_index:02d}",
            f"neo{label_index:02d} scheme{label_index:02d}",
        )
    return f"topic{label_index:02d}x{term_index}", f"neolog{label_index:02d}x{term_index}"


def _interleave_families(n: int, rng: random.Random) -> list[str]:
    families = ["ontology", "feature"] * ((n + 1) // 2)
    rng.shuffle(families)
    return families[:n]


def generate(config: SyntheticConfig = SyntheticConfig()) -> SyntheticCorpus:
    rng = random.Random(config.seed)
    labels = [f"label{i:02d}" for i in range(config.n_labels)]
    terms: dict[str, list[str]] = {}
    synonym_of: dict[str, str] = {}
    for li, label in enumerate(labels):
        surfaces = []
        for ti in range(config.terms_per_label):
            original, synonym = _term_surfaces(li, ti)
            surfaces.append(original)
            synonym_of[original] = synonym
        terms[label] = surfaces

    # Per label, round(fraction * m) terms drift (the selection is a
    # property of the vocabulary, not of individual documents). Each
    # drifting term is assigned to one detector family: an "ontology"
    # term's synonym is listed in the detection lexicon (an emerging
    # concept, unseen in the source period), while a "feature" term's
    # synonym stays out of the lexicon and is detectable only through
    # embedding deviation.
    replaced: dict[str, str] = {}
    family_of_term: dict[str, str] = {}
    n_replace = round(config.replaced_fraction * config.terms_per_label)
    for label in labels:
        pool = list(terms[label])
        rng.shuffle(pool)
        chosen = pool[:n_replace]
        for original, family in zip(chosen, _interleave_families(len(chosen), rng)):
            replaced[original] = synonym_of[original]
            family_of_term[original] = family

    filler = [f"filler{i:03d}" for i in range(config.filler_vocab)]
    filler_set = set(filler)
    style = [f"era{i:03d}" for i in range(config.style_vocab)]
    drifting_of = {
        label: {
            family: [
                t for t in terms[label] if family_of_term.get(t) == family
            ]
            for family in ("ontology", "feature")
        }
        for label in labels
    }

    stable_of = {
        label: [t for t in terms[label] if t not in replaced] for label in labels
    }

    def compose(doc_labels: list[str], family: str | None = None) -> list[str]:
        slots: list[str] = []
        for label in doc_labels:
            lo, hi = config.terms_per_label_range
            preferred = drifting_of[label][family] if family else []
            if family and not preferred:  # label has no term in this family
                preferred = [t for t in terms[label] if t in replaced]
            for _ in range(rng.randint(lo, hi)):
                if preferred and rng.random() < config.drift_bias:
                    pool = preferred
                elif family:
                    # keep the families separated: a planted document only
                    # drifts through its own family's terms
                    pool = stable_of[label]
                else:
                    pool = terms[label]
                slots.append(rng.choice(pool))
        lo, hi = config.filler_range
        slots.extend(rng.choice(filler) for _ in range(rng.randint(lo, hi)))
        rng.shuffle(slots)
        return slots

    def draw_labels(planted: bool = False) -> list[str]:
        lo, hi = config.planted_labels_range if planted else config.labels_range
        return sorted(rng.sample(labels, rng.randint(lo, hi)))

    documents: list[Document] = []
    for i in range(config.n_source):
        doc_labels = draw_labels()
        year = rng.randint(*config.source_years)
        documents.append(
            Document(
                id=f"s{i:05d}",
                text=" ".join(compose(doc_labels)),
                timestamp=year,
                labels=frozenset(doc_labels),
            )
        )

    n_planted = round(config.drift_rate * config.n_target)
    planted_positions = rng.sample(range(config.n_target), n_planted)
    family_of_position = {
        pos: ("ontology" if i % 2 == 0 else "feature")
        for i, pos in enumerate(planted_positions)
    }
    planted_ids: set[str] = set()
    drift_kind: dict[str, str] = {}
    for i in range(config.n_target):
        family = family_of_position.get(i)
        doc_labels = draw_labels(planted=family is not None)
        year = rng.randint(*config.target_years)
        slots = compose(doc_labels, family)
        doc_id = f"t{i:05d}"
        if family is not None:
            hits = [j for j, slot in enumerate(slots) if slot in replaced]
            if not hits:
                # force one drifted occurrence so the planted flag is honest
                label = rng.choice(doc_labels)
                candidates = [t for t in terms[label] if t in replaced]
                indicative = [j for j, s in enumerate(slots) if s in terms[label]]
                slots[rng.choice(indicative)] = rng.choice(candidates)
                hits = [j for j, slot in enumerate(slots) if slot in replaced]
            for j in hits:
                slots[j] = replaced[slots[j]]
            if family == "feature":
                # period-2 style: most filler is new-era vocabulary, plus
                # extra style tokens so this family dominates the feature
                # ranking rather than the ontology one
                slots = [
                    rng.choice(style)
                    if slot in filler_set and rng.random() < config.style_rate
                    else slot
                    for slot in slots
                ]
                lo, hi = config.style_extra
                slots.extend(rng.choice(style) for _ in range(rng.randint(lo, hi)))
                rng.shuffle(slots)
            planted_ids.add(doc_id)
            drift_kind[doc_id] = family
        documents.append(
            Document(
                id=doc_id,
                text=" ".join(slots),
                timestamp=year,
                labels=frozenset(doc_labels),
            )
        )

    partition = TimePartition.from_inclusive_ranges(
        [config.source_years, config.target_years], source_index=0, target_index=1
    )

    all_surfaces = [t for label in labels for t in terms[label]]
    ontology_synonyms = [
        synonym_of[t] for t in all_surfaces if family_of_term.get(t) == "ontology"
    ]
    detect_lexicon = ConceptLexicon(
        [Concept(f"ont{i:04d}", surface, ()) for i, surface in enumerate(
            all_surfaces + ontology_synonyms
        )]
    )
    augment_lexicon = ConceptLexicon(
        [
            Concept(
                f"map{i:04d}",
                surface,
                (replaced[surface],) if surface in replaced else (),
            )
            for i, surface in enumerate(all_surfaces)
        ]
    )
    return SyntheticCorpus(
        config=config,
        labels=labels,
        documents=documents,
        partition=partition,
        detect_lexicon=detect_lexicon,
        augment_lexicon=augment_lexicon,
        planted_ids=frozenset(planted_ids),
        drift_kind=drift_kind,
        replaced_terms=replaced,
    )


def write_corpus_files(corpus: SyntheticCorpus, out_dir: str | Path) -> dict[str, Path]:
    """Materialize the generated corpus for CLI-driven runs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": out / "corpus.jsonl",
        "labels": out / "labels.json",
        "detect_lexicon": out / "detect_lexicon.json",
        "augment_lexicon": out / "augment_lexicon.json",
        "truth": out / "truth.json",
        "partition": out / "partition.cfg",
    }
    save_corpus(paths["corpus"], corpus.documents)
    paths["labels"].write_text(json.dumps(corpus.labels) + "\n", encoding="utf-8")
    save_lexicon(paths["detect_lexicon"], corpus.detect_lexicon)
    save_lexicon(paths["augment_lexicon"], corpus.augment_lexicon)
    paths["truth"].write_text(
        json.dumps(
            {
                "planted_ids": sorted(corpus.planted_ids),
                "drift_kind": corpus.drift_kind,
                "replaced_terms": corpus.replaced_terms,
                "seed": corpus.config.seed,
            },
            indent=1,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    years = ",".join(
        f"{a}-{b - 1}" for a, b in corpus.partition.intervals
    )
    paths["partition"].write_text(
        f'intervals = "{years}"\nsource_index = 0\ntarget_index = 1\n'
        f"ratio = 0.7\nseed = {corpus.config.seed}\n",
        encoding="utf-8",
    )
    return paths


# ---------------------------------------------------------------------------
# End-to-end experiment
# ---------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    corpus: SyntheticCorpus
    shift_set: ShiftSet
    detection_recall: float
    unadapted: MetricsReport
    adapted: MetricsReport
    adaptation: AdaptationResult

    def summary(self) -> str:
        gap = self.adapted.micro_f1 - self.unadapted.micro_f1
        return (
            f"planted drifted docs: {len(self.corpus.planted_ids)}\n"
            f"detection recall:     {self.detection_recall:.3f}\n"
            f"unadapted micro-F1:   {self.unadapted.micro_f1:.2f}\n"
            f"adapted micro-F1:     {self.adapted.micro_f1:.2f}  (gap {gap:+.2f})\n"
        )


@dataclass(frozen=True)
class ExperimentConfig:
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    adapt: AdaptConfig = field(
        default_factory=lambda: AdaptConfig(
            batch_size=32,
            k=3,
            shift=ShiftConfig(),
            augment=AugmentConfig(variants=10, max_subs=8, seed=7),
            seed=7,
            replay_source=128,
        )
    )
    stub_dim: int = 256
    fit_steps: int = 1200
    steps_per_update: int = 1000
    update_lr: float = 5.0
    anchor_reg: float = 0.0
    train_ratio: float = 0.7


def run_experiment(config: ExperimentConfig = ExperimentConfig()) -> ExperimentResult:
    """Generate, fit on the source period, then compare the unadapted and
    adapted models on the full target split."""
    corpus = generate(config.synthetic)
    source_docs = corpus.source_docs
    target_docs = corpus.target_docs
    seed = config.synthetic.seed

    split = split_train_test([d.id for d in source_docs], config.train_ratio, seed)
    by_id = {d.id: d for d in source_docs}
    source_train = [by_id[i] for i in sorted(split.train_ids)]

    trainer = StubTrainer(
        corpus.labels,
        seed=seed,
        dim=config.stub_dim,
        steps_per_update=config.steps_per_update,
        update_lr=config.update_lr,
        anchor_reg=config.anchor_reg,
    )
    trainer.fit_source(source_train, steps=config.fit_steps)

    source_emb, _ = trainer.encode(source_train)
    feature_stats = fit_feature_stats(source_emb)
    concept_stats = fit_concept_stats(source_train, corpus.detect_lexicon)

    # Unadapted baseline: the source model predicts the full target split.
    probs_before = trainer.predict(target_docs)
    gold = {d.id: d.labels for d in target_docs}
    unadapted = evaluate(
        threshold_predictions(probs_before, corpus.labels), gold, corpus.labels
    )

    # Standalone corpus-global detection with the source model.
    target_emb, target_logits = trainer.encode(target_docs)
    scores = score_documents(
        target_docs, target_logits, target_emb, feature_stats, concept_stats,
        corpus.detect_lexicon, config.adapt.shift,
    )
    shift_set = detect(scores, config.adapt.shift)
    planted = corpus.planted_ids
    recall = len(planted & shift_set.shifted) / len(planted) if planted else 0.0

    result = run_adaptation(
        batched(target_docs, config.adapt.batch_size),
        source_train,
        corpus.detect_lexicon,
        feature_stats,
        concept_stats,
        config.adapt,
        trainer,
        augment_lexicon=corpus.augment_lexicon,
        eval_docs=target_docs,
    )
    adapted = evaluate(result.predictions, gold, corpus.labels)

    return ExperimentResult(
        corpus=corpus,
        shift_set=shift_set,
        detection_recall=recall,
        unadapted=unadapted,
        adapted=adapted,
        adaptation=result,
    )


# ---------------------------------------------------------------------------
# Sensitivity sweeps
# ---------------------------------------------------------------------------

SWEEP_METRICS = ("P", "R", "sa-F1", "mi-F1", "ma-F1")


@dataclass
class SweepTable:
    parameter: str
    values: list[float]
    columns: list[dict[str, float]]  # metric name -> value, aligned with values
    shift_sizes: list[int]  # |D_shift| of a standalone detection per value

    def render(self) -> str:
        header = f"{'Metric':<8}" + "".join(
            f" {self.parameter}={v:g}"[:12].rjust(12) for v in self.values
        )
        lines = [header]
        for metric in SWEEP_METRICS:
            lines.append(
                f"{metric:<8}"
                + "".join(f"{col[metric]:>12.2f}" for col in self.columns)
            )
        lines.append(
            f"{'|D_shift|':<8}" + "".join(f"{s:>12d}" for s in self.shift_sizes)
        )
        return "\n".join(lines) + "\n"

    def to_csv_rows(self) -> list[list]:
        rows = [["metric"] + [f"{self.parameter}={v:g}" for v in self.values]]
        for metric in SWEEP_METRICS:
            rows.append([metric] + [f"{col[metric]:.2f}" for col in self.columns])
        rows.append(["D_shift_size"] + [str(s) for s in self.shift_sizes])
        return rows


def _metrics_column(report: MetricsReport) -> dict[str, float]:
    return {
        "P": report.sample_precision,
        "R": report.sample_recall,
        "sa-F1": report.sample_f1,
        "mi-F1": report.micro_f1,
        "ma-F1": report.macro_f1,
    }


def run_sweep(
    parameter: str,
    values: list[float],
    base: ExperimentConfig = ExperimentConfig(),
) -> SweepTable:
    """Re-run the experiment varying one of {k, rho} while fixing the other."""
    columns = []
    shift_sizes = []
    for value in values:
        if parameter == "k":
            adapt_cfg = replace(base.adapt, k=int(value))
        elif parameter == "rho":
            adapt_cfg = replace(base.adapt, shift=replace(base.adapt.shift, rho=value))
        else:
            raise ValueError(f"unknown sweep parameter {parameter!r}")
        result = run_experiment(replace(base, adapt=adapt_cfg))
        columns.append(_metrics_column(result.adapted))
        shift_sizes.append(len(result.shift_set.shifted))
    return SweepTable(
        parameter=parameter, values=list(values), columns=columns,
        shift_sizes=shift_sizes,
    )
