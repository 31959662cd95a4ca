"""Per-document shift signals and the detection trigger.

Three complementary signals per target document:

* uncertainty: maximum sigmoid probability p_max and average binary
  entropy H over labels (nats), combined into the indicator
  U = (p_max < tau_p) and (H > tau_H);
* feature deviation: Mahalanobis distance min-max normalized against the
  source range, F = clip((d - d_min) / (d_max - d_min + eps), 0, 1);
* terminology: mean surprisal of the concepts detected in the document.

The detected set is D_shift = D_U | D_F | D_O where D_F and D_O are the
top-ceil(rho*n) documents by score (ties broken by ascending id) and
documents without any detected concept are excluded from the D_O ranking.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit, xlogy

from . import formats
from .corpus import Document
from .errors import ValidationError
from .lexicon import ConceptLexicon, ConceptMatcher
from .stats import ConceptStats, SourceFeatureStats, mahalanobis_rows, surprisal_of_set

LOGIT_CLAMP = 30.0  # keeps sigmoid away from exact 0/1 in float64


@dataclass
class LogitMatrix:
    """Row-aligned (ids, logits) pair, one column per label."""

    ids: list[str]
    rows: np.ndarray

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2:
            raise ValidationError(f"expected 2-d logits, got {self.rows.shape}")
        if len(self.ids) != self.rows.shape[0]:
            raise ValidationError("id list does not align with logit rows")
        if not np.all(np.isfinite(self.rows)):
            raise ValidationError("logits contain non-finite values")

    @property
    def n_labels(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def read(cls, path: str | Path) -> "LogitMatrix":
        ids, rows = formats.read_logits_raw(path)
        return cls(ids=ids, rows=rows)

    def write(self, path: str | Path) -> None:
        formats.write_logits(path, self.ids, self.rows)


@dataclass(frozen=True)
class ShiftConfig:
    tau_p: float = 0.5
    tau_h: float = 0.25
    rho: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.rho <= 1.0):
            raise ValidationError(f"rho must be in (0, 1], got {self.rho}")
        if not (0.0 < self.tau_p < 1.0):
            raise ValidationError(f"tau_p must be in (0, 1), got {self.tau_p}")
        if self.tau_h < 0.0:
            raise ValidationError(f"tau_h must be nonnegative, got {self.tau_h}")


@dataclass
class ShiftScores:
    """Per-document score table, row-aligned with ``ids``."""

    ids: list[str]
    p_max: np.ndarray
    entropy: np.ndarray
    uncertain: np.ndarray  # bool, the U indicator
    feature: np.ndarray  # F in [0, 1]
    ontology: np.ndarray  # O_tail, nonnegative
    concept_count: np.ndarray  # |C(x)| per document
    zero_concept: np.ndarray  # bool, no concept detected

    def __post_init__(self):
        n = len(self.ids)
        for name in ("p_max", "entropy", "uncertain", "feature", "ontology",
                     "concept_count", "zero_concept"):
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise ValidationError(f"{name} misaligned: {arr.shape} vs {n} ids")

    @property
    def n(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class ShiftSet:
    """Detected document sets; D_shift is the union of the three."""

    uncertainty_set: frozenset[str]
    feature_set: frozenset[str]
    ontology_set: frozenset[str]

    @property
    def shifted(self) -> frozenset[str]:
        return self.uncertainty_set | self.feature_set | self.ontology_set


def uncertainty_scores(
    logits: LogitMatrix, config: ShiftConfig = ShiftConfig()
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(p_max, H, U) per document.

    Logits are clamped to +/-LOGIT_CLAMP before the sigmoid; entropy uses
    nats with the 0*ln(0) := 0 convention, so H lies in [0, ln 2].
    """
    if logits.n_labels == 0:
        raise ValidationError("logit matrix has zero labels")
    z = np.clip(logits.rows, -LOGIT_CLAMP, LOGIT_CLAMP)
    p = expit(z)
    p_max = p.max(axis=1)
    entropy = -(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p)).mean(axis=1)
    uncertain = (p_max < config.tau_p) & (entropy > config.tau_h)
    return p_max, entropy, uncertain


def feature_scores(
    embeddings: "np.ndarray | object", stats: SourceFeatureStats
) -> np.ndarray:
    """F(x) per row: Mahalanobis distance min-max normalized to [0, 1]."""
    rows = getattr(embeddings, "rows", embeddings)
    d = mahalanobis_rows(rows, stats)
    f = (d - stats.d_min) / (stats.d_max - stats.d_min + stats.epsilon)
    return np.clip(f, 0.0, 1.0)


def ontology_scores(
    docs: Sequence[Document],
    lexicon: ConceptLexicon | ConceptMatcher,
    concept_stats: ConceptStats,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(O_tail, concept_count, zero_concept) per document.

    O_tail is the mean surprisal over the distinct concepts detected in the
    document; documents without concepts score 0 and are flagged.
    """
    matcher = lexicon if isinstance(lexicon, ConceptMatcher) else ConceptMatcher(lexicon)
    o_tail = np.zeros(len(docs))
    counts = np.zeros(len(docs), dtype=np.int64)
    for i, doc in enumerate(docs):
        concepts = matcher.concept_set(doc.text)
        counts[i] = len(concepts)
        o_tail[i] = surprisal_of_set(concepts, concept_stats)
    return o_tail, counts, counts == 0


def score_documents(
    docs: Sequence[Document],
    logits: LogitMatrix,
    embeddings,
    feature_stats: SourceFeatureStats,
    concept_stats: ConceptStats,
    lexicon: ConceptLexicon | ConceptMatcher,
    config: ShiftConfig = ShiftConfig(),
) -> ShiftScores:
    """Assemble the full per-document score table.

    ``docs``, ``logits`` and ``embeddings`` must be row-aligned on ids.
    """
    ids = [doc.id for doc in docs]
    if logits.ids != ids or list(embeddings.ids) != ids:
        raise ValidationError("documents, logits and embeddings are not id-aligned")
    p_max, entropy, uncertain = uncertainty_scores(logits, config)
    feature = feature_scores(embeddings, feature_stats)
    ontology, counts, zero = ontology_scores(docs, lexicon, concept_stats)
    return ShiftScores(
        ids=ids,
        p_max=p_max,
        entropy=entropy,
        uncertain=uncertain,
        feature=feature,
        ontology=ontology,
        concept_count=counts,
        zero_concept=zero,
    )


def _top_fraction(
    ids: Sequence[str],
    values: np.ndarray,
    rho: float,
    count_basis: int,
    eligible: np.ndarray | None = None,
) -> frozenset[str]:
    """Top-ceil(rho * count_basis) ids by value, ties by ascending id."""
    take = math.ceil(rho * count_basis)
    ranked = sorted(
        (
            (ids[i], float(values[i]))
            for i in range(len(ids))
            if eligible is None or eligible[i]
        ),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return frozenset(doc_id for doc_id, _ in ranked[:take])


def detect(scores: ShiftScores, config: ShiftConfig = ShiftConfig()) -> ShiftSet:
    """Assemble D_U, D_F, D_O and their union deterministically."""
    if scores.n == 0:
        return ShiftSet(frozenset(), frozenset(), frozenset())
    d_u = frozenset(
        doc_id for doc_id, flag in zip(scores.ids, scores.uncertain) if flag
    )
    d_f = _top_fraction(scores.ids, scores.feature, config.rho, scores.n)
    d_o = _top_fraction(
        scores.ids, scores.ontology, config.rho, scores.n,
        eligible=~scores.zero_concept,
    )
    return ShiftSet(uncertainty_set=d_u, feature_set=d_f, ontology_set=d_o)


# ---------------------------------------------------------------------------
# Analysis reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OverlapReport:
    """Detector overlap as percentages of the full target count."""

    n: int
    pct_u: float
    pct_u_and_o: float
    pct_u_and_f: float
    pct_o_and_f: float
    pct_u_o_f: float

    HEADERS = ("U", "U&O", "U&F", "O&F", "U&O&F")

    def as_row(self) -> tuple[float, ...]:
        return (self.pct_u, self.pct_u_and_o, self.pct_u_and_f,
                self.pct_o_and_f, self.pct_u_o_f)


def overlap_report(shift_set: ShiftSet, n: int) -> OverlapReport:
    """Percentages of ``n`` covered by U and the detector intersections."""
    if n <= 0:
        return OverlapReport(n=0, pct_u=0.0, pct_u_and_o=0.0, pct_u_and_f=0.0,
                             pct_o_and_f=0.0, pct_u_o_f=0.0)
    u, f, o = shift_set.uncertainty_set, shift_set.feature_set, shift_set.ontology_set

    def pct(members: frozenset[str]) -> float:
        return 100.0 * len(members) / n

    return OverlapReport(
        n=n,
        pct_u=pct(u),
        pct_u_and_o=pct(u & o),
        pct_u_and_f=pct(u & f),
        pct_o_and_f=pct(o & f),
        pct_u_o_f=pct(u & o & f),
    )


@dataclass(frozen=True)
class TrendRow:
    year: int
    feature_mean: float
    feature_median: float
    ontology_mean: float
    ontology_median: float
    entropy_mean: float
    entropy_median: float


def trend_report(scores: ShiftScores, years: Mapping[str, int]) -> list[TrendRow]:
    """Year-wise mean/median of F, O_tail and H, sorted by year."""
    by_year: dict[int, list[int]] = {}
    for i, doc_id in enumerate(scores.ids):
        by_year.setdefault(years[doc_id], []).append(i)
    rows = []
    for year in sorted(by_year):
        idx = by_year[year]
        f = [float(scores.feature[i]) for i in idx]
        o = [float(scores.ontology[i]) for i in idx]
        h = [float(scores.entropy[i]) for i in idx]
        rows.append(
            TrendRow(
                year=year,
                feature_mean=statistics.fmean(f),
                feature_median=statistics.median(f),
                ontology_mean=statistics.fmean(o),
                ontology_median=statistics.median(o),
                entropy_mean=statistics.fmean(h),
                entropy_median=statistics.median(h),
            )
        )
    return rows


def render_overlap_text(report: OverlapReport) -> str:
    header = f"{'n':>8} " + " ".join(f"{h:>8}" for h in OverlapReport.HEADERS)
    values = f"{report.n:>8} " + " ".join(f"{v:>7.2f}%" for v in report.as_row())
    return header + "\n" + values + "\n"


def write_overlap_csv(path: str | Path, report: OverlapReport, meta_line: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if meta_line:
            fh.write(f"# {meta_line}\n")
        writer = csv.writer(fh)
        writer.writerow(("n",) + OverlapReport.HEADERS)
        writer.writerow((report.n,) + tuple(f"{v:.6f}" for v in report.as_row()))


def render_trend_text(rows: Sequence[TrendRow]) -> str:
    lines = [
        f"{'year':>6} {'F mean':>8} {'F med':>8} {'O mean':>8} {'O med':>8} "
        f"{'H mean':>8} {'H med':>8}"
    ]
    for r in rows:
        lines.append(
            f"{r.year:>6} {r.feature_mean:>8.3f} {r.feature_median:>8.3f} "
            f"{r.ontology_mean:>8.3f} {r.ontology_median:>8.3f} "
            f"{r.entropy_mean:>8.3f} {r.entropy_median:>8.3f}"
        )
    return "\n".join(lines) + "\n"


def write_trend_csv(path: str | Path, rows: Sequence[TrendRow], meta_line: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if meta_line:
            fh.write(f"# {meta_line}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ("year", "f_mean", "f_median", "o_mean", "o_median", "h_mean", "h_median")
        )
        for r in rows:
            writer.writerow(
                (
                    r.year,
                    f"{r.feature_mean:.6f}",
                    f"{r.feature_median:.6f}",
                    f"{r.ontology_mean:.6f}",
                    f"{r.ontology_median:.6f}",
                    f"{r.entropy_mean:.6f}",
                    f"{r.entropy_median:.6f}",
                )
            )


def write_scores_csv(path: str | Path, scores: ShiftScores, meta_line: str | None = None) -> None:
    """Persist the score table as CSV (one row per document)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if meta_line:
            fh.write(f"# {meta_line}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ("id", "p_max", "entropy", "uncertain", "feature", "ontology",
             "concept_count", "zero_concept")
        )
        for i, doc_id in enumerate(scores.ids):
            writer.writerow(
                (
                    doc_id,
                    f"{scores.p_max[i]:.9f}",
                    f"{scores.entropy[i]:.9f}",
                    int(scores.uncertain[i]),
                    f"{scores.feature[i]:.9f}",
                    f"{scores.ontology[i]:.9f}",
                    int(scores.concept_count[i]),
                    int(scores.zero_concept[i]),
                )
            )
