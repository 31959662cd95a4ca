"""Source-period statistics backing the shift scores.

Fits the embedding mean/covariance (with shrinkage toward a scaled
identity so the covariance stays invertible when n < d), the source
Mahalanobis distance range used for min-max normalization, and concept
document frequencies for terminology surprisal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from . import formats
from .corpus import Document
from .errors import (
    DimensionMismatchError,
    InsufficientDataError,
    NumericError,
    ParseError,
    ValidationError,
)
from .lexicon import ConceptLexicon, ConceptMatcher

DEFAULT_EPSILON = 1e-12
DEFAULT_SHRINKAGE = 0.1


@dataclass
class EmbeddingMatrix:
    """Row-aligned (ids, vectors) pair; one embedding per document."""

    ids: list[str]
    rows: np.ndarray

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2:
            raise ValidationError(f"expected 2-d embeddings, got {self.rows.shape}")
        if len(self.ids) != self.rows.shape[0]:
            raise ValidationError("id list does not align with embedding rows")
        if not np.all(np.isfinite(self.rows)):
            raise ValidationError("embeddings contain non-finite values")

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def read(cls, path: str | Path) -> "EmbeddingMatrix":
        ids, rows = formats.read_embeddings_raw(path)
        return cls(ids=ids, rows=rows)

    def write(self, path: str | Path) -> None:
        formats.write_embeddings(path, self.ids, self.rows)


@dataclass
class SourceFeatureStats:
    """Fitted embedding statistics: mean, shrunk covariance with its
    Cholesky factor, and the source-sample distance range."""

    mu: np.ndarray
    sigma: np.ndarray
    sigma_chol: np.ndarray
    d_min: float
    d_max: float
    shrinkage: float = DEFAULT_SHRINKAGE
    epsilon: float = DEFAULT_EPSILON

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    def write(self, path: str | Path) -> None:
        formats.write_feature_stats_raw(
            path,
            mu=self.mu,
            sigma=self.sigma,
            shrinkage=self.shrinkage,
            epsilon=self.epsilon,
            d_min=self.d_min,
            d_max=self.d_max,
        )

    @classmethod
    def read(cls, path: str | Path) -> "SourceFeatureStats":
        raw = formats.read_feature_stats_raw(path)
        chol = _cholesky(raw["sigma"])
        return cls(
            mu=raw["mu"],
            sigma=raw["sigma"],
            sigma_chol=chol,
            d_min=raw["d_min"],
            d_max=raw["d_max"],
            shrinkage=raw["shrinkage"],
            epsilon=raw["epsilon"],
        )


@dataclass
class ConceptStats:
    """Concept document frequencies over the source period."""

    n_docs: int
    freq: dict[str, int] = field(default_factory=dict)
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.n_docs < 1:
            raise ValidationError("source period must contain at least one document")
        for concept_id, count in self.freq.items():
            if not (0 <= count <= self.n_docs):
                raise ValidationError(
                    f"frequency {count} of {concept_id!r} outside [0, {self.n_docs}]"
                )

    def probability(self, concept_id: str) -> float:
        return self.freq.get(concept_id, 0) / self.n_docs

    def save(self, path: str | Path, meta: dict | None = None) -> None:
        payload = {"n_docs": self.n_docs, "epsilon": self.epsilon, "freq": self.freq}
        if meta:
            payload["_meta"] = meta
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "ConceptStats":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid concept stats JSON: {exc.msg}") from exc
        return cls(
            n_docs=payload["n_docs"],
            freq={k: int(v) for k, v in payload["freq"].items()},
            epsilon=payload.get("epsilon", DEFAULT_EPSILON),
        )


def _cholesky(sigma: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericError("covariance not positive definite after shrinkage") from exc


def fit_feature_stats(
    source_embeddings: EmbeddingMatrix, shrinkage: float = DEFAULT_SHRINKAGE,
    epsilon: float = DEFAULT_EPSILON,
) -> SourceFeatureStats:
    """Fit mean and shrunk covariance, then scan the source rows for the
    Mahalanobis distance range.

    sigma = (1 - shrinkage) * S + shrinkage * (tr(S)/d) * I with S the
    sample covariance (denominator n-1). If tr(S) vanishes (all rows
    identical) the shrinkage target falls back to the unit identity so the
    factorization still succeeds.
    """
    if not (0.0 <= shrinkage <= 1.0):
        raise ValidationError(f"shrinkage must be in [0, 1], got {shrinkage}")
    x = source_embeddings.rows
    n, d = x.shape
    if n < 2:
        raise InsufficientDataError(f"need at least 2 rows to fit covariance, got {n}")
    mu = x.mean(axis=0)
    centered = x - mu
    sample_cov = centered.T @ centered / (n - 1)
    scale = float(np.trace(sample_cov)) / d
    if scale <= 0.0:
        scale = 1.0  # degenerate rank: keep the target positive definite
    sigma = (1.0 - shrinkage) * sample_cov + shrinkage * scale * np.eye(d)
    chol = _cholesky(sigma)
    stats = SourceFeatureStats(
        mu=mu,
        sigma=sigma,
        sigma_chol=chol,
        d_min=0.0,
        d_max=0.0,
        shrinkage=shrinkage,
        epsilon=epsilon,
    )
    distances = mahalanobis_rows(x, stats)
    stats.d_min = float(distances.min())
    stats.d_max = float(distances.max())
    return stats


def mahalanobis_rows(x: np.ndarray, stats: SourceFeatureStats) -> np.ndarray:
    """Mahalanobis distance of each row of ``x`` from the fitted mean,
    via a triangular solve against the Cholesky factor."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != stats.dim:
        raise DimensionMismatchError(
            f"vector dimension {x.shape[1]} != fitted dimension {stats.dim}"
        )
    solved = solve_triangular(stats.sigma_chol, (x - stats.mu).T, lower=True)
    return np.sqrt(np.einsum("ij,ij->j", solved, solved))


def mahalanobis(x: np.ndarray, stats: SourceFeatureStats) -> float:
    """Distance of a single vector; always nonnegative."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatchError(f"expected a vector, got shape {x.shape}")
    return float(mahalanobis_rows(x[None, :], stats)[0])


def fit_concept_stats(
    source_docs: Sequence[Document],
    lexicon: ConceptLexicon | ConceptMatcher,
    epsilon: float = DEFAULT_EPSILON,
) -> ConceptStats:
    """Count, per concept, the number of distinct source documents that
    contain it (document frequency, not token frequency)."""
    if len(source_docs) == 0:
        raise InsufficientDataError("source period is empty")
    matcher = lexicon if isinstance(lexicon, ConceptMatcher) else ConceptMatcher(lexicon)
    freq: dict[str, int] = {}
    for doc in source_docs:
        for concept_id in matcher.concept_set(doc.text):
            freq[concept_id] = freq.get(concept_id, 0) + 1
    return ConceptStats(n_docs=len(source_docs), freq=freq, epsilon=epsilon)


def surprisal(concept_id: str, stats: ConceptStats) -> float:
    """-ln(p + epsilon) with p the source document-frequency probability.

    Unseen concepts score -ln(epsilon), the maximum; a concept present in
    every source document scores -ln(1 + epsilon), within epsilon of zero.
    """
    return -np.log(stats.probability(concept_id) + stats.epsilon)


def surprisal_of_set(concept_ids: Iterable[str], stats: ConceptStats) -> float:
    """Mean surprisal over a concept set; 0.0 for an empty set."""
    ids = list(concept_ids)
    if not ids:
        return 0.0
    return float(np.mean([surprisal(c, stats) for c in ids]))
