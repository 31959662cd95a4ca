"""Exact top-k retrieval of source documents by cosine similarity.

Brute-force scan over the source embedding matrix; results are
deterministic, with similarity ties broken by ascending source id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, UndefinedSimilarityError, ValidationError
from .stats import EmbeddingMatrix


@dataclass(frozen=True)
class RetrievalResult:
    """Ordered neighbors of one target document."""

    target_id: str
    neighbors: tuple[tuple[str, float], ...]  # (source_id, similarity), best first


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """dot(a, b) / (|a| * |b|); raises on a zero vector."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatchError(f"incompatible shapes {a.shape} and {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise UndefinedSimilarityError("cosine similarity undefined for zero vectors")
    return float(np.dot(a, b) / (na * nb))


def _normalize_rows(m: EmbeddingMatrix, what: str) -> np.ndarray:
    norms = np.linalg.norm(m.rows, axis=1)
    if np.any(norms == 0.0):
        bad = [m.ids[i] for i in np.nonzero(norms == 0.0)[0][:5]]
        raise UndefinedSimilarityError(f"zero {what} embedding rows: {bad}")
    return m.rows / norms[:, None]


def retrieve_topk(
    target_ids: Sequence[str],
    target_emb: EmbeddingMatrix,
    source_emb: EmbeddingMatrix,
    k: int,
) -> list[RetrievalResult]:
    """Top-k most similar source documents for each requested target.

    If k exceeds the source count, all sources are returned in order.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if source_emb.n == 0:
        raise ValidationError("source embedding matrix is empty")
    if target_emb.dim != source_emb.dim:
        raise DimensionMismatchError(
            f"target dim {target_emb.dim} != source dim {source_emb.dim}"
        )
    row_of = {doc_id: i for i, doc_id in enumerate(target_emb.ids)}
    missing = [t for t in target_ids if t not in row_of]
    if missing:
        raise ValidationError(f"target ids without embeddings: {missing[:5]}")

    source_unit = _normalize_rows(source_emb, "source")
    target_unit = _normalize_rows(target_emb, "target")
    # Rank of each source id in ascending lexicographic order, for tie-breaks.
    id_rank = np.empty(source_emb.n, dtype=np.int64)
    id_rank[np.argsort(np.asarray(source_emb.ids, dtype=object))] = np.arange(source_emb.n)

    take = min(k, source_emb.n)
    results = []
    for target_id in target_ids:
        sims = source_unit @ target_unit[row_of[target_id]]
        order = np.lexsort((id_rank, -sims))[:take]
        results.append(
            RetrievalResult(
                target_id=target_id,
                neighbors=tuple(
                    (source_emb.ids[j], float(sims[j])) for j in order
                ),
            )
        )
    return results


def save_retrievals(
    path: str | Path, results: Sequence[RetrievalResult], meta: dict | None = None
) -> None:
    """JSON Lines: {target_id, neighbors: [{source_id, sim}]} per line."""
    with open(path, "w", encoding="utf-8") as fh:
        if meta:
            fh.write(json.dumps({"_meta": meta}, sort_keys=True) + "\n")
        for result in results:
            fh.write(
                json.dumps(
                    {
                        "target_id": result.target_id,
                        "neighbors": [
                            {"source_id": sid, "sim": sim}
                            for sid, sim in result.neighbors
                        ],
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def load_retrievals(path: str | Path) -> list[RetrievalResult]:
    results = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            record = json.loads(raw)
            if "_meta" in record:
                continue
            results.append(
                RetrievalResult(
                    target_id=record["target_id"],
                    neighbors=tuple(
                        (n["source_id"], float(n["sim"])) for n in record["neighbors"]
                    ),
                )
            )
    return results
