"""Corpus loading, temporal partitioning, and train/test splitting.

Corpus files are JSON Lines, one object per line with keys ``id`` (string),
``text`` (string), ``year`` (integer), ``labels`` (array of strings).
Timestamps are integer years; interval-deidentified corpora map each record
to its interval's start year.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

_REQUIRED_KEYS = ("id", "text", "year", "labels")


@dataclass(frozen=True)
class Document:
    """One timestamped, multi-labeled text unit."""

    id: str
    text: str
    timestamp: int
    labels: frozenset[str]

    def __post_init__(self):
        if not self.text:
            raise ValidationError(f"document {self.id!r}: text is empty")
        if not self.id:
            raise ValidationError("document id is empty")


@dataclass(frozen=True)
class TimePartition:
    """Ordered, non-overlapping half-open year ranges [start, end).

    ``source_index`` names the earliest interval used for fitting; it must
    precede ``target_index``.
    """

    intervals: tuple[tuple[int, int], ...]
    source_index: int
    target_index: int

    def __post_init__(self):
        for start, end in self.intervals:
            if start >= end:
                raise ValidationError(f"empty interval [{start}, {end})")
        for (_, prev_end), (next_start, _) in zip(self.intervals, self.intervals[1:]):
            if next_start < prev_end:
                raise ValidationError("intervals overlap or are out of order")
        n = len(self.intervals)
        if not (0 <= self.source_index < n and 0 <= self.target_index < n):
            raise ValidationError("interval index out of range")
        if self.source_index >= self.target_index:
            raise ValidationError("source interval must precede target interval")

    def locate(self, year: int) -> int | None:
        """Index of the interval containing ``year``, or None."""
        for i, (start, end) in enumerate(self.intervals):
            if start <= year < end:
                return i
        return None

    @classmethod
    def from_inclusive_ranges(
        cls, ranges: Sequence[tuple[int, int]], source_index: int, target_index: int
    ) -> "TimePartition":
        """Build from inclusive year ranges like (2008, 2010)."""
        return cls(
            intervals=tuple((a, b + 1) for a, b in ranges),
            source_index=source_index,
            target_index=target_index,
        )


@dataclass(frozen=True)
class Split:
    """Deterministic train/test partition of a set of document ids."""

    train_ids: frozenset[str]
    test_ids: frozenset[str]
    seed: int


@dataclass
class PartitionResult:
    """Interval buckets plus the documents falling outside every interval."""

    buckets: dict[int, list[str]] = field(default_factory=dict)
    dropped: list[str] = field(default_factory=list)


def parse_document(record: dict, line: int | None = None) -> Document:
    """Validate one raw JSONL record and build a Document."""
    for key in _REQUIRED_KEYS:
        if key not in record:
            raise ParseError(f"record missing field {key!r}", line)
    if not isinstance(record["id"], str):
        raise ParseError("field 'id' must be a string", line)
    if not isinstance(record["text"], str):
        raise ParseError("field 'text' must be a string", line)
    if not isinstance(record["year"], int) or isinstance(record["year"], bool):
        raise ParseError("field 'year' must be an integer", line)
    if not isinstance(record["labels"], list) or not all(
        isinstance(x, str) for x in record["labels"]
    ):
        raise ParseError("field 'labels' must be an array of strings", line)
    return Document(
        id=record["id"],
        text=record["text"],
        timestamp=record["year"],
        labels=frozenset(record["labels"]),
    )


def load_corpus(
    path: str | Path, label_vocab: Iterable[str] | None = None
) -> list[Document]:
    """Load and validate a JSONL corpus.

    When ``label_vocab`` is given, records carrying labels outside it are
    rejected. Duplicate ids are always rejected.
    """
    vocab = frozenset(label_vocab) if label_vocab is not None else None
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno) from exc
            if not isinstance(record, dict):
                raise ParseError("record is not a JSON object", lineno)
            doc = parse_document(record, lineno)
            if doc.id in seen:
                raise ValidationError(f"duplicate document id {doc.id!r}")
            if vocab is not None:
                unknown = doc.labels - vocab
                if unknown:
                    raise ValidationError(
                        f"document {doc.id!r}: unknown labels {sorted(unknown)}"
                    )
            seen.add(doc.id)
            docs.append(doc)
    return docs


def save_corpus(path: str | Path, docs: Iterable[Document]) -> None:
    """Write documents back out in the corpus JSONL schema."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(
                json.dumps(
                    {
                        "id": doc.id,
                        "text": doc.text,
                        "year": doc.timestamp,
                        "labels": sorted(doc.labels),
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def label_vocabulary(docs: Iterable[Document]) -> list[str]:
    """Sorted union of all labels present in ``docs``."""
    vocab: set[str] = set()
    for doc in docs:
        vocab |= doc.labels
    return sorted(vocab)


def partition_by_time(
    corpus: Sequence[Document], partition: TimePartition, strict: bool = False
) -> PartitionResult:
    """Bucket document ids by interval.

    Documents whose timestamp falls outside every interval are dropped with
    a warning, or rejected when ``strict`` is set. Buckets are disjoint and,
    together with the dropped list, cover the corpus exactly.
    """
    result = PartitionResult(buckets={i: [] for i in range(len(partition.intervals))})
    for doc in corpus:
        idx = partition.locate(doc.timestamp)
        if idx is None:
            if strict:
                raise ValidationError(
                    f"document {doc.id!r}: year {doc.timestamp} outside all intervals"
                )
            result.dropped.append(doc.id)
        else:
            result.buckets[idx].append(doc.id)
    if result.dropped:
        logger.warning(
            "dropped %d documents with out-of-range timestamps", len(result.dropped)
        )
    return result


def split_train_test(ids: Iterable[str], ratio: float, seed: int) -> Split:
    """Split ids into train/test with |train| = round-half-up(ratio * N).

    Pure function of (ids, ratio, seed): the input order does not matter
    because ids are sorted before the seeded shuffle.
    """
    if not (0.0 < ratio < 1.0):
        raise ValidationError(f"ratio must be in (0, 1), got {ratio}")
    ordered = sorted(set(ids))
    n = len(ordered)
    if n == 0:
        raise ValidationError("cannot split an empty id set")
    n_train = int(math.floor(ratio * n + 0.5))
    rng = random.Random(seed)
    rng.shuffle(ordered)
    return Split(
        train_ids=frozenset(ordered[:n_train]),
        test_ids=frozenset(ordered[n_train:]),
        seed=seed,
    )
