"""Synonym substitution over retrieved source documents.

Variants keep the gold labels of their origin and record every
substitution (span in the origin text, original slice, replacement,
concept id), so the origin is reconstructible and the batch replayable.
Derived per-variant seeds make augmentation deterministic regardless of
processing order.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import Document
from .errors import ValidationError
from .lexicon import ConceptLexicon, ConceptMatch, ConceptMatcher, normalize_term
from .retrieval import RetrievalResult


@dataclass(frozen=True)
class Substitution:
    start: int  # span in the origin text
    end: int
    original: str
    replacement: str
    concept_id: str


@dataclass(frozen=True)
class AugmentedSample:
    origin_id: str
    variant_index: int  # 0 = the unmodified original
    text: str
    labels: frozenset[str]
    substitutions: tuple[Substitution, ...]


@dataclass(frozen=True)
class AugmentConfig:
    variants: int = 1
    max_subs: int = 3
    include_originals: bool = True
    dedupe_retrieved: bool = False
    seed: int = 0


@dataclass
class AugmentedBatch:
    samples: list[AugmentedSample] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)


def derive_seed(global_seed: int, doc_id: str, variant_index: int) -> int:
    """Stable per-variant seed; independent of processing order."""
    digest = hashlib.blake2b(
        f"{global_seed}:{doc_id}:{variant_index}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def _match_case(replacement: str, matched: str) -> str:
    """Copy the capitalization pattern (lower / Title / UPPER) of the match."""
    letters = [ch for ch in matched if ch.isalpha()]
    if not letters:
        return replacement
    if all(ch.isupper() for ch in letters) and len(letters) > 1:
        return replacement.upper()
    if matched[:1].isupper() and matched.istitle():
        return " ".join(w[:1].upper() + w[1:] for w in replacement.split(" "))
    if all(ch.islower() for ch in letters):
        return replacement.lower()
    return replacement


def _replacement_pool(
    lexicon: ConceptLexicon, concept_id: str, matched_form: str
) -> list[str]:
    """Surface forms of the concept usable as replacements: distinct from the
    matched form after normalization, deduplicated, in lexicon order."""
    concept = lexicon.concepts[concept_id]
    pool = []
    seen = set()
    for form in concept.surface_forms():
        norm = normalize_term(form)
        if not norm or norm == matched_form or norm in seen:
            continue
        seen.add(norm)
        pool.append(form)
    return pool


def _grouped_matches(matches: Sequence[ConceptMatch]) -> list[list[ConceptMatch]]:
    """Group same-span matches (one span may name several concepts)."""
    groups: dict[tuple[int, int], list[ConceptMatch]] = {}
    for m in matches:
        groups.setdefault((m.start, m.end), []).append(m)
    return [groups[span] for span in sorted(groups)]


def _candidate_groups(
    doc: Document, lexicon: ConceptLexicon, matcher: ConceptMatcher
) -> list[tuple[list[ConceptMatch], ConceptLexicon]]:
    groups = []
    for group in _grouped_matches(matcher.match(doc.text)):
        usable = [
            m for m in group if _replacement_pool(lexicon, m.concept_id, m.matched_form)
        ]
        if usable:
            groups.append((usable, lexicon))
    return groups


def substitute_synonyms(
    doc: Document,
    lexicon: ConceptLexicon,
    rng_seed: int,
    max_subs: int = 3,
    variants: int = 1,
    matcher: ConceptMatcher | None = None,
    priority_lexicon: ConceptLexicon | None = None,
    priority_matcher: ConceptMatcher | None = None,
) -> list[AugmentedSample]:
    """Produce up to ``variants`` synonym-substituted copies of ``doc``.

    Each variant samples up to ``max_subs`` of the non-overlapping concept
    matches and replaces each with a randomly chosen alternative surface
    form of its concept. When ``priority_lexicon`` is given its matches
    consume the substitution budget first (e.g. to prefer LLM-derived
    synonyms over thesaurus ones). Variants in which nothing could be
    substituted are dropped, so a document without usable matches yields an
    empty list.
    """
    if matcher is None:
        matcher = ConceptMatcher(lexicon)
    preferred: list[tuple[list[ConceptMatch], ConceptLexicon]] = []
    if priority_lexicon is not None:
        if priority_matcher is None:
            priority_matcher = ConceptMatcher(priority_lexicon)
        preferred = _candidate_groups(doc, priority_lexicon, priority_matcher)
    taken_spans = [(g[0].start, g[0].end) for g, _ in preferred]
    regular = [
        (group, lex)
        for group, lex in _candidate_groups(doc, lexicon, matcher)
        if not any(group[0].start < e and s < group[0].end for s, e in taken_spans)
    ]
    if not preferred and not regular:
        return []

    samples = []
    for variant_index in range(1, variants + 1):
        rng = random.Random(derive_seed(rng_seed, doc.id, variant_index))
        chosen = rng.sample(preferred, k=min(max_subs, len(preferred)))
        budget = max_subs - len(chosen)
        if budget > 0 and regular:
            chosen = chosen + rng.sample(regular, k=min(budget, len(regular)))
        subs = []
        for group, lex in sorted(chosen, key=lambda c: c[0][0].start):
            match = group[0] if len(group) == 1 else rng.choice(group)
            pool = _replacement_pool(lex, match.concept_id, match.matched_form)
            original = doc.text[match.start : match.end]
            replacement = _match_case(rng.choice(pool), original)
            if normalize_term(replacement) == match.matched_form:
                continue  # case-folding collapsed the choice back onto the match
            subs.append(
                Substitution(
                    start=match.start,
                    end=match.end,
                    original=original,
                    replacement=replacement,
                    concept_id=match.concept_id,
                )
            )
        if not subs:
            continue
        samples.append(
            AugmentedSample(
                origin_id=doc.id,
                variant_index=variant_index,
                text=apply_substitutions(doc.text, subs),
                labels=doc.labels,
                substitutions=tuple(subs),
            )
        )
    return samples


def apply_substitutions(text: str, subs: Sequence[Substitution]) -> str:
    """Apply substitutions recorded against ``text`` (spans must not overlap)."""
    pieces = []
    cursor = 0
    for sub in sorted(subs, key=lambda s: s.start):
        if sub.start < cursor or sub.end > len(text):
            raise ValidationError("substitution spans overlap or exceed the text")
        pieces.append(text[cursor : sub.start])
        pieces.append(sub.replacement)
        cursor = sub.end
    pieces.append(text[cursor:])
    return "".join(pieces)


def revert_substitutions(variant_text: str, subs: Sequence[Substitution]) -> str:
    """Reconstruct the origin text from a variant and its substitution log."""
    pieces = []
    cursor = 0  # position in the variant text
    shift = 0  # cumulative length delta introduced so far
    for sub in sorted(subs, key=lambda s: s.start):
        start = sub.start + shift
        end = start + len(sub.replacement)
        if variant_text[start:end] != sub.replacement:
            raise ValidationError("substitution log does not match the variant text")
        pieces.append(variant_text[cursor:start])
        pieces.append(sub.original)
        cursor = end
        shift += len(sub.replacement) - (sub.end - sub.start)
    pieces.append(variant_text[cursor:])
    return "".join(pieces)


def augment_batch(
    retrievals: Sequence[RetrievalResult],
    source_corpus: Mapping[str, Document] | Sequence[Document],
    lexicon: ConceptLexicon,
    config: AugmentConfig = AugmentConfig(),
    matcher: ConceptMatcher | None = None,
    priority_lexicon: ConceptLexicon | None = None,
) -> AugmentedBatch:
    """Expand retrieval results into a training batch.

    The batch holds each retrieved source document (kept once per retrieval
    unless ``dedupe_retrieved``) as variant 0 when ``include_originals``,
    followed by its synonym variants. Labels always equal the origin's.
    """
    if not isinstance(source_corpus, Mapping):
        source_corpus = {doc.id: doc for doc in source_corpus}
    if matcher is None:
        matcher = ConceptMatcher(lexicon)
    priority_matcher = (
        ConceptMatcher(priority_lexicon) if priority_lexicon is not None else None
    )

    retrieved_ids: list[str] = []
    seen: set[str] = set()
    for result in retrievals:
        for source_id, _ in result.neighbors:
            if config.dedupe_retrieved:
                if source_id in seen:
                    continue
                seen.add(source_id)
            retrieved_ids.append(source_id)

    batch = AugmentedBatch()
    for source_id in retrieved_ids:
        doc = source_corpus.get(source_id)
        if doc is None:
            raise ValidationError(f"retrieved source id {source_id!r} not in corpus")
        if config.include_originals:
            batch.samples.append(
                AugmentedSample(
                    origin_id=doc.id,
                    variant_index=0,
                    text=doc.text,
                    labels=doc.labels,
                    substitutions=(),
                )
            )
        batch.samples.extend(
            substitute_synonyms(
                doc,
                lexicon,
                rng_seed=config.seed,
                max_subs=config.max_subs,
                variants=config.variants,
                matcher=matcher,
                priority_lexicon=priority_lexicon,
                priority_matcher=priority_matcher,
            )
        )
    return batch


def save_batch(path: str | Path, batch: AugmentedBatch, meta: dict | None = None) -> None:
    """JSON Lines: {origin_id, variant_index, text, labels, substitutions[]}."""
    with open(path, "w", encoding="utf-8") as fh:
        if meta:
            fh.write(json.dumps({"_meta": meta}, sort_keys=True) + "\n")
        for sample in batch.samples:
            fh.write(
                json.dumps(
                    {
                        "origin_id": sample.origin_id,
                        "variant_index": sample.variant_index,
                        "text": sample.text,
                        "labels": sorted(sample.labels),
                        "substitutions": [
                            {
                                "start": s.start,
                                "end": s.end,
                                "original": s.original,
                                "replacement": s.replacement,
                                "concept_id": s.concept_id,
                            }
                            for s in sample.substitutions
                        ],
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def load_batch(path: str | Path) -> AugmentedBatch:
    batch = AugmentedBatch()
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            record = json.loads(raw)
            if "_meta" in record:
                continue
            batch.samples.append(
                AugmentedSample(
                    origin_id=record["origin_id"],
                    variant_index=record["variant_index"],
                    text=record["text"],
                    labels=frozenset(record["labels"]),
                    substitutions=tuple(
                        Substitution(
                            start=s["start"],
                            end=s["end"],
                            original=s["original"],
                            replacement=s["replacement"],
                            concept_id=s["concept_id"],
                        )
                        for s in record["substitutions"]
                    ),
                )
            )
    return batch
