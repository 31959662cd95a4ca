"""Concept lexicon construction and in-text concept matching.

A lexicon maps concept ids to a preferred term plus synonym variants,
with an inverted index from normalized surface forms back to concept ids.
Sources: MeSH descriptor XML, delimited preferred/non-preferred term
tables, CSO-style equivalence triples, and strict-schema LLM lexicon JSON
({"entities": [{"term", "synonyms"}]}).

Matching is token-boundary aware and leftmost-longest: surface forms are
indexed as normalized token sequences and matched greedily against the
token stream of a document, so "heartland" never matches "heart".
"""

from __future__ import annotations

import json
import logging
import re
import unicodedata
import xml.etree.ElementTree as ET
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence
from urllib.parse import unquote

from .errors import ConfigError, ParseError

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_EDGE_PUNCT_RE = re.compile(r"^[\W_]+|[\W_]+$", re.UNICODE)

# Characters tolerated between consecutive tokens of a multi-token match.
_GAP_CHARS = set(" \t\n\r\f\v-/‐‑–")

# Generic single words excluded from matching by default; EuroVoc/CSO
# carry standalone entries like "information" that flood concept sets.
DEFAULT_STOPWORDS = frozenset(
    """a an the and or not of in on for to with by at from as is are was be
    this that it its data information system systems model models method
    methods analysis approach study studies paper result results use used
    new time process general other areas""".split()
)

_CSO_SYNONYM_RELATIONS = {"relatedEquivalent", "preferentialEquivalent"}


def normalize_term(term: str) -> str:
    """Normalize a surface form: NFC, lowercase, edge punctuation stripped,
    internal whitespace collapsed to single spaces."""
    s = unicodedata.normalize("NFC", term).lower()
    s = _EDGE_PUNCT_RE.sub("", s)
    return " ".join(s.split())


def term_tokens(term: str) -> tuple[str, ...]:
    """Token sequence of a normalized term."""
    return tuple(_TOKEN_RE.findall(normalize_term(term)))


@dataclass(frozen=True)
class Concept:
    concept_id: str
    preferred: str
    synonyms: tuple[str, ...]

    def surface_forms(self) -> tuple[str, ...]:
        return (self.preferred,) + self.synonyms


@dataclass(frozen=True)
class ConceptMatch:
    """One concept occurrence; ``start``/``end`` are offsets into the
    original text and ``matched_form`` is its normalized slice."""

    concept_id: str
    start: int
    end: int
    matched_form: str


class ConceptLexicon:
    """Immutable concept inventory with an inverted surface-form index."""

    def __init__(self, concepts: Iterable[Concept]):
        self.concepts: dict[str, Concept] = {}
        index: dict[str, set[str]] = defaultdict(set)
        for concept in concepts:
            if concept.concept_id in self.concepts:
                raise ConfigError(f"duplicate concept id {concept.concept_id!r}")
            self.concepts[concept.concept_id] = concept
            for form in concept.surface_forms():
                normalized = normalize_term(form)
                if normalized:
                    index[normalized].add(concept.concept_id)
        self.term_index: dict[str, frozenset[str]] = {
            form: frozenset(ids) for form, ids in index.items()
        }

    def __len__(self) -> int:
        return len(self.concepts)

    def canonical_form(self) -> list[tuple[str, tuple[str, ...]]]:
        """Id-free canonical representation, for order-insensitivity checks."""
        rows = []
        for concept in self.concepts.values():
            syns = sorted({normalize_term(s) for s in concept.synonyms} - {""})
            rows.append((normalize_term(concept.preferred), tuple(syns)))
        return sorted(rows)


def _build_lexicon(
    entries: Iterable[tuple[str | None, str, Sequence[str]]],
    id_prefix: str = "c",
) -> ConceptLexicon:
    """Assemble concepts from (id-or-None, preferred, synonyms) entries.

    Entries whose preferred term normalizes to the same string are merged
    (first id and preferred spelling win, synonym sets union). Synonyms
    equal to the preferred term after normalization are dropped.
    """
    merged: dict[str, dict] = {}
    order: list[str] = []
    used_ids: set[str] = set()
    counter = 0
    for concept_id, preferred, synonyms in entries:
        key = normalize_term(preferred)
        if not key:
            logger.warning("skipping concept with empty preferred term %r", preferred)
            continue
        if key not in merged:
            while concept_id is None or concept_id in used_ids:
                counter += 1
                concept_id = f"{id_prefix}{counter:06d}"
            used_ids.add(concept_id)
            merged[key] = {"id": concept_id, "preferred": preferred, "syns": [], "seen": set()}
            order.append(key)
        slot = merged[key]
        for syn in synonyms:
            norm = normalize_term(syn)
            if not norm or norm == key or norm in slot["seen"]:
                continue
            slot["seen"].add(norm)
            slot["syns"].append(syn)
    return ConceptLexicon(
        Concept(slot["id"], slot["preferred"], tuple(slot["syns"]))
        for slot in (merged[k] for k in order)
    )


def merge(*lexicons: ConceptLexicon) -> ConceptLexicon:
    """Union several lexicons; concepts with equal normalized preferred
    terms merge and their synonym sets union."""
    entries = []
    for lex in lexicons:
        for concept in lex.concepts.values():
            entries.append((concept.concept_id, concept.preferred, concept.synonyms))
    return _build_lexicon(_dedupe_ids(entries))


def _dedupe_ids(entries):
    seen: set[str] = set()
    for concept_id, preferred, synonyms in entries:
        if concept_id in seen:
            concept_id = None  # regenerate on collision across sources
        else:
            seen.add(concept_id)
        yield concept_id, preferred, synonyms


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

_MESH_RECORD_TAGS = {"DescriptorRecord", "SupplementalRecord"}
_MESH_NAME_TAGS = {"DescriptorName", "SupplementalRecordName"}
_MESH_UI_TAGS = {"DescriptorUI", "SupplementalRecordUI"}


def ingest_mesh_xml(path: str | Path) -> ConceptLexicon:
    """Parse a MeSH descriptor (or supplementary) XML file.

    One concept per record: preferred term = the record name, synonyms =
    all Term strings in its TermList. Records without a name are skipped
    with a warning. Supplementary records are treated like descriptors.
    """
    entries = []
    try:
        for _, elem in ET.iterparse(str(path), events=("end",)):
            if elem.tag not in _MESH_RECORD_TAGS:
                continue
            name = None
            for tag in _MESH_NAME_TAGS:
                node = elem.find(f"./{tag}/String")
                if node is not None and node.text:
                    name = node.text
                    break
            concept_id = None
            for tag in _MESH_UI_TAGS:
                node = elem.find(f"./{tag}")
                if node is not None and node.text:
                    concept_id = node.text.strip()
                    break
            if not name or not normalize_term(name):
                logger.warning("skipping record without a name (ui=%s)", concept_id)
                elem.clear()
                continue
            terms = []
            for term_elem in elem.iter("Term"):
                string_elem = term_elem.find("String")
                if string_elem is not None and string_elem.text:
                    terms.append(string_elem.text)
            entries.append((concept_id, name, terms))
            elem.clear()
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}") from exc
    return _build_lexicon(entries, id_prefix="mesh")


def ingest_tabular_thesaurus(
    path: str | Path,
    pt_column: str,
    npt_column: str,
    delimiter: str = ",",
) -> ConceptLexicon:
    """Parse a delimited preferred-term / non-preferred-term table.

    Rows are grouped by the preferred-term column; non-preferred values
    become synonyms. Rows with an empty non-preferred cell contribute the
    concept alone.
    """
    import csv

    entries: dict[str, list[str]] = {}
    order: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        if reader.fieldnames is None:
            raise ParseError("missing header row")
        for col in (pt_column, npt_column):
            if col not in reader.fieldnames:
                raise ConfigError(f"column {col!r} not in header {reader.fieldnames}")
        for row in reader:
            pt = (row.get(pt_column) or "").strip()
            npt = (row.get(npt_column) or "").strip()
            if not pt:
                logger.warning("skipping row with empty %r", pt_column)
                continue
            if pt not in entries:
                entries[pt] = []
                order.append(pt)
            if npt:
                entries[pt].append(npt)
    return _build_lexicon(
        ((None, pt, entries[pt]) for pt in order), id_prefix="thes"
    )


def _cso_value(raw: str) -> str:
    """Topic label from a CSO cell: strip angle brackets, take the last URI
    path segment, URL-decode, underscores to spaces."""
    s = raw.strip().strip("<>")
    if "://" in s:
        s = s.rstrip("/").rsplit("/", 1)[-1]
    return unquote(s).replace("_", " ")


def _cso_relation(raw: str) -> str:
    s = raw.strip().strip("<>")
    for sep in ("#", "/"):
        if sep in s:
            s = s.rsplit(sep, 1)[-1]
    return s


def ingest_cso_triples(path: str | Path, delimiter: str = ",") -> ConceptLexicon:
    """Parse CSO-style (topicA, relation, topicB) triples.

    ``relatedEquivalent`` and ``preferentialEquivalent`` edges group topics
    into one concept; the preferred label is the most common
    preferentialEquivalent target in the group, falling back to the
    lexicographically smallest member.
    """
    import csv

    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    preferred_votes: dict[str, int] = defaultdict(int)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 3:
                raise ParseError("expected 3 columns (topicA, relation, topicB)", lineno)
            a, rel, b = _cso_value(row[0]), _cso_relation(row[1]), _cso_value(row[2])
            if rel not in _CSO_SYNONYM_RELATIONS or not a or not b:
                continue
            union(a, b)
            if rel == "preferentialEquivalent":
                preferred_votes[b] += 1

    groups: dict[str, set[str]] = defaultdict(set)
    for topic in parent:
        groups[find(topic)].add(topic)
    entries = []
    for members in groups.values():
        ranked = sorted(members, key=lambda t: (-preferred_votes[t], t))
        head = ranked[0]
        entries.append((None, head, sorted(members - {head})))
    entries.sort(key=lambda e: normalize_term(e[1]))
    return _build_lexicon(entries, id_prefix="cso")


def ingest_llm_lexicon(path: str | Path, strict: bool = True) -> ConceptLexicon:
    """Parse LLM lexicon output: one JSON object (or JSON Lines of objects)
    shaped exactly as {"entities": [{"term": ..., "synonyms": [...]}]}.

    In strict mode any extra key, at either level, is rejected. Entities
    repeating a term (after normalization) have their synonym sets merged.
    """
    text = Path(path).read_text(encoding="utf-8").strip()
    if not text:
        raise ParseError("empty lexicon file")
    try:
        objects = [json.loads(text)]
    except json.JSONDecodeError:
        objects = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                objects.append(json.loads(raw))
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno) from exc
    entries = []
    for obj in objects:
        entries.extend(_llm_entries(obj, strict))
    return _build_lexicon(entries, id_prefix="llm")


def _llm_entries(obj, strict: bool):
    if not isinstance(obj, dict) or "entities" not in obj:
        raise ParseError('expected an object with an "entities" array')
    if strict and set(obj) != {"entities"}:
        raise ParseError(f"extra keys not allowed: {sorted(set(obj) - {'entities'})}")
    if not isinstance(obj["entities"], list):
        raise ParseError('"entities" must be an array')
    for entity in obj["entities"]:
        if not isinstance(entity, dict):
            raise ParseError("entity is not an object")
        if strict and set(entity) != {"term", "synonyms"}:
            raise ParseError(
                f"entity keys must be exactly term/synonyms, got {sorted(entity)}"
            )
        term = entity.get("term")
        synonyms = entity.get("synonyms", [])
        if not isinstance(term, str) or not isinstance(synonyms, list):
            raise ParseError("entity fields have wrong types")
        if not all(isinstance(s, str) for s in synonyms):
            raise ParseError("synonyms must be strings")
        if not normalize_term(term):
            logger.warning("skipping entity with empty term")
            continue
        yield None, term, synonyms


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_lexicon(path: str | Path, lexicon: ConceptLexicon, meta: dict | None = None) -> None:
    """Persist as JSON: {"concepts": [{concept_id, preferred, synonyms[]}]}."""
    payload = {
        "concepts": [
            {
                "concept_id": c.concept_id,
                "preferred": c.preferred,
                "synonyms": list(c.synonyms),
            }
            for c in lexicon.concepts.values()
        ]
    }
    if meta:
        payload["_meta"] = meta
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=1, sort_keys=True)
        fh.write("\n")


def load_lexicon(path: str | Path) -> ConceptLexicon:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid lexicon JSON: {exc.msg}") from exc
    records = payload["concepts"] if isinstance(payload, dict) else payload
    concepts = []
    for rec in records:
        try:
            concepts.append(
                Concept(rec["concept_id"], rec["preferred"], tuple(rec["synonyms"]))
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"bad concept record: {rec!r}") from exc
    return ConceptLexicon(concepts)


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------


class ConceptMatcher:
    """Multi-pattern token-trie matcher over all surface forms of a lexicon.

    Immutable after construction; safe for concurrent matching.
    """

    def __init__(
        self,
        lexicon: ConceptLexicon,
        stopwords: frozenset[str] | set[str] = DEFAULT_STOPWORDS,
    ):
        self._root: dict = {}
        self._max_len = 0
        for concept in lexicon.concepts.values():
            for form in concept.surface_forms():
                tokens = term_tokens(form)
                if not tokens:
                    continue
                if len(tokens) == 1 and tokens[0] in stopwords:
                    continue
                node = self._root
                for token in tokens:
                    node = node.setdefault(token, {})
                node.setdefault(None, set()).add(concept.concept_id)
                self._max_len = max(self._max_len, len(tokens))

    def match(self, text: str) -> list[ConceptMatch]:
        """Leftmost-longest, non-overlapping concept matches.

        Consecutive tokens of a multi-token match may be separated only by
        whitespace, hyphens, or slashes in the original text.
        """
        tokens = [(m.group(0).lower(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]
        matches: list[ConceptMatch] = []
        i = 0
        n = len(tokens)
        while i < n:
            node = self._root
            best: tuple[int, frozenset] | None = None
            j = i
            while j < n and j - i < self._max_len:
                token, start, end = tokens[j]
                if j > i:
                    gap = text[tokens[j - 1][2] : start]
                    if not gap or any(ch not in _GAP_CHARS for ch in gap):
                        break
                if token not in node:
                    break
                node = node[token]
                if None in node:
                    best = (j, node[None])
                j += 1
            if best is None:
                i += 1
                continue
            last, concept_ids = best
            start, end = tokens[i][1], tokens[last][2]
            form = normalize_term(text[start:end])
            for concept_id in sorted(concept_ids):
                matches.append(ConceptMatch(concept_id, start, end, form))
            i = last + 1
        return matches

    def concept_set(self, text: str) -> frozenset[str]:
        """Distinct concept ids detected in ``text``."""
        return frozenset(m.concept_id for m in self.match(text))


def match_concepts(
    text: str, lexicon: ConceptLexicon | ConceptMatcher
) -> tuple[list[ConceptMatch], frozenset[str]]:
    """Match concepts in ``text``; returns (matches, concept id set)."""
    matcher = lexicon if isinstance(lexicon, ConceptMatcher) else ConceptMatcher(lexicon)
    matches = matcher.match(text)
    return matches, frozenset(m.concept_id for m in matches)
