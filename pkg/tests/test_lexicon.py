import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftforge.errors import ConfigError, ParseError
from driftforge.lexicon import (
    Concept,
    ConceptLexicon,
    ConceptMatcher,
    ingest_cso_triples,
    ingest_llm_lexicon,
    ingest_mesh_xml,
    ingest_tabular_thesaurus,
    load_lexicon,
    match_concepts,
    merge,
    normalize_term,
    save_lexicon,
    term_tokens,
)


# -- normalization -----------------------------------------------------------

def test_normalize_lowercase_whitespace_edges():
    assert normalize_term("  Myocardial   Infarction! ") == "myocardial infarction"
    assert normalize_term("(economics)") == "economics"
    assert normalize_term("Heart-Attack") == "heart-attack"
    assert normalize_term("") == ""


def test_term_tokens():
    assert term_tokens("Heart-Attack") == ("heart", "attack")
    assert term_tokens("ICD 10 codes") == ("icd", "10", "codes")


# -- MeSH --------------------------------------------------------------------

def test_mesh_concept_with_one_synonym(mesh_lexicon):
    concept = mesh_lexicon.concepts["D009203"]
    assert concept.preferred == "Myocardial Infarction"
    assert concept.synonyms == ("Heart Attack",)


def test_mesh_empty_file(tmp_path):
    path = tmp_path / "empty.xml"
    path.write_text("<DescriptorRecordSet></DescriptorRecordSet>")
    assert len(ingest_mesh_xml(path)) == 0


def test_mesh_term_index_inversion(mesh_lexicon):
    for concept in mesh_lexicon.concepts.values():
        for form in concept.surface_forms():
            assert concept.concept_id in mesh_lexicon.term_index[normalize_term(form)]


def test_mesh_malformed_xml(tmp_path):
    path = tmp_path / "broken.xml"
    path.write_text("<DescriptorRecordSet><DescriptorRecord>")
    with pytest.raises(ParseError):
        ingest_mesh_xml(path)


def test_mesh_record_without_name_skipped(tmp_path, caplog):
    path = tmp_path / "noname.xml"
    path.write_text(
        "<DescriptorRecordSet><DescriptorRecord>"
        "<DescriptorUI>D000001</DescriptorUI>"
        "</DescriptorRecord></DescriptorRecordSet>"
    )
    assert len(ingest_mesh_xml(path)) == 0


# -- tabular PT/NPT ----------------------------------------------------------

def test_tabular_grouping(tmp_path):
    path = tmp_path / "thesaurus.csv"
    path.write_text(
        "PT,NPT\neconomics,economic affairs\neconomics,economy\n", encoding="utf-8"
    )
    lex = ingest_tabular_thesaurus(path, "PT", "NPT")
    assert len(lex) == 1
    (concept,) = lex.concepts.values()
    assert concept.preferred == "economics"
    assert concept.synonyms == ("economic affairs", "economy")


def test_tabular_empty_npt(tmp_path):
    path = tmp_path / "thesaurus.csv"
    path.write_text("PT,NPT\nlaw,\n", encoding="utf-8")
    (concept,) = ingest_tabular_thesaurus(path, "PT", "NPT").concepts.values()
    assert concept.synonyms == ()


def test_tabular_missing_column(tmp_path):
    path = tmp_path / "thesaurus.csv"
    path.write_text("PT,NPT\nlaw,legislation\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="BROKEN"):
        ingest_tabular_thesaurus(path, "PT", "BROKEN")


def test_tabular_hundred_rows_against_groupby_oracle(tmp_path):
    rng = random.Random(5)
    rows = []
    expected: dict[str, set] = {}
    for i in range(100):
        pt = f"term {rng.randrange(12)}"
        npt = f"variant {i}"
        rows.append(f"{pt}\t{npt}")
        expected.setdefault(normalize_term(pt), set()).add(normalize_term(npt))
    path = tmp_path / "thesaurus.tsv"
    path.write_text("PT\tNPT\n" + "\n".join(rows) + "\n", encoding="utf-8")
    lex = ingest_tabular_thesaurus(path, "PT", "NPT", delimiter="\t")
    got = {
        normalize_term(c.preferred): {normalize_term(s) for s in c.synonyms}
        for c in lex.concepts.values()
    }
    assert got == expected


# -- CSO triples -------------------------------------------------------------

def test_cso_equivalence_groups(tmp_path):
    path = tmp_path / "cso.csv"
    path.write_text(
        "<https://cso.example/topics/neural_networks>,"
        "<http://cso.example/schema/cso#preferentialEquivalent>,"
        "<https://cso.example/topics/neural_network>\n"
        "<https://cso.example/topics/nn_models>,"
        "<http://cso.example/schema/cso#relatedEquivalent>,"
        "<https://cso.example/topics/neural_networks>\n"
        "<https://cso.example/topics/ontology>,"
        "<http://cso.example/schema/cso#superTopicOf>,"
        "<https://cso.example/topics/neural_networks>\n",
        encoding="utf-8",
    )
    lex = ingest_cso_triples(path)
    assert len(lex) == 1
    (concept,) = lex.concepts.values()
    assert concept.preferred == "neural network"  # preferentialEquivalent target
    assert set(concept.synonyms) == {"neural networks", "nn models"}


# -- LLM lexicon -------------------------------------------------------------

def test_llm_exact_shape(tmp_path):
    path = tmp_path / "llm.json"
    path.write_text(
        json.dumps(
            {"entities": [{"term": "neural network", "synonyms": ["connectionist model"]}]}
        )
    )
    lex = ingest_llm_lexicon(path)
    (concept,) = lex.concepts.values()
    assert concept.preferred == "neural network"
    assert concept.synonyms == ("connectionist model",)


def test_llm_empty_entities(tmp_path):
    path = tmp_path / "llm.json"
    path.write_text('{"entities": []}')
    assert len(ingest_llm_lexicon(path)) == 0


def test_llm_duplicate_terms_merge_synonym_sets(tmp_path):
    path = tmp_path / "llm.json"
    path.write_text(
        json.dumps(
            {
                "entities": [
                    {"term": "neural network", "synonyms": ["connectionist model"]},
                    {"term": "Neural Network", "synonyms": ["artificial neural net"]},
                ]
            }
        )
    )
    lex = ingest_llm_lexicon(path)
    assert len(lex) == 1
    (concept,) = lex.concepts.values()
    # set-union oracle on normalized forms
    assert {normalize_term(s) for s in concept.synonyms} == {
        "connectionist model",
        "artificial neural net",
    }


def test_llm_extra_keys_rejected_in_strict_mode(tmp_path):
    path = tmp_path / "llm.json"
    path.write_text('{"entities": [], "comment": "hi"}')
    with pytest.raises(ParseError, match="extra keys"):
        ingest_llm_lexicon(path)
    assert len(ingest_llm_lexicon(path, strict=False)) == 0


def test_llm_jsonl_of_objects(tmp_path):
    path = tmp_path / "llm.jsonl"
    path.write_text(
        '{"entities": [{"term": "alpha", "synonyms": ["a1"]}]}\n'
        '{"entities": [{"term": "beta", "synonyms": ["b1"]}]}\n'
    )
    assert len(ingest_llm_lexicon(path)) == 2


# -- merge -------------------------------------------------------------------

def test_merge_with_empty_is_identity(tiny_lexicon):
    merged = merge(tiny_lexicon, ConceptLexicon([]))
    assert merged.canonical_form() == tiny_lexicon.canonical_form()


def test_merge_shared_preferred_term():
    a = ConceptLexicon([Concept("x1", "Economics", ("economic affairs",))])
    b = ConceptLexicon([Concept("y1", "economics", ("economy",))])
    merged = merge(a, b)
    assert len(merged) == 1
    (concept,) = merged.concepts.values()
    assert {normalize_term(s) for s in concept.synonyms} == {
        "economic affairs",
        "economy",
    }


def test_merge_order_insensitive_up_to_ids(mesh_lexicon, tiny_lexicon):
    ab = merge(mesh_lexicon, tiny_lexicon)
    ba = merge(tiny_lexicon, mesh_lexicon)
    assert ab.canonical_form() == ba.canonical_form()


# -- persistence --------------------------------------------------------------

def test_save_load_roundtrip(tmp_path, mesh_lexicon):
    path = tmp_path / "lexicon.json"
    save_lexicon(path, mesh_lexicon)
    loaded = load_lexicon(path)
    assert loaded.canonical_form() == mesh_lexicon.canonical_form()
    assert set(loaded.concepts) == set(mesh_lexicon.concepts)


# -- matching ----------------------------------------------------------------

def test_match_synonym_hit(mesh_lexicon):
    matches, concepts = match_concepts("acute heart attack", mesh_lexicon)
    assert concepts == {"D009203"}
    (m,) = matches
    assert (m.start, m.end) == (6, 18)
    assert m.matched_form == "heart attack"


def test_match_respects_token_boundary(mesh_lexicon):
    lex = ConceptLexicon([Concept("c1", "heart", ())])
    _, concepts = match_concepts("heartland is not a heart", lex)
    assert concepts == {"c1"}
    matches, _ = match_concepts("heartland", lex)
    assert matches == []


def test_match_leftmost_longest(tiny_lexicon):
    lex = ConceptLexicon(
        [
            Concept("short", "heart", ()),
            Concept("long", "heart attack", ()),
        ]
    )
    matches, concepts = match_concepts("a heart attack happened", lex)
    assert concepts == {"long"}
    # no reported match strictly contained in another with the same start
    starts = {}
    for m in matches:
        assert starts.setdefault(m.start, m.end) == m.end


def test_match_multitoken_gap_rules(mesh_lexicon):
    assert match_concepts("heart-attack", mesh_lexicon)[1] == {"D009203"}
    assert match_concepts("heart attack", mesh_lexicon)[1] == {"D009203"}
    assert match_concepts("heart. attack", mesh_lexicon)[1] == set()


def test_match_stopwords_excluded():
    lex = ConceptLexicon([Concept("c1", "the", ()), Concept("c2", "treaty", ())])
    _, concepts = match_concepts("the treaty", lex)
    assert concepts == {"c2"}


def _naive_matcher(text, lexicon):
    """Independent oracle: enumerate every surface-form occurrence over the
    token stream, then apply greedy leftmost-longest selection."""
    import re

    token_re = re.compile(r"[^\W_]+", re.UNICODE)
    tokens = [(m.group(0).lower(), m.start(), m.end()) for m in token_re.finditer(text)]
    gap_ok = lambda s: s and all(c in " \t\n\r\f\v-/‐‑–" for c in s)

    patterns = []
    for concept in lexicon.concepts.values():
        for form in concept.surface_forms():
            toks = term_tokens(form)
            if toks:
                patterns.append((toks, concept.concept_id))

    candidates = []  # (start_tok, end_tok, concept_id)
    for i in range(len(tokens)):
        for toks, cid in patterns:
            j = i
            ok = True
            for t_index, t in enumerate(toks):
                if j >= len(tokens) or tokens[j][0] != t:
                    ok = False
                    break
                if t_index > 0 and not gap_ok(text[tokens[j - 1][2]:tokens[j][1]]):
                    ok = False
                    break
                j += 1
            if ok:
                candidates.append((i, j - 1, cid))
    chosen = []
    pos = 0
    while pos < len(tokens):
        here = [c for c in candidates if c[0] == pos]
        if not here:
            pos += 1
            continue
        longest = max(c[1] for c in here)
        chosen.extend(sorted(c[2] for c in here if c[1] == longest))
        pos = longest + 1
    return chosen


def test_match_agrees_with_naive_scan_oracle(mesh_lexicon):
    rng = random.Random(3)
    vocabulary = [
        "acute", "heart", "attack", "myocardial", "infarction", "high",
        "blood", "pressure", "diabetes", "patient", "with", "history",
        "heartland", "pressures", "chronic",
    ]
    matcher = ConceptMatcher(mesh_lexicon)
    for _ in range(50):
        words = [rng.choice(vocabulary) for _ in range(rng.randint(4, 18))]
        text = " ".join(words)
        got = [m.concept_id for m in matcher.match(text)]
        assert got == _naive_matcher(text, mesh_lexicon), text


def test_match_concatenation_offsets(mesh_lexicon):
    matcher = ConceptMatcher(mesh_lexicon)
    a = "patient had a heart attack yesterday"
    b = "diabetes and high blood pressure are chronic"
    joined = a + " qqsep " + b
    combined = matcher.match(joined)
    expect = matcher.match(a) + [
        type(m)(m.concept_id, m.start + len(a) + 7, m.end + len(a) + 7, m.matched_form)
        for m in matcher.match(b)
    ]
    assert combined == expect


@given(st.text(max_size=200))
@settings(max_examples=40, deadline=None)
def test_match_never_crashes_and_spans_valid(text):
    lex = ConceptLexicon(
        [Concept("c1", "alpha beta", ("gamma",)), Concept("c2", "delta", ())]
    )
    matches, _ = match_concepts(text, lex)
    for m in matches:
        assert 0 <= m.start < m.end <= len(text)
        assert m.matched_form == normalize_term(text[m.start:m.end])
