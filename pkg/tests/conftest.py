import json
import textwrap

import pytest

from driftforge.corpus import Document
from driftforge.lexicon import Concept, ConceptLexicon, ingest_mesh_xml

MESH_XML = textwrap.dedent("""\
    <?xml version="1.0"?>
    <DescriptorRecordSet LanguageCode="eng">
      <DescriptorRecord DescriptorClass="1">
        <DescriptorUI>D009203</DescriptorUI>
        <DescriptorName><String>Myocardial Infarction</String></DescriptorName>
        <ConceptList>
          <Concept PreferredConceptYN="Y">
            <TermList>
              <Term><String>Myocardial Infarction</String></Term>
              <Term><String>Heart Attack</String></Term>
            </TermList>
          </Concept>
        </ConceptList>
      </DescriptorRecord>
      <DescriptorRecord DescriptorClass="1">
        <DescriptorUI>D006973</DescriptorUI>
        <DescriptorName><String>Hypertension</String></DescriptorName>
        <ConceptList>
          <Concept PreferredConceptYN="Y">
            <TermList>
              <Term><String>High Blood Pressure</String></Term>
              <Term><String>Blood Pressure, High</String></Term>
            </TermList>
          </Concept>
        </ConceptList>
      </DescriptorRecord>
      <DescriptorRecord DescriptorClass="1">
        <DescriptorUI>D003920</DescriptorUI>
        <DescriptorName><String>Diabetes Mellitus</String></DescriptorName>
        <ConceptList>
          <Concept PreferredConceptYN="Y">
            <TermList>
              <Term><String>Diabetes</String></Term>
            </TermList>
          </Concept>
        </ConceptList>
      </DescriptorRecord>
    </DescriptorRecordSet>
    """)


@pytest.fixture
def mesh_path(tmp_path):
    path = tmp_path / "desc_fixture.xml"
    path.write_text(MESH_XML, encoding="utf-8")
    return path


@pytest.fixture
def mesh_lexicon(mesh_path):
    return ingest_mesh_xml(mesh_path)


@pytest.fixture
def tiny_lexicon():
    return ConceptLexicon(
        [
            Concept("D009203", "Myocardial Infarction", ("Heart Attack",)),
            Concept("D006973", "Hypertension", ("High Blood Pressure",)),
        ]
    )


def make_doc(doc_id="d1", text="text", year=2010, labels=("a",)):
    return Document(id=doc_id, text=text, timestamp=year, labels=frozenset(labels))


@pytest.fixture
def corpus_file(tmp_path):
    path = tmp_path / "corpus.jsonl"
    records = [
        {"id": "a", "text": "first document", "year": 2008, "labels": ["x"]},
        {"id": "b", "text": "second document", "year": 2012, "labels": ["x", "y"]},
        {"id": "c", "text": "third document", "year": 2018, "labels": ["y"]},
    ]
    path.write_text(
        "\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8"
    )
    return path
