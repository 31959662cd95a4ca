import math

import numpy as np
import pytest

from driftforge.errors import (
    DimensionMismatchError,
    UndefinedSimilarityError,
    ValidationError,
)
from driftforge.retrieval import (
    cosine_sim,
    load_retrievals,
    retrieve_topk,
    save_retrievals,
)
from driftforge.stats import EmbeddingMatrix


def emb(rows, prefix="s"):
    rows = np.asarray(rows, dtype=float)
    return EmbeddingMatrix(
        ids=[f"{prefix}{i:04d}" for i in range(rows.shape[0])], rows=rows
    )


def test_cosine_identity():
    v = np.array([1.0, 2.0, 3.0])
    assert cosine_sim(v, v) == pytest.approx(1.0, rel=1e-12)


def test_cosine_orthogonal():
    assert cosine_sim(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0


def test_cosine_forty_five_degrees():
    value = cosine_sim(np.array([1.0, 1.0]), np.array([1.0, 0.0]))
    assert value == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-12)
    assert value == pytest.approx(0.70711, abs=1e-5)


def test_cosine_zero_vector_rejected():
    with pytest.raises(UndefinedSimilarityError):
        cosine_sim(np.zeros(3), np.ones(3))


def test_cosine_shape_mismatch():
    with pytest.raises(DimensionMismatchError):
        cosine_sim(np.ones(3), np.ones(4))


def test_exact_match_is_first_neighbor():
    rng = np.random.default_rng(0)
    source = emb(rng.normal(size=(20, 8)))
    target = EmbeddingMatrix(ids=["t0"], rows=source.rows[7:8].copy())
    (result,) = retrieve_topk(["t0"], target, source, k=3)
    assert result.neighbors[0][0] == "s0007"
    assert result.neighbors[0][1] == pytest.approx(1.0, rel=1e-12)


def test_k_equal_to_source_returns_all_sorted():
    rng = np.random.default_rng(1)
    source = emb(rng.normal(size=(6, 4)))
    target = emb(rng.normal(size=(1, 4)), prefix="t")
    (result,) = retrieve_topk(["t0000"], target, source, k=6)
    sims = [s for _, s in result.neighbors]
    assert len(result.neighbors) == 6
    assert sims == sorted(sims, reverse=True)
    assert len({sid for sid, _ in result.neighbors}) == 6


def test_k_larger_than_source():
    rng = np.random.default_rng(2)
    source = emb(rng.normal(size=(3, 4)))
    target = emb(rng.normal(size=(1, 4)), prefix="t")
    (result,) = retrieve_topk(["t0000"], target, source, k=10)
    assert len(result.neighbors) == 3


def test_validation_errors():
    rng = np.random.default_rng(3)
    source = emb(rng.normal(size=(3, 4)))
    target = emb(rng.normal(size=(1, 4)), prefix="t")
    with pytest.raises(ValidationError):
        retrieve_topk(["t0000"], target, source, k=0)
    with pytest.raises(ValidationError):
        retrieve_topk(["missing"], target, source, k=1)
    with pytest.raises(DimensionMismatchError):
        retrieve_topk(["t0000"], target, emb(rng.normal(size=(3, 5))), k=1)
    with pytest.raises(UndefinedSimilarityError):
        bad = EmbeddingMatrix(ids=["s0"], rows=np.zeros((1, 4)))
        retrieve_topk(["t0000"], target, bad, k=1)


def _full_sort_oracle(target_row, source, k):
    sims = []
    for i, row in enumerate(source.rows):
        sims.append(
            (
                -float(np.dot(row, target_row) / (np.linalg.norm(row) * np.linalg.norm(target_row))),
                source.ids[i],
            )
        )
    sims.sort()
    return [sid for _, sid in sims[:k]]


def test_topk_matches_full_sort_oracle():
    rng = np.random.default_rng(50)
    source = emb(rng.normal(size=(1000, 16)))
    target = emb(rng.normal(size=(50, 16)), prefix="t")
    results = retrieve_topk(list(target.ids), target, source, k=3)
    for result in results:
        row = target.rows[target.ids.index(result.target_id)]
        assert [sid for sid, _ in result.neighbors] == _full_sort_oracle(row, source, 3)


def test_scale_invariance():
    rng = np.random.default_rng(51)
    source = emb(rng.normal(size=(200, 12)))
    target = emb(rng.normal(size=(10, 12)), prefix="t")
    base = retrieve_topk(list(target.ids), target, source, k=3)
    scaled_source = EmbeddingMatrix(
        ids=list(source.ids),
        rows=source.rows * rng.uniform(0.1, 10.0, size=(200, 1)),
    )
    scaled_target = EmbeddingMatrix(
        ids=list(target.ids),
        rows=target.rows * rng.uniform(0.1, 10.0, size=(10, 1)),
    )
    scaled = retrieve_topk(list(target.ids), scaled_target, scaled_source, k=3)
    for a, b in zip(base, scaled):
        assert [sid for sid, _ in a.neighbors] == [sid for sid, _ in b.neighbors]


def test_topk_is_prefix_of_larger_k():
    rng = np.random.default_rng(52)
    source = emb(rng.normal(size=(100, 8)))
    target = emb(rng.normal(size=(5, 8)), prefix="t")
    small = retrieve_topk(list(target.ids), target, source, k=3)
    large = retrieve_topk(list(target.ids), target, source, k=10)
    for a, b in zip(small, large):
        assert list(a.neighbors) == list(b.neighbors[:3])


def test_tie_break_by_source_id():
    source = EmbeddingMatrix(
        ids=["s-b", "s-a", "s-c"],
        rows=np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]),  # all same direction
    )
    target = EmbeddingMatrix(ids=["t"], rows=np.array([[5.0, 0.0]]))
    (result,) = retrieve_topk(["t"], target, source, k=2)
    assert [sid for sid, _ in result.neighbors] == ["s-a", "s-b"]


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(53)
    source = emb(rng.normal(size=(30, 6)))
    target = emb(rng.normal(size=(4, 6)), prefix="t")
    results = retrieve_topk(list(target.ids), target, source, k=3)
    path = tmp_path / "retr.jsonl"
    save_retrievals(path, results, meta={"seed": 0})
    loaded = load_retrievals(path)
    assert [r.target_id for r in loaded] == [r.target_id for r in results]
    for a, b in zip(loaded, results):
        assert [s for s, _ in a.neighbors] == [s for s, _ in b.neighbors]
        for (_, x), (_, y) in zip(a.neighbors, b.neighbors):
            assert x == pytest.approx(y, rel=1e-12)
