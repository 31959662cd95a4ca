import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftforge.errors import ValidationError
from driftforge.lexicon import Concept, ConceptLexicon
from driftforge.shift import (
    LogitMatrix,
    ShiftConfig,
    ShiftScores,
    ShiftSet,
    detect,
    feature_scores,
    ontology_scores,
    overlap_report,
    render_overlap_text,
    render_trend_text,
    trend_report,
    uncertainty_scores,
)
from driftforge.stats import ConceptStats, SourceFeatureStats

from conftest import make_doc


def logits(rows, ids=None):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    ids = ids or [f"d{i}" for i in range(rows.shape[0])]
    return LogitMatrix(ids=ids, rows=rows)


def _entropy_oracle(z):
    """Independent scalar implementation of the average binary entropy."""
    total = 0.0
    for value in z:
        value = max(-30.0, min(30.0, value))
        p = 1.0 / (1.0 + math.exp(-value))
        for q in (p, 1.0 - p):
            if q > 0.0:
                total -= q * math.log(q)
    return total / len(z)


def test_uncertainty_all_zero_logits():
    p_max, entropy, uncertain = uncertainty_scores(logits([[0.0, 0.0, 0.0]]))
    assert p_max[0] == pytest.approx(0.5, abs=1e-15)
    assert entropy[0] == pytest.approx(math.log(2.0), abs=1e-12)
    assert not uncertain[0]  # p_max not strictly below tau_p


def test_uncertainty_mildly_negative_logits():
    p_max, entropy, uncertain = uncertainty_scores(logits([[-0.5, -0.5]]))
    p = 1.0 / (1.0 + math.exp(0.5))
    assert p_max[0] == pytest.approx(p, rel=1e-12)
    assert p_max[0] == pytest.approx(0.3775, abs=1e-4)
    assert entropy[0] == pytest.approx(_entropy_oracle([-0.5, -0.5]), rel=1e-12)
    assert entropy[0] == pytest.approx(0.6615, abs=2e-3)
    assert uncertain[0]


def test_uncertainty_saturated_logits():
    p_max, entropy, uncertain = uncertainty_scores(logits([[8.0, -8.0]]))
    assert p_max[0] == pytest.approx(0.99966, abs=1e-5)
    assert entropy[0] == pytest.approx(_entropy_oracle([8.0, -8.0]), rel=1e-12)
    assert entropy[0] == pytest.approx(0.00302, abs=1e-4)
    assert not uncertain[0]


def test_uncertainty_zero_labels_rejected():
    with pytest.raises(ValidationError):
        uncertainty_scores(LogitMatrix(ids=["a"], rows=np.zeros((1, 0))))


def test_uncertainty_extreme_logits_stay_finite():
    p_max, entropy, _ = uncertainty_scores(logits([[500.0, -500.0]]))
    assert np.all(np.isfinite(entropy))
    assert 0.0 <= entropy[0] <= math.log(2.0)


def _stats(d_min=2.0, d_max=6.0):
    return SourceFeatureStats(
        mu=np.zeros(2),
        sigma=np.eye(2),
        sigma_chol=np.eye(2),
        d_min=d_min,
        d_max=d_max,
        epsilon=1e-12,
    )


def test_feature_score_boundaries():
    stats = _stats()
    rows = np.array([[2.0, 0.0], [6.0, 0.0], [12.0, 0.0]])  # d = 2, 6, 12
    f = feature_scores(rows, stats)
    assert f[0] == 0.0
    assert 0.0 < f[1] < 1.0 and f[1] == pytest.approx(1.0, abs=1e-9)
    assert f[2] == 1.0


def test_feature_score_formula_exact():
    stats = _stats(1.0, 3.0)
    f = feature_scores(np.array([[2.0, 0.0]]), stats)
    assert f[0] == pytest.approx((2.0 - 1.0) / (3.0 - 1.0 + 1e-12), rel=1e-12)


LEX = ConceptLexicon(
    [Concept("common", "alpha", ()), Concept("rare", "beta", ()), Concept("mid", "gamma", ())]
)


def test_ontology_scores_examples():
    concept_stats = ConceptStats(
        n_docs=100, freq={"common": 100, "rare": 1, "mid": 10}, epsilon=1e-12
    )
    docs = [
        make_doc("a", text="alpha alpha"),
        make_doc("b", text="mid gamma and beta..."),
        make_doc("c", text="no concepts here"),
    ]
    o_tail, counts, zero = ontology_scores(docs, LEX, concept_stats)
    assert o_tail[0] == pytest.approx(0.0, abs=1e-11)
    expected = (-math.log(0.1 + 1e-12) + -math.log(0.01 + 1e-12)) / 2
    assert o_tail[1] == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(3.4539, abs=1e-4)
    assert o_tail[2] == 0.0 and zero[2] and counts[2] == 0


def make_scores(ids, p_max=None, entropy=None, uncertain=None, feature=None,
                ontology=None, zero=None):
    n = len(ids)
    return ShiftScores(
        ids=list(ids),
        p_max=np.asarray(p_max if p_max is not None else [0.9] * n, dtype=float),
        entropy=np.asarray(entropy if entropy is not None else [0.1] * n, dtype=float),
        uncertain=np.asarray(uncertain if uncertain is not None else [False] * n),
        feature=np.asarray(feature if feature is not None else [0.0] * n, dtype=float),
        ontology=np.asarray(ontology if ontology is not None else [0.0] * n, dtype=float),
        concept_count=np.asarray(
            [0 if (zero is not None and zero[i]) else 1 for i in range(n)]
        ),
        zero_concept=np.asarray(zero if zero is not None else [False] * n),
    )


def test_detect_single_argmax():
    ids = [f"d{i}" for i in range(10)]
    feature = [0.1 * i for i in range(10)]
    shift_set = detect(make_scores(ids, feature=feature, ontology=feature))
    assert shift_set.feature_set == {"d9"}
    assert shift_set.ontology_set == {"d9"}


def test_detect_cardinality_bound():
    ids = [f"d{i:02d}" for i in range(20)]
    rng = np.random.default_rng(0)
    shift_set = detect(
        make_scores(ids, feature=rng.random(20), ontology=rng.random(20))
    )
    assert len(shift_set.uncertainty_set) == 0
    assert len(shift_set.shifted) <= 4  # <= 2 + 2 with possible overlap


def test_detect_empty_input():
    shift_set = detect(make_scores([]))
    assert shift_set.shifted == frozenset()


def test_detect_matches_brute_force_on_random_fixture():
    rng = np.random.default_rng(42)
    n = 500
    ids = [f"doc{i:04d}" for i in range(n)]
    config = ShiftConfig(tau_p=0.5, tau_h=0.25, rho=0.1)
    p_max = rng.random(n)
    entropy = rng.random(n) * math.log(2.0)
    feature = rng.random(n)
    ontology = rng.random(n) * 10
    zero = rng.random(n) < 0.05
    ontology[zero] = 0.0
    uncertain = (p_max < config.tau_p) & (entropy > config.tau_h)
    scores = make_scores(ids, p_max=p_max, entropy=entropy, uncertain=uncertain,
                         feature=feature, ontology=ontology, zero=zero)
    shift_set = detect(scores, config)

    # brute-force oracle
    take = math.ceil(config.rho * n)
    d_u = {ids[i] for i in range(n) if uncertain[i]}
    by_f = sorted(range(n), key=lambda i: (-feature[i], ids[i]))[:take]
    eligible = [i for i in range(n) if not zero[i]]
    by_o = sorted(eligible, key=lambda i: (-ontology[i], ids[i]))[:take]
    assert shift_set.uncertainty_set == d_u
    assert shift_set.feature_set == {ids[i] for i in by_f}
    assert shift_set.ontology_set == {ids[i] for i in by_o}
    assert shift_set.shifted == d_u | shift_set.feature_set | shift_set.ontology_set
    assert len(shift_set.feature_set) == 50 and len(shift_set.ontology_set) == 50


def test_detect_order_independent():
    rng = np.random.default_rng(1)
    n = 60
    ids = [f"d{i:02d}" for i in range(n)]
    feature = rng.random(n)
    ontology = rng.random(n)
    scores = make_scores(ids, feature=feature, ontology=ontology)
    perm = rng.permutation(n)
    shuffled = make_scores(
        [ids[i] for i in perm], feature=feature[perm], ontology=ontology[perm]
    )
    assert detect(scores) == detect(shuffled)


def test_detect_tie_break_by_ascending_id():
    ids = ["z", "a", "m"]
    shift_set = detect(make_scores(ids, feature=[0.5, 0.5, 0.5]), ShiftConfig(rho=0.34))
    # two slots, all tied: the two lexicographically smallest ids win
    assert shift_set.feature_set == {"a", "m"}


def test_detect_monotone_in_feature_score():
    ids = [f"d{i}" for i in range(10)]
    rng = np.random.default_rng(5)
    feature = rng.random(10)
    base = detect(make_scores(ids, feature=feature), ShiftConfig(rho=0.3))
    member = sorted(base.feature_set)[0]
    boosted = feature.copy()
    boosted[ids.index(member)] = min(1.0, boosted[ids.index(member)] + 0.5)
    bumped = detect(make_scores(ids, feature=boosted), ShiftConfig(rho=0.3))
    assert member in bumped.feature_set


def test_zero_concept_docs_excluded_from_ontology_ranking():
    ids = ["a", "b", "c", "d"]
    shift_set = detect(
        make_scores(ids, ontology=[9.0, 0.5, 0.4, 0.3], zero=[True, False, False, False]),
        ShiftConfig(rho=0.25),
    )
    assert shift_set.ontology_set == {"b"}  # "a" outranks but has no concepts


def test_score_ranges_property():
    rng = np.random.default_rng(8)
    z = rng.normal(scale=5.0, size=(50, 6))
    p_max, entropy, _ = uncertainty_scores(logits(z))
    assert np.all((p_max >= 0) & (p_max <= 1))
    assert np.all((entropy >= 0) & (entropy <= math.log(2.0) + 1e-12))
    stats = _stats()
    f = feature_scores(rng.normal(size=(50, 2)) * 10, stats)
    assert np.all((f >= 0) & (f <= 1))


@given(st.lists(st.floats(-30, 30), min_size=1, max_size=8))
@settings(max_examples=80, deadline=None)
def test_entropy_maximal_iff_all_logits_zero(z):
    _, entropy, _ = uncertainty_scores(logits([z]))
    if all(v == 0.0 for v in z):
        assert entropy[0] == pytest.approx(math.log(2.0), abs=1e-12)
    else:
        assert entropy[0] <= math.log(2.0) + 1e-12
        if max(abs(v) for v in z) > 1e-6:
            assert entropy[0] < math.log(2.0)


# -- reports -------------------------------------------------------------------

def test_overlap_disjoint_sets():
    shift_set = ShiftSet(
        uncertainty_set=frozenset({"a"}),
        feature_set=frozenset({"b"}),
        ontology_set=frozenset({"c"}),
    )
    report = overlap_report(shift_set, 10)
    assert report.pct_u == 10.0
    assert report.pct_u_and_o == report.pct_u_and_f == report.pct_o_and_f == 0.0
    assert report.pct_u_o_f == 0.0


def test_overlap_identical_sets_all_hundred():
    members = frozenset({"a", "b", "c"})
    report = overlap_report(ShiftSet(members, members, members), 3)
    assert report.as_row() == (100.0, 100.0, 100.0, 100.0, 100.0)


def test_overlap_planted_fixture():
    u = frozenset("abcde")
    f = frozenset("defg")
    o = frozenset("dgx")
    report = overlap_report(ShiftSet(u, f, o), 20)
    assert report.pct_u == 25.0
    assert report.pct_u_and_o == 5.0  # {d}
    assert report.pct_u_and_f == 10.0  # {d, e}
    assert report.pct_o_and_f == 10.0  # {d, g}
    assert report.pct_u_o_f == 5.0  # {d}
    assert "25.00%" in render_overlap_text(report)


def test_trend_single_year_equals_global():
    scores = make_scores(["a", "b"], feature=[0.2, 0.4], ontology=[1.0, 3.0],
                         entropy=[0.1, 0.3])
    rows = trend_report(scores, {"a": 2020, "b": 2020})
    assert len(rows) == 1
    assert rows[0].feature_mean == pytest.approx(0.3)
    assert rows[0].feature_median == pytest.approx(0.3)
    assert rows[0].ontology_mean == pytest.approx(2.0)
    assert rows[0].entropy_mean == pytest.approx(0.2)


def test_trend_two_constant_years():
    scores = make_scores(["a", "b"], feature=[0.1, 0.2])
    rows = trend_report(scores, {"a": 2019, "b": 2020})
    assert [r.year for r in rows] == [2019, 2020]
    assert rows[0].feature_mean == pytest.approx(0.1)
    assert rows[1].feature_mean == pytest.approx(0.2)


def test_trend_monotone_drift_fixture():
    rng = np.random.default_rng(13)
    ids, years, feature = [], {}, []
    for offset, year in enumerate((2017, 2018, 2019)):
        for j in range(40):
            doc_id = f"{year}-{j}"
            ids.append(doc_id)
            years[doc_id] = year
            feature.append(0.2 + 0.2 * offset + rng.random() * 0.05)
    rows = trend_report(make_scores(ids, feature=feature), years)
    means = [r.feature_mean for r in rows]
    assert means == sorted(means) and means[0] < means[-1]
    assert render_trend_text(rows).count("\n") == 4
