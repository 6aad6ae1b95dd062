import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn import metrics as skm

from lexhmm.corpus import Corpus
from lexhmm.eval import (class_report, contingency, evaluate, extract_classes, format_class_report,
                         format_metrics, format_zipf_table, homogeneity_completeness_v, many_to_one,
                         many_to_one_mapping, mean_class_size, v_measure, zipf_fit, zipf_table)

from conftest import gold_toy

labels = st.lists(st.tuples(st.integers(0, 5), st.integers(0, 4)), min_size=1, max_size=200)


def test_m1_hand_mapping():
    # [DERIVED] c0: DT x5, NN x1; c1: NN x3 -> (5 + 3) / 9
    pred = [0] * 6 + [1] * 3
    gold = ["DT"] * 5 + ["NN"] + ["NN"] * 3
    assert many_to_one(pred, gold) == pytest.approx(8 / 9, abs=1e-15)
    assert many_to_one_mapping(pred, gold) == {0: "DT", 1: "NN"}


def test_m1_trivial_cases():
    gold = [0, 1, 2, 2, 1, 0, 2]
    assert many_to_one([7, 5, 3, 3, 5, 7, 3], gold) == 1.0
    assert many_to_one([0] * 7, gold) == 3 / 7
    with pytest.raises(ValueError):
        many_to_one([0, 1], [0])
    with pytest.raises(ValueError):
        many_to_one([], [])


def test_m1_ties_go_to_lowest_gold():
    assert many_to_one_mapping([0, 0], [1, 0]) == {0: 0}


@given(labels, st.permutations(range(6)))
@settings(max_examples=100, deadline=None)
def test_m1_properties(pairs, perm):
    pred = np.array([p for p, _ in pairs])
    gold = np.array([g for _, g in pairs])
    m1 = many_to_one(pred, gold)
    # oracle: explicit counting
    best = sum(max(np.sum((pred == c) & (gold == g)) for g in set(gold.tolist())) for c in set(pred.tolist()))
    assert m1 == pytest.approx(best / len(pairs))
    assert m1 >= np.bincount(gold).max() / len(gold) - 1e-12
    assert many_to_one(np.asarray(perm)[pred], gold) == m1


@given(labels)
@settings(max_examples=100, deadline=None)
def test_v_measure_matches_sklearn(pairs):
    pred = [p for p, _ in pairs]
    gold = [g for _, g in pairs]
    h, c, v = homogeneity_completeness_v(pred, gold)
    sh, sc, sv = skm.homogeneity_completeness_v_measure(gold, pred)
    assert h == pytest.approx(sh, abs=1e-9)
    assert c == pytest.approx(sc, abs=1e-9)
    assert v == pytest.approx(sv, abs=1e-9)
    assert 0.0 <= v <= 1.0


def test_v_measure_trivial_cases():
    assert v_measure([1, 1, 0, 2], [5, 5, 3, 4]) == 1.0
    h, c, v = homogeneity_completeness_v([0, 0, 0, 0], ["a", "b", "a", "b"])
    assert h == 0.0 and v == 0.0 and c == 1.0


def test_v_measure_random_is_near_zero():
    rng = np.random.default_rng(0)
    gold = rng.integers(0, 10, 100_000)
    pred = rng.integers(0, 10, 100_000)
    assert v_measure(pred, gold) < 0.05


def test_contingency_counts():
    t, pu, gu = contingency([1, 1, 2], ["x", "y", "y"])
    assert t.tolist() == [[1, 1], [0, 1]] and t.sum() == 3
    assert pu.tolist() == [1, 2] and gu.tolist() == ["x", "y"]


def test_extract_classes_and_subset():
    c = gold_toy()
    # every toy word carries one gold tag; singletons are trivially unambiguous
    assert all(len(k) == 1 for k in extract_classes(c.gold, c))
    tags = np.arange(c.n_tokens) % 2
    cls = extract_classes(tags, c)
    assert cls[c.vocab.index("the")] == (0, 1)
    with pytest.raises(ValueError):
        extract_classes(tags[:-1], c)
    assert mean_class_size([(0,), (0, 1), (1, 2, 3)]) == 2.0


def test_zipf_table():
    assert zipf_table([(0,)] * 4) == [(1, (0,), 4)]
    table = zipf_table([(0,), (0,), (1,), (0, 1), (0, 1), (0, 1), (2,)])
    assert [(r, n) for r, _, n in table] == [(1, 3), (2, 2), (3, 1), (4, 1)]
    assert table[2][1] == (1,)          # equal counts: smaller class, then lexicographic
    with pytest.raises(ValueError):
        zipf_table([])


def test_zipf_fit_power_law_and_flat():
    # [DERIVED] counts proportional to 1/rank fit a line of slope -1
    classes = []
    for r in range(1, 30):
        classes += [(r,)] * int(round(1000 / r))
    fit = zipf_fit(zipf_table(classes))
    assert fit.slope == pytest.approx(-1.0, abs=0.01) and fit.r2 > 0.99
    flat = zipf_fit(zipf_table([(i,) for i in range(20)] * 3))
    assert flat.slope == 0.0 and flat.r2 < 0.9


def test_class_report_rows():
    c = gold_toy()
    tags = [0 if w in (c.vocab.index("the"), c.vocab.index("a")) else 1 for w in c.tokens]
    cls = extract_classes(tags, c)
    rows = class_report(cls, c, top=2)
    assert sorted(r.rank for r in rows) == list(range(1, len(rows) + 1))
    assert sum(r.n_types for r in rows) == c.n_types
    top = rows[0]
    assert top.tags == (1,) and top.n_types == 7
    word, freq, props = top.top_types[0]
    assert (word, freq) in (("dog", 2), ("runs", 2), ("cat", 2), ("sleeps", 2), (".", 3))
    text = format_class_report(rows, tag_names=["D", "X"])
    lines = text.splitlines()
    assert lines[0] == "rank\ttypes\ttags\ttop_word_types"
    assert lines[1].startswith("1\t7\tX\t. (. 1.00); ")
    assert all(len(l.split("\t")) == 4 for l in lines)


def test_formatters():
    assert format_zipf_table([(1, (0, 2), 5)]) == "rank\ttypes\tclass\n1\t5\t0,2\n"
    assert format_metrics({"m1": 0.5, "tokens": 3}) == "m1=0.500000\ntokens=3\n"
    ev = evaluate([0, 0, 1], ["a", "a", "b"])
    assert ev["tokens"] == 3 and ev["m1"] == 1.0 and ev["v_measure"] == 1.0


def test_class_report_lists_tag_names_in_numeric_order():
    c = Corpus.from_sentences([["x", "x"]])
    rows = class_report([(0, 1, 2)], c)
    text = format_class_report(rows, tag_names=["10", "2", "B"])
    assert text.splitlines()[1].split("\t")[2] == "2,10,B"
