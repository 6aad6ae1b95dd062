import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lexhmm.corpus import (Corpus, CorpusFormatError, read_conllx, read_corpus, read_vertical,
                           sites_of_type, write_conllx, write_vertical)


def conll_line(i, form, cpos, pos=None):
    return "\t".join([str(i), form, "_", cpos, pos or cpos, "_", "0", "_", "_", "_"]) + "\n"


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def test_conllx_two_sentences(tmp_path):
    # [TRIVIAL] 5 + 3 tokens
    s1 = [("Mr.", "N"), ("Smith", "N"), ("saw", "V"), ("Mr.", "N"), ("Jones", "N")]
    s2 = [("Mr.", "N"), ("left", "V"), (".", ".")]
    text = "".join(conll_line(i + 1, f, t) for i, (f, t) in enumerate(s1)) + "\n"
    text += "".join(conll_line(i + 1, f, t) for i, (f, t) in enumerate(s2)) + "\n"
    corpus, labels = read_conllx(write(tmp_path, "a.conll", text))
    assert corpus.n_tokens == 8 and corpus.n_sentences == 2
    assert labels == ["N", "V", "."]
    mr = corpus.vocab.index("Mr.")
    wt = corpus.word_types()[mr]
    assert wt.frequency == 3
    assert len(sites_of_type(corpus, mr)) == 3
    assert sites_of_type(corpus, mr) == [(0, 0), (0, 3), (1, 0)]


def test_conllx_postag_column(tmp_path):
    text = conll_line(1, "dog", "N", "NN") + conll_line(2, "barks", "V", "VBZ")
    corpus, labels = read_conllx(write(tmp_path, "a.conll", text), gold_column="postag")
    assert labels == ["NN", "VBZ"]
    with pytest.raises(ValueError):
        read_conllx(write(tmp_path, "b.conll", text), gold_column="deprel")


def test_case_is_preserved(tmp_path):
    text = conll_line(1, "The", "D") + conll_line(2, "the", "D")
    corpus, _ = read_conllx(write(tmp_path, "a.conll", text))
    assert corpus.n_types == 2


@pytest.mark.parametrize("text,lineno", [
    ("1\tdog\t_\tN\tN\t_\t0\t_\t_\n", 1),                                  # 9 columns
    ("1\tdog\t_\tN\tN\t_\t0\t_\t_\t_\nx\tcat\t_\tN\tN\t_\t0\t_\t_\t_\n", 2),   # bad id
    ("1\tdog\t_\tN\tN\t_\t0\t_\t_\t_\n3\tcat\t_\tN\tN\t_\t0\t_\t_\t_\n", 2),   # id gap
    ("\n\n1\t\t_\tN\tN\t_\t0\t_\t_\t_\n", 3),                                 # empty FORM
])
def test_conllx_errors_carry_line_number(tmp_path, text, lineno):
    with pytest.raises(CorpusFormatError) as ei:
        read_conllx(write(tmp_path, "bad.conll", text))
    assert ei.value.lineno == lineno
    assert f":{lineno}:" in str(ei.value)


def test_empty_file_is_an_error(tmp_path):
    with pytest.raises(CorpusFormatError):
        read_conllx(write(tmp_path, "e.conll", "\n\n"))
    with pytest.raises(CorpusFormatError):
        read_vertical(write(tmp_path, "e.txt", ""))


def test_vertical_minimal(tmp_path):
    c = read_vertical(write(tmp_path, "v.txt", "the\tDT\ndog\tNN\n\n"))
    assert c.n_sentences == 1 and c.n_tokens == 2
    assert c.gold_labels == ["DT", "NN"]


def test_vertical_without_gold(tmp_path):
    c = read_vertical(write(tmp_path, "v.txt", "the\ndog\n\nruns\n"), gold=False)
    assert c.gold is None and c.n_sentences == 2
    with pytest.raises(CorpusFormatError) as ei:
        read_vertical(write(tmp_path, "w.txt", "the\tDT\ndog\n"))
    assert ei.value.lineno == 2


def test_read_corpus_guesses_format(tmp_path):
    conll = write(tmp_path, "a.conll", conll_line(1, "dog", "N"))
    vert = write(tmp_path, "a.txt", "dog\tN\n")
    assert read_corpus(conll).vocab == read_corpus(vert).vocab == ["dog"]
    with pytest.raises(FileNotFoundError):
        read_corpus(str(tmp_path / "missing"))


def test_empty_sentence_rejected():
    with pytest.raises(ValueError):
        Corpus.from_sentences([["a"], []])


def test_site_of_single_occurrence(toy):
    w = toy.vocab.index("a")
    assert toy.site_tokens(w).tolist() == [3]
    with pytest.raises(KeyError):
        toy.site_tokens(toy.n_types)


def test_sites_of_the_by_linear_scan(toy):
    # [DERIVED] oracle: scan sentence by sentence
    expect = [(s, i) for s, sent in enumerate(toy.sentences()) for i, w in enumerate(sent) if w == "the"]
    assert sites_of_type(toy, toy.vocab.index("the")) == expect


sentences = st.lists(st.lists(st.sampled_from(["a", "b", "c", "Dd", "é", "x.y"]), min_size=1, max_size=8),
                     min_size=1, max_size=10)


@given(sentences)
@settings(max_examples=60, deadline=None)
def test_sites_partition_tokens(sents):
    c = Corpus.from_sentences(sents)
    all_sites = np.concatenate([c.site_tokens(w) for w in range(c.n_types)])
    assert sorted(all_sites.tolist()) == list(range(c.n_tokens))
    for w in range(c.n_types):
        s = c.site_tokens(w)
        assert np.all(np.diff(s) > 0)
        assert all(c.tokens[i] == w for i in s)
    # interning is injective
    assert len(set(c.vocab)) == c.n_types
    assert c.sentences() == [list(s) for s in sents]


@given(sentences)
@settings(max_examples=30, deadline=None)
def test_round_trips(tmp_path_factory, sents):
    gold = [[w.upper() for w in s] for s in sents]
    c = Corpus.from_sentences(sents, gold)
    d = tmp_path_factory.mktemp("rt")
    write_vertical(d / "v.txt", c)
    write_conllx(d / "c.conll", c)
    for back in (read_vertical(d / "v.txt"), read_conllx(d / "c.conll")[0]):
        assert back.sentences() == c.sentences()
        assert [back.gold_labels[g] for g in back.gold] == [c.gold_labels[g] for g in c.gold]


def test_char_encoding(toy):
    alphabet, words = toy.encode_chars()
    assert alphabet == sorted(set("".join(toy.vocab)))
    assert "".join(alphabet[i] for i in words[toy.vocab.index("dog")]) == "dog"
    _, words = toy.encode_chars(["d", "o"])
    assert words[toy.vocab.index("dog")] == [0, 1, 2]   # unknown -> len(alphabet)
