"""Corpus ingestion: CoNLL-X and vertical readers, word-type interning, site index.

Word types are interned by exact surface string (no case folding).  Every token
is addressed by a global index into ``Corpus.tokens``; sentences are
contiguous ranges given by ``Corpus.offsets``.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# CoNLL-X columns
ID, FORM, LEMMA, CPOSTAG, POSTAG, FEATS, HEAD, DEPREL, PHEAD, PDEPREL = range(10)

GOLD_COLUMNS = {"cpostag": CPOSTAG, "postag": POSTAG}


class CorpusFormatError(ValueError):
    def __init__(self, path, lineno, msg):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {msg}")


@dataclass(frozen=True)
class Tagset:
    """Induced tags ``0..size-1`` plus a boundary tag whose id is ``size``."""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("tagset needs at least one tag")

    @property
    def boundary(self) -> int:
        return self.size

    def __len__(self):
        return self.size


@dataclass(frozen=True)
class WordType:
    id: int
    surface: str
    frequency: int


@dataclass
class Corpus:
    tokens: np.ndarray            # int32 word-type id per token
    offsets: np.ndarray           # int64, sentence s spans tokens[offsets[s]:offsets[s+1]]
    vocab: list[str]
    gold: np.ndarray | None = None    # int32 gold label id per token
    gold_labels: list[str] = field(default_factory=list)
    _site_ptr: np.ndarray | None = field(default=None, repr=False)
    _site_idx: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_sentences(cls, sentences: Sequence[Sequence[str]],
                       gold: Sequence[Sequence[str]] | None = None,
                       gold_labels: Sequence[str] | None = None) -> "Corpus":
        index: dict[str, int] = {}
        vocab: list[str] = []
        toks: list[int] = []
        offsets = [0]
        for sent in sentences:
            if len(sent) == 0:
                raise ValueError("empty sentence")
            for w in sent:
                if not w:
                    raise ValueError("empty word form")
                i = index.get(w)
                if i is None:
                    i = index[w] = len(vocab)
                    vocab.append(w)
                toks.append(i)
            offsets.append(len(toks))
        gold_arr = None
        labels: list[str] = list(gold_labels) if gold_labels is not None else []
        if gold is not None:
            lab_index = {l: i for i, l in enumerate(labels)}
            g = []
            for sent, gsent in zip(sentences, gold):
                if len(sent) != len(gsent):
                    raise ValueError("gold sentence length mismatch")
                for l in gsent:
                    j = lab_index.get(l)
                    if j is None:
                        j = lab_index[l] = len(labels)
                        labels.append(l)
                    g.append(j)
            gold_arr = np.asarray(g, dtype=np.int32)
        return cls(np.asarray(toks, dtype=np.int32), np.asarray(offsets, dtype=np.int64),
                   vocab, gold_arr, labels)

    # -- sizes ------------------------------------------------------------
    @property
    def n_tokens(self) -> int:
        return int(self.tokens.shape[0])

    @property
    def n_sentences(self) -> int:
        return int(self.offsets.shape[0] - 1)

    @property
    def n_types(self) -> int:
        return len(self.vocab)

    def sentence(self, s: int) -> np.ndarray:
        return self.tokens[self.offsets[s]:self.offsets[s + 1]]

    def sentences(self) -> list[list[str]]:
        return [[self.vocab[w] for w in self.sentence(s)] for s in range(self.n_sentences)]

    def frequencies(self) -> np.ndarray:
        return np.bincount(self.tokens, minlength=self.n_types)

    def word_types(self) -> list[WordType]:
        freq = self.frequencies()
        return [WordType(i, s, int(freq[i])) for i, s in enumerate(self.vocab)]

    def sentence_of(self) -> np.ndarray:
        """Sentence id for every token."""
        lens = np.diff(self.offsets)
        return np.repeat(np.arange(self.n_sentences, dtype=np.int64), lens)

    # -- site index -------------------------------------------------------
    def _build_sites(self):
        order = np.argsort(self.tokens, kind="stable")
        counts = self.frequencies()
        ptr = np.zeros(self.n_types + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        self._site_ptr, self._site_idx = ptr, order.astype(np.int64)

    def site_tokens(self, w: int) -> np.ndarray:
        """Global token indices of word type ``w`` in corpus order."""
        if not 0 <= w < self.n_types:
            raise KeyError(f"unknown word type id {w}")
        if self._site_ptr is None:
            self._build_sites()
        return self._site_idx[self._site_ptr[w]:self._site_ptr[w + 1]]

    def site_index(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR form of all site lists: (pointers of length |W|+1, token indices)."""
        if self._site_ptr is None:
            self._build_sites()
        return self._site_ptr, self._site_idx

    # -- characters -------------------------------------------------------
    def alphabet(self) -> list[str]:
        return sorted({c for w in self.vocab for c in w})

    def encode_chars(self, alphabet: Sequence[str] | None = None) -> tuple[list[str], list[list[int]]]:
        """Map every word type to a list of character ids.

        Characters missing from ``alphabet`` map to ``len(alphabet)``, the
        reserved unknown id.
        """
        alphabet = list(alphabet) if alphabet is not None else self.alphabet()
        cmap = {c: i for i, c in enumerate(alphabet)}
        unk = len(alphabet)
        return alphabet, [[cmap.get(c, unk) for c in w] for w in self.vocab]


def sites_of_type(corpus: Corpus, w: int) -> list[tuple[int, int]]:
    """Ordered (sentence, position) occurrences of word type ``w``."""
    toks = corpus.site_tokens(w)
    sent = np.searchsorted(corpus.offsets, toks, side="right") - 1
    return [(int(s), int(t - corpus.offsets[s])) for s, t in zip(sent, toks)]


# -- readers -------------------------------------------------------------

def _open(path):
    return io.open(path, "r", encoding="utf-8")


def read_conllx(path, gold_column: str = "cpostag") -> tuple[Corpus, list[str]]:
    """Read a 10-column CoNLL-X file.

    FORM becomes the word, CPOSTAG (or POSTAG with ``gold_column='postag'``)
    the gold label.  Returns the corpus and its gold label inventory.
    """
    try:
        col = GOLD_COLUMNS[gold_column.lower()]
    except KeyError:
        raise ValueError(f"gold_column must be one of {sorted(GOLD_COLUMNS)}") from None
    sents: list[list[str]] = []
    golds: list[list[str]] = []
    cur, curg = [], []
    with _open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                if cur:
                    sents.append(cur)
                    golds.append(curg)
                    cur, curg = [], []
                continue
            fields = line.split("\t")
            if len(fields) != 10:
                raise CorpusFormatError(path, lineno, f"expected 10 tab-separated columns, got {len(fields)}")
            try:
                tid = int(fields[ID])
            except ValueError:
                raise CorpusFormatError(path, lineno, f"bad token id {fields[ID]!r}") from None
            if tid != len(cur) + 1:
                raise CorpusFormatError(path, lineno, f"token id {tid} out of sequence")
            if not fields[FORM]:
                raise CorpusFormatError(path, lineno, "empty FORM")
            cur.append(fields[FORM])
            curg.append(fields[col])
    if cur:
        sents.append(cur)
        golds.append(curg)
    if not sents:
        raise CorpusFormatError(path, 0, "empty corpus")
    corpus = Corpus.from_sentences(sents, golds)
    return corpus, corpus.gold_labels


def read_vertical(path, gold: bool = True) -> Corpus:
    """Read ``word<TAB>tag`` lines with blank lines between sentences.

    With ``gold=False`` the tag column may be absent and is ignored.
    """
    sents: list[list[str]] = []
    golds: list[list[str]] = []
    cur, curg = [], []
    with _open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                if cur:
                    sents.append(cur)
                    golds.append(curg)
                    cur, curg = [], []
                continue
            fields = line.split("\t")
            if len(fields) > 2 or not fields[0]:
                raise CorpusFormatError(path, lineno, "expected 'word<TAB>tag'")
            if gold:
                if len(fields) != 2 or not fields[1]:
                    raise CorpusFormatError(path, lineno, "missing tag column")
                curg.append(fields[1])
            cur.append(fields[0])
    if cur:
        sents.append(cur)
        golds.append(curg)
    if not sents:
        raise CorpusFormatError(path, 0, "empty corpus")
    return Corpus.from_sentences(sents, golds if gold else None)


def write_vertical(path, corpus: Corpus, labels: Sequence | np.ndarray | None = None,
                   label_names: Sequence[str] | None = None):
    """Write ``word<TAB>label`` lines; labels default to the corpus gold tags."""
    if labels is None and corpus.gold is not None:
        labels, label_names = corpus.gold, corpus.gold_labels
    with io.open(path, "w", encoding="utf-8", newline="\n") as f:
        for s in range(corpus.n_sentences):
            for i in range(int(corpus.offsets[s]), int(corpus.offsets[s + 1])):
                w = corpus.vocab[corpus.tokens[i]]
                if labels is None:
                    f.write(f"{w}\n")
                else:
                    lab = labels[i]
                    f.write(f"{w}\t{label_names[lab] if label_names is not None else lab}\n")
            f.write("\n")


def write_conllx(path, corpus: Corpus, labels: Sequence | np.ndarray | None = None,
                 label_names: Sequence[str] | None = None):
    """Write a minimal CoNLL-X file: ID, FORM and the label in CPOSTAG and POSTAG, '_' elsewhere."""
    if labels is None and corpus.gold is not None:
        labels, label_names = corpus.gold, corpus.gold_labels
    with io.open(path, "w", encoding="utf-8", newline="\n") as f:
        for s in range(corpus.n_sentences):
            lo = int(corpus.offsets[s])
            for i in range(lo, int(corpus.offsets[s + 1])):
                w = corpus.vocab[corpus.tokens[i]]
                if labels is None:
                    lab = "_"
                else:
                    lab = label_names[labels[i]] if label_names is not None else str(labels[i])
                cols = [str(i - lo + 1), w, "_", lab, lab, "_", "0", "_", "_", "_"]
                f.write("\t".join(cols) + "\n")
            f.write("\n")


def read_corpus(path, fmt: str | None = None, gold_column: str = "cpostag",
                gold: bool = True) -> Corpus:
    """Dispatch on ``fmt`` ('conllx' or 'vertical'); guessed from the first line if None."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    if fmt is None:
        fmt = _guess_format(path)
    if fmt == "conllx":
        return read_conllx(path, gold_column)[0]
    if fmt == "vertical":
        return read_vertical(path, gold=gold)
    raise ValueError(f"unknown corpus format {fmt!r}")


def _guess_format(path) -> str:
    with _open(path) as f:
        for line in f:
            if line.strip():
                return "conllx" if line.count("\t") == 9 else "vertical"
    return "vertical"


def iter_labels(corpus: Corpus, labels: Iterable[int]) -> list[list[int]]:
    labels = list(labels)
    return [labels[corpus.offsets[s]:corpus.offsets[s + 1]] for s in range(corpus.n_sentences)]
