"""Synthetic corpora drawn from a known first-order HMM.

Each tag owns a block of word types with Zipfian emission weights.  A chosen
fraction of types is ambiguous: such a type is also emitted, at a lower rate,
by a second tag.  Used by the recovery tests and the speed benchmark.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus


@dataclass
class SyntheticHMM:
    start: np.ndarray        # P(first tag)
    trans: np.ndarray        # [T, T+1]; last column is P(end of sentence)
    emit: list               # per tag: (word ids, probabilities)
    true_classes: list       # per word id: sorted tuple of tags that can emit it
    words: list[str]


# Three tags with a strong cyclic structure, close to a determiner/noun/verb toy.
THREE_TAG_START = np.array([0.8, 0.1, 0.1])
THREE_TAG_TRANS = np.array([
    [0.05, 0.85, 0.05, 0.05],
    [0.10, 0.05, 0.75, 0.10],
    [0.60, 0.10, 0.05, 0.25],
])


def random_transitions(n_tags: int, rng: np.random.Generator, peak: float = 0.7,
                       p_end: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Each tag prefers one successor (a random permutation) with mass ``peak``."""
    succ = rng.permutation(n_tags)
    trans = np.full((n_tags, n_tags + 1), 0.0)
    for t in range(n_tags):
        row = rng.dirichlet(np.ones(n_tags)) * (1.0 - peak)
        row[succ[t]] += peak
        trans[t, :n_tags] = row * (1.0 - p_end)
        trans[t, n_tags] = p_end
    start = rng.dirichlet(np.ones(n_tags))
    return start, trans


def build_hmm(n_tags: int, types_per_tag: int, ambiguous_fraction: float, seed: int,
              start: np.ndarray | None = None, trans: np.ndarray | None = None,
              zipf: float = 1.0, secondary_weight: float = 0.3) -> SyntheticHMM:
    rng = np.random.default_rng(seed)
    if trans is None:
        start, trans = random_transitions(n_tags, rng)
    n_words = n_tags * types_per_tag
    owner = np.repeat(np.arange(n_tags), types_per_tag)
    words = [f"w{t}_{i}" for t in range(n_tags) for i in range(types_per_tag)]
    weights = [dict() for _ in range(n_tags)]
    for t in range(n_tags):
        for i in range(types_per_tag):
            weights[t][t * types_per_tag + i] = 1.0 / (i + 1) ** zipf
    classes = [{int(owner[w])} for w in range(n_words)]
    n_amb = int(round(ambiguous_fraction * n_words))
    if n_tags > 1:
        for w in rng.choice(n_words, size=n_amb, replace=False).tolist():
            other = int(rng.choice([t for t in range(n_tags) if t != owner[w]]))
            weights[other][w] = weights[owner[w]][w] * secondary_weight
            classes[w].add(other)
    emit = []
    for t in range(n_tags):
        ids = np.fromiter(weights[t].keys(), dtype=np.int64)
        p = np.fromiter(weights[t].values(), dtype=np.float64)
        emit.append((ids, p / p.sum()))
    return SyntheticHMM(np.asarray(start, dtype=np.float64), np.asarray(trans, dtype=np.float64),
                        emit, [tuple(sorted(c)) for c in classes], words)


def sample_corpus(hmm: SyntheticHMM, n_tokens: int, seed: int, max_len: int = 40) -> Corpus:
    """Sentences until ``n_tokens`` tokens; gold labels are ``T0``, ``T1``, ..."""
    rng = np.random.default_rng(seed)
    T = hmm.start.shape[0]
    sents, golds = [], []
    total = 0
    while total < n_tokens:
        sent, gold = [], []
        t = int(rng.choice(T, p=hmm.start))
        while True:
            ids, p = hmm.emit[t]
            sent.append(hmm.words[int(ids[rng.choice(len(ids), p=p)])])
            gold.append(f"T{t}")
            if len(sent) >= max_len or total + len(sent) >= n_tokens:
                break
            nxt = int(rng.choice(T + 1, p=hmm.trans[t]))
            if nxt == T:
                break
            t = nxt
        sents.append(sent)
        golds.append(gold)
        total += len(sent)
    return Corpus.from_sentences(sents, golds, gold_labels=[f"T{t}" for t in range(T)])


def three_tag_corpus(n_tokens: int = 5000, seed: int = 0, types_per_tag: int = 40,
                     ambiguous_fraction: float = 0.1) -> tuple[Corpus, SyntheticHMM]:
    """Corpus from the fixed three-tag HMM with near-deterministic emissions."""
    hmm = build_hmm(3, types_per_tag, ambiguous_fraction, seed,
                    THREE_TAG_START, THREE_TAG_TRANS)
    return sample_corpus(hmm, n_tokens, seed + 1), hmm


def zipf_corpus(n_tokens: int = 50_000, n_tags: int = 12, types_per_tag: int = 400,
                ambiguous_fraction: float = 0.1, seed: int = 0) -> Corpus:
    """Larger corpus with a Zipfian vocabulary, for timing runs."""
    hmm = build_hmm(n_tags, types_per_tag, ambiguous_fraction, seed)
    return sample_corpus(hmm, n_tokens, seed + 1)
