"""Tagging metrics and lexicon analysis."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .corpus import Corpus


def contingency(pred, gold) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Token counts ``[predicted, gold]`` plus the distinct ids along each axis."""
    pred = np.asarray(pred)
    gold = np.asarray(gold)
    if pred.shape != gold.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} predicted vs {gold.shape[0]} gold")
    pu, pi = np.unique(pred, return_inverse=True)
    gu, gi = np.unique(gold, return_inverse=True)
    table = np.zeros((pu.size, gu.size), dtype=np.int64)
    np.add.at(table, (pi, gi), 1)
    return table, pu, gu


def many_to_one_mapping(pred, gold) -> dict:
    """Predicted id -> its most frequent gold id (ties go to the smallest gold id)."""
    table, pu, gu = contingency(pred, gold)
    return {p.item(): gu[j].item() for p, j in zip(pu, table.argmax(axis=1))}


def many_to_one(pred, gold) -> float:
    table, _, _ = contingency(pred, gold)
    n = table.sum()
    if n == 0:
        raise ValueError("no tokens to evaluate")
    return float(table.max(axis=1).sum() / n)


def _entropy(counts: np.ndarray, n: float) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def homogeneity_completeness_v(pred, gold, beta: float = 1.0) -> tuple[float, float, float]:
    """Homogeneity, completeness and their weighted harmonic mean.

    A component whose reference entropy is zero is defined as 1.
    """
    table, _, _ = contingency(pred, gold)
    n = float(table.sum())
    if n == 0:
        raise ValueError("no tokens to evaluate")
    h_gold = _entropy(table.sum(axis=0), n)
    h_pred = _entropy(table.sum(axis=1), n)
    nz = table > 0
    joint = table[nz] / n
    rows = np.broadcast_to(table.sum(axis=1, keepdims=True), table.shape)[nz] / n
    cols = np.broadcast_to(table.sum(axis=0, keepdims=True), table.shape)[nz] / n
    h_gold_given_pred = float(-(joint * np.log(joint / rows)).sum())
    h_pred_given_gold = float(-(joint * np.log(joint / cols)).sum())
    hom = 1.0 if h_gold == 0.0 else 1.0 - h_gold_given_pred / h_gold
    com = 1.0 if h_pred == 0.0 else 1.0 - h_pred_given_gold / h_pred
    if hom + com == 0.0:
        return hom, com, 0.0
    v = (1.0 + beta) * hom * com / (beta * hom + com)
    return hom, com, v


def v_measure(pred, gold, beta: float = 1.0) -> float:
    return homogeneity_completeness_v(pred, gold, beta)[2]


# -- lexicon analysis ----------------------------------------------------------

def extract_classes(tags, corpus: Corpus) -> list[tuple[int, ...]]:
    """Distinct tags over each word type's tokens, as sorted tuples."""
    tags = np.asarray(tags)
    if tags.shape[0] != corpus.n_tokens:
        raise ValueError("tag array does not cover the corpus")
    out: list[set] = [set() for _ in range(corpus.n_types)]
    for w, t in zip(corpus.tokens.tolist(), tags.tolist()):
        out[w].add(t)
    return [tuple(sorted(s)) for s in out]


def class_counts(classes: Sequence[tuple]) -> dict[tuple, int]:
    counts: dict[tuple, int] = {}
    for c in classes:
        counts[c] = counts.get(c, 0) + 1
    return counts


def mean_class_size(classes: Sequence[tuple]) -> float:
    return float(np.mean([len(c) for c in classes])) if classes else 0.0


def zipf_table(classes: Sequence[tuple]) -> list[tuple[int, tuple, int]]:
    """(rank, class, number of word types) by descending type count.

    Equal counts are ordered by class size, then lexicographically.
    """
    counts = class_counts(classes)
    if not counts:
        raise ValueError("empty lexicon")
    order = sorted(counts.items(), key=lambda kv: (-kv[1], len(kv[0]), kv[0]))
    return [(i + 1, c, n) for i, (c, n) in enumerate(order)]


@dataclass
class ZipfFit:
    slope: float
    intercept: float
    r2: float


def zipf_fit(table) -> ZipfFit:
    """Least-squares line through (log rank, log count)."""
    if len(table) < 2:
        return ZipfFit(0.0, math.log(table[0][2]) if table else 0.0, 0.0)
    r = np.log([row[0] for row in table])
    n = np.log([row[2] for row in table])
    if np.all(n == n[0]):
        return ZipfFit(0.0, float(n[0]), 0.0)
    res = stats.linregress(r, n)
    return ZipfFit(float(res.slope), float(res.intercept), float(res.rvalue ** 2))


@dataclass
class ClassRow:
    rank: int
    tags: tuple
    n_types: int
    top_types: list      # [(word, frequency, [(gold label, proportion)])]


def class_report(classes: Sequence[tuple], corpus: Corpus, tags=None, top: int = 5) -> list[ClassRow]:
    """One row per class ranked by type count, with its most frequent word types.

    With gold labels available, each listed type carries the proportion of its
    tokens under every gold tag.
    """
    freq = corpus.frequencies()
    members: dict[tuple, list[int]] = {}
    for w, c in enumerate(classes):
        members.setdefault(c, []).append(w)
    gold_by_type = None
    if corpus.gold is not None:
        G = len(corpus.gold_labels)
        gold_by_type = np.zeros((corpus.n_types, G), dtype=np.int64)
        np.add.at(gold_by_type, (corpus.tokens, corpus.gold), 1)
    rows = []
    for rank, c, n in zipf_table(classes):
        ws = sorted(members[c], key=lambda w: (-freq[w], corpus.vocab[w]))[:top]
        tops = []
        for w in ws:
            props = []
            if gold_by_type is not None:
                g = gold_by_type[w]
                tot = g.sum()
                for j in np.argsort(-g, kind="stable"):
                    if g[j]:
                        props.append((corpus.gold_labels[j], g[j] / tot))
            tops.append((corpus.vocab[w], int(freq[w]), props))
        rows.append(ClassRow(rank, c, n, tops))
    return rows


def _tag_order(name: str):
    # numeric tag names in numeric order, before any others
    return (0, int(name), "") if name.isdigit() else (1, 0, name)


def format_class_report(rows: Sequence[ClassRow], tag_names=None) -> str:
    """Tab-separated: rank, types, tags, top word types as ``word (TAG p, ...)``."""
    out = io.StringIO()
    out.write("rank\ttypes\ttags\ttop_word_types\n")
    for row in rows:
        names = sorted((str(tag_names[t]) if tag_names is not None else str(t) for t in row.tags),
                       key=_tag_order)
        items = []
        for word, _, props in row.top_types:
            if props:
                items.append(f"{word} (" + ", ".join(f"{g} {p:.2f}" for g, p in props) + ")")
            else:
                items.append(word)
        out.write(f"{row.rank}\t{row.n_types}\t{','.join(names)}\t{'; '.join(items)}\n")
    return out.getvalue()


def format_zipf_table(table) -> str:
    out = io.StringIO()
    out.write("rank\ttypes\tclass\n")
    for rank, c, n in table:
        out.write(f"{rank}\t{n}\t{','.join(map(str, c))}\n")
    return out.getvalue()


def format_metrics(metrics: dict) -> str:
    lines = []
    for k, v in metrics.items():
        lines.append(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}")
    return "\n".join(lines) + "\n"


def evaluate(pred, gold) -> dict:
    hom, com, v = homogeneity_completeness_v(pred, gold)
    return {"tokens": int(np.asarray(gold).shape[0]), "m1": many_to_one(pred, gold),
            "v_measure": v, "homogeneity": hom, "completeness": com}
