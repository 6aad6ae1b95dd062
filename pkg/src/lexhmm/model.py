"""Trigram PYP-HMM with an ambiguity-class lexicon.

``ModelState`` ties together a sampling kernel (transition, emission and
character restaurants), the lexicon (each word type's ambiguity class plus the
Pitman-Yor restaurant over classes) and the hyperparameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from . import pyp
from . import rng as _rng
from .backend import kernel_class
from .corpus import Corpus

LEVELS = ("trigram", "bigram", "unigram", "emission", "char_bigram", "char_unigram")
CLASS_LEVEL = "class"
EMISSION_MODES = ("uniform", "charlm")
SAMPLER_KINDS = ("lex", "pyp-type", "local")
INIT_MODES = ("random", "type")

# stream path components for model-level randomness
_INIT_TAGS = 101
_INIT_SEATS = 102
_INIT_CLASSES = 103


def canonical_class(tags: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(set(int(t) for t in tags)))


def geometric_base_prob(cls: Sequence[int], n_tags: int, p_geom: float) -> float:
    """Base probability of an ambiguity class.

    The class size follows a geometric distribution truncated to
    ``1..n_tags``; classes of equal size are equiprobable.
    """
    m = len(cls)
    if m == 0:
        raise ValueError("ambiguity class must be nonempty")
    if m > n_tags:
        raise ValueError("class larger than the tagset")
    if not 0.0 < p_geom <= 1.0:
        raise ValueError("p_geom must lie in (0, 1]")
    z = 1.0 - (1.0 - p_geom) ** n_tags
    size_p = p_geom * (1.0 - p_geom) ** (m - 1) / z
    return size_p / math.comb(n_tags, m)


class GeometricClassBase:
    def __init__(self, n_tags: int, p_geom: float):
        self.n_tags = n_tags
        self.p_geom = p_geom
        self._cache: dict[int, float] = {}

    def prob(self, cls) -> float:
        m = len(cls)
        p = self._cache.get(m)
        if p is None:
            p = self._cache[m] = geometric_base_prob(cls, self.n_tags, self.p_geom)
        return p


class Lexicon:
    """Word type -> ambiguity class, with a PYP restaurant over classes.

    With ``pinned=True`` every class is the full tagset and the class
    restaurant is unused.
    """

    def __init__(self, n_words: int, n_tags: int, p_geom: float = 0.5,
                 params: pyp.PYPParams | None = None, pinned: bool = False):
        self.n_words = n_words
        self.n_tags = n_tags
        self.p_geom = p_geom
        self.pinned = pinned
        self.params = params or pyp.PYPParams(0.5, 1.0)
        self.base = GeometricClassBase(n_tags, p_geom)
        self.restaurant = pyp.Restaurant(self.params, self.base, name="classes")
        full = tuple(range(n_tags))
        self.classes: list[tuple[int, ...]] = [full if pinned else ()] * n_words
        self.e_count = np.full(n_tags, n_words if pinned else 0, dtype=np.int64)

    def class_of(self, w: int) -> tuple[int, ...]:
        return self.classes[w]

    def set_class(self, w: int, cls: Sequence[int]) -> None:
        cls = canonical_class(cls)
        if not cls:
            raise ValueError("ambiguity class must be nonempty")
        for t in self.classes[w]:
            self.e_count[t] -= 1
        for t in cls:
            self.e_count[t] += 1
        self.classes[w] = cls

    def e_without(self, w: int) -> list[int]:
        e = self.e_count.tolist()
        for t in self.classes[w]:
            e[t] -= 1
        return e

    def class_prior_prob(self, cls: Sequence[int]) -> float:
        return self.restaurant.predictive_prob(canonical_class(cls))

    def seat(self, w: int, rng) -> pyp.SeatingDelta:
        return self.restaurant.seat(self.classes[w], rng)

    def unseat(self, w: int, rng) -> pyp.SeatingDelta:
        return self.restaurant.unseat(self.classes[w], rng)

    def mean_class_size(self) -> float:
        return float(np.mean([len(c) for c in self.classes])) if self.classes else 0.0

    def n_distinct(self) -> int:
        return len(set(self.classes))

    def log_prob(self) -> float:
        if self.pinned:
            return 0.0
        return self.restaurant.joint_log_prob()


def class_prior_prob(lexicon: Lexicon, cls: Sequence[int], exclude: int | None = None,
                     rng=None) -> float:
    """Class-restaurant predictive for ``cls``.

    With ``exclude=w`` the customer of word type ``w`` is removed first and
    put back exactly afterwards.
    """
    if exclude is None:
        return lexicon.class_prior_prob(cls)
    delta = lexicon.unseat(exclude, rng if rng is not None else _rng.Stream(0))
    try:
        return lexicon.class_prior_prob(cls)
    finally:
        pyp.revert_delta(delta)


@dataclass
class ModelConfig:
    n_tags: int
    emission: str = "uniform"
    kind: str = "lex"
    p_geom: float = 0.5
    init: str = "random"
    discount: float = 0.5
    strength: float = 1.0
    class_discount: float = 0.5
    class_strength: float = 1.0
    backend: str | None = None

    def validate(self):
        if self.n_tags < 1:
            raise ValueError("need at least one tag")
        if self.emission not in EMISSION_MODES:
            raise ValueError(f"emission must be one of {EMISSION_MODES}")
        if self.kind not in SAMPLER_KINDS:
            raise ValueError(f"sampler kind must be one of {SAMPLER_KINDS}")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}")
        pyp.PYPParams.validate(self.discount, self.strength)
        pyp.PYPParams.validate(self.class_discount, self.class_strength)


class ModelState:
    def __init__(self, corpus: Corpus, config: ModelConfig):
        config.validate()
        self.corpus = corpus
        self.config = config
        self.n_tags = config.n_tags
        self.params = {lv: pyp.PYPParams(config.discount, config.strength) for lv in LEVELS}
        self.alphabet, word_chars = corpus.encode_chars()
        charlm = config.emission == "charlm"
        K = kernel_class(config.backend)
        self.kernel = K(self.n_tags, corpus.tokens, corpus.offsets, corpus.n_types,
                        word_chars if charlm else None, len(self.alphabet), charlm,
                        self.param_vector())
        self.lexicon = Lexicon(corpus.n_types, self.n_tags, config.p_geom,
                               pyp.PYPParams(config.class_discount, config.class_strength),
                               pinned=config.kind != "lex")

    @property
    def backend(self) -> str:
        return self.kernel.backend

    @property
    def pinned(self) -> bool:
        return self.lexicon.pinned

    @property
    def tagset_size(self) -> int:
        return self.n_tags

    def param_vector(self) -> list[float]:
        out = []
        for lv in LEVELS:
            out += [self.params[lv].discount, self.params[lv].strength]
        return out

    def push_params(self) -> None:
        self.kernel.set_params(self.param_vector())

    @property
    def tags(self) -> np.ndarray:
        return np.asarray(self.kernel.get_tags(), dtype=np.int32)

    # -- initialisation -----------------------------------------------------
    def initialize(self, seed: int, tags: Sequence[int] | None = None) -> None:
        """Random initial tagging, lexicon and seating, all derived from ``seed``."""
        c = self.corpus
        T = self.n_tags
        s = _rng.Stream(_rng.stream_key(seed, _INIT_TAGS))
        if tags is None:
            if self.config.init == "type" and not self.pinned:
                type_tag = [s.randbelow(T) for _ in range(c.n_types)]
                tags = [type_tag[w] for w in c.tokens]
            else:
                tags = [s.randbelow(T) for _ in range(c.n_tokens)]
        tags = np.asarray(tags, dtype=np.int32)
        if tags.shape[0] != c.n_tokens or (tags.size and (tags.min() < 0 or tags.max() >= T)):
            raise ValueError("bad initial tag array")
        lex = self.lexicon
        if not self.pinned:
            seen: list[set] = [set() for _ in range(c.n_types)]
            for w, t in zip(c.tokens.tolist(), tags.tolist()):
                seen[w].add(t)
            lex.restaurant = pyp.Restaurant(lex.params, lex.base, name="classes")
            for w in range(c.n_types):
                lex.set_class(w, seen[w] if seen[w] else {0})
        for w in range(c.n_types):
            self.kernel.set_word_class(w, lex.classes[w])
        self.kernel.initialize(tags.tolist(), _rng.stream_key(seed, _INIT_SEATS))
        if not self.pinned:
            cs = _rng.Stream(_rng.stream_key(seed, _INIT_CLASSES))
            for w in range(c.n_types):
                lex.seat(w, cs)

    def set_class(self, w: int, cls: Sequence[int]) -> None:
        self.lexicon.set_class(w, cls)
        self.kernel.set_word_class(w, self.lexicon.classes[w])


# -- probabilities -----------------------------------------------------------

def transition_prob(state: ModelState, context: tuple[int, int], tag: int) -> float:
    """P(tag | previous-but-one, previous); the boundary tag is ``n_tags``."""
    t2, t1 = context
    return state.kernel.trans_prob(int(t2), int(t1), int(tag))


def emission_prob(state: ModelState, tag: int, w: int) -> float:
    return state.kernel.emit_prob(int(tag), int(w))


def word_base_prob(state: ModelState, tag: int, w: int) -> float:
    return state.kernel.word_base_prob(int(tag), int(w))


def char_word_prob(state: ModelState, tag: int, w: int) -> float:
    return state.kernel.char_word_prob(int(tag), int(w))


def level_log_prob(ns, Ks, sizes: dict, a: float, b: float) -> float:
    """Summed log partition probability over the restaurants of one level."""
    ns = np.asarray(ns, dtype=np.float64)
    Ks = np.asarray(Ks, dtype=np.float64)
    if ns.size == 0:
        return 0.0
    if a > 0.0:
        lp = np.sum((Ks - 1.0) * math.log(a) + gammaln(b / a + Ks)) - ns.size * gammaln(b / a + 1.0)
    else:
        lp = np.sum(Ks - 1.0) * math.log(b)
    lp -= np.sum(gammaln(b + ns)) - ns.size * gammaln(b + 1.0)
    if sizes:
        s = np.fromiter(sizes.keys(), dtype=np.float64)
        c = np.fromiter(sizes.values(), dtype=np.float64)
        lp += np.sum(c * (gammaln(s - a) - gammaln(1.0 - a)))
    return float(lp)


def level_log_probs(state: ModelState) -> dict[str, float]:
    out = {}
    for i, lv in enumerate(LEVELS):
        if i >= 4 and state.config.emission != "charlm":
            continue
        ns, Ks, agg = state.kernel.level_stats(i)
        out[lv] = level_log_prob(ns, Ks, agg, state.params[lv].discount, state.params[lv].strength)
    return out


def log_joint(state: ModelState) -> float:
    """Log probability of tags, words, seating arrangements and lexicon."""
    k = state.kernel
    lp = sum(level_log_probs(state).values())
    rn, rK = k.restaurant_totals(0)
    lp += rK[-1] * math.log(1.0 / (state.n_tags + 1))
    en, eK = k.restaurant_totals(1)
    if state.config.emission == "charlm":
        cn, cK = k.restaurant_totals(2)
        T = state.n_tags
        lp += sum(cK[-T:]) * math.log(1.0 / (len(state.alphabet) + 1))
    else:
        e = state.lexicon.e_count
        for t in range(state.n_tags):
            if eK[t]:
                lp += eK[t] * math.log(1.0 / e[t])
    return lp + state.lexicon.log_prob()


# -- state export / invariants -------------------------------------------------

def export_state(state: ModelState) -> dict[str, np.ndarray]:
    k = state.kernel
    out = {"tags": np.asarray(k.get_tags(), dtype=np.int32)}
    for g, name in enumerate(("trans", "emit", "char")):
        rows = k.export_hist(g)
        out[f"{name}_hist"] = np.asarray(rows, dtype=np.int64).reshape(-1, 4)
    T = state.n_tags
    mask = np.zeros((state.corpus.n_types, T), dtype=np.uint8)
    for w, cls in enumerate(state.lexicon.classes):
        mask[w, list(cls)] = 1
    out["classes"] = mask
    out["class_hist"] = _class_rows(state.lexicon.restaurant, T)
    out["params"] = np.asarray(state.param_vector() + [state.lexicon.params.discount,
                                                      state.lexicon.params.strength], dtype=np.float64)
    return out


def _class_rows(r: pyp.Restaurant, T: int) -> np.ndarray:
    rows = []
    for cls, hist in sorted(r.state().items()):
        flags = [0] * T
        for t in cls:
            flags[t] = 1
        for s, c in hist:
            rows.append(flags + [s, c])
    return np.asarray(rows, dtype=np.int64).reshape(-1, T + 2)


def import_state(state: ModelState, data: dict) -> None:
    T = state.n_tags
    params = np.asarray(data["params"], dtype=np.float64)
    for i, lv in enumerate(LEVELS):
        state.params[lv].discount = float(params[2 * i])
        state.params[lv].strength = float(params[2 * i + 1])
    state.lexicon.params.discount = float(params[-2])
    state.lexicon.params.strength = float(params[-1])
    state.push_params()
    mask = np.asarray(data["classes"])
    lex = state.lexicon
    for w in range(state.corpus.n_types):
        cls = tuple(int(t) for t in np.flatnonzero(mask[w]))
        if lex.pinned:
            if cls != tuple(range(T)):
                raise ValueError("checkpoint lexicon is not pinned")
        else:
            lex.set_class(w, cls)
        state.kernel.set_word_class(w, lex.classes[w])
    state.kernel.set_tags(np.asarray(data["tags"]).tolist())
    for g, name in enumerate(("trans", "emit", "char")):
        state.kernel.import_hist(g, np.asarray(data[f"{name}_hist"]).tolist())
    r = pyp.Restaurant(lex.params, lex.base, name="classes")
    for row in np.asarray(data["class_hist"]).tolist():
        cls = tuple(t for t in range(T) if row[t])
        for _ in range(row[T + 1]):
            r.move(cls, 0, row[T])
    lex.restaurant = r


def check_state(state: ModelState) -> None:
    """Assert every bookkeeping invariant of the exported state.

    Per restaurant: table sizes sum to the customer count.  Across levels:
    a parent's customers for a dish equal its children's tables for that
    dish, emission customers match the tagging, and character customers
    match the words on emission tables.
    """
    c = state.corpus
    T = state.n_tags
    T1 = T + 1
    data = export_state(state)
    tags = data["tags"]
    cls = state.lexicon.classes
    for i, (w, t) in enumerate(zip(c.tokens.tolist(), tags.tolist())):
        assert t in cls[w], f"token {i}: tag {t} outside class {cls[w]}"
    e = np.zeros(T, dtype=np.int64)
    for cl in cls:
        assert len(cl) >= 1
        for t in cl:
            e[t] += 1
    assert np.array_equal(e, state.lexicon.e_count)

    def tables_customers(rows, D):
        tab, cust = {}, {}
        for r, d, s, n in rows.tolist():
            assert s >= 1 and n >= 1
            tab[(r, d)] = tab.get((r, d), 0) + n
            cust[(r, d)] = cust.get((r, d), 0) + s * n
        return tab, cust

    # transitions: expected trigram customers from the tagging
    ttab, tcust = tables_customers(data["trans_hist"], T1)
    expect = {}
    for s in range(c.n_sentences):
        lo, hi = int(c.offsets[s]), int(c.offsets[s + 1])

        def tg(j):
            return T if j < lo or j >= hi else int(tags[j])
        for k in range(lo, hi + 1):
            key = (tg(k - 2) * T1 + tg(k - 1), tg(k))
            expect[key] = expect.get(key, 0) + 1
    R_tri = T1 * T1
    got = {k: v for k, v in tcust.items() if k[0] < R_tri}
    assert got == expect, "trigram customers disagree with tagging"
    bi_expect, uni_expect = {}, {}
    for (r, d), k in ttab.items():
        if r < R_tri:
            key = (R_tri + r % T1, d)
            bi_expect[key] = bi_expect.get(key, 0) + k
        elif r < R_tri + T1:
            key = (R_tri + T1, d)
            uni_expect[key] = uni_expect.get(key, 0) + k
    assert {k: v for k, v in tcust.items() if R_tri <= k[0] < R_tri + T1} == bi_expect
    assert {k: v for k, v in tcust.items() if k[0] == R_tri + T1} == uni_expect
    # emissions
    etab, ecust = tables_customers(data["emit_hist"], c.n_types)
    emit_expect = {}
    for w, t in zip(c.tokens.tolist(), tags.tolist()):
        emit_expect[(t, w)] = emit_expect.get((t, w), 0) + 1
    assert ecust == emit_expect, "emission customers disagree with tagging"
    # character LM customers follow the emission tables
    if state.config.emission == "charlm":
        A = len(state.alphabet)
        A1 = A + 1
        _, words = c.encode_chars(state.alphabet)
        ctab, ccust = tables_customers(data["char_hist"], A1)
        bi = {}
        for (t, w), k in etab.items():
            prev = A
            for ch in words[w] + [A]:
                key = (t * A1 + prev, ch)
                bi[key] = bi.get(key, 0) + k
                prev = ch
        assert {k: v for k, v in ccust.items() if k[0] < T * A1} == bi, "char bigram customers"
        uni = {}
        for (r, d), k in ctab.items():
            if r < T * A1:
                key = (T * A1 + r // A1, d)
                uni[key] = uni.get(key, 0) + k
        assert {k: v for k, v in ccust.items() if k[0] >= T * A1} == uni, "char unigram customers"
    else:
        assert data["char_hist"].shape[0] == 0
    # class restaurant
    if not state.pinned:
        pyp.check_restaurant(state.lexicon.restaurant)
        counts = {}
        for cl in cls:
            counts[cl] = counts.get(cl, 0) + 1
        got = {d: state.lexicon.restaurant.customers(d) for d in state.lexicon.restaurant.served()}
        assert got == counts, "class restaurant customers disagree with lexicon"
