"""Pure-Python sampling kernel.

Holds the transition, emission and character restaurants of the tagger as
flat count tables, and implements the hot loops: type-blocked particle
propagation, token-level Metropolis-within-Gibbs, and initialisation.  The
compiled ``_kernel`` extension implements the same class; both consume the
same random streams in the same order and evaluate the same floating point
expressions, so their results are bit-identical.

Restaurant groups and dish spaces:

* TRANS: trigram contexts ``c2*T1 + c1``, bigram ``T1*T1 + c1``, unigram
  ``T1*T1 + T1``; dishes are tags ``0..T`` (``T`` is the boundary).
* EMIT: one restaurant per induced tag; dishes are word types.
* CHAR: per tag, bigram contexts ``t*A1 + prev`` and a unigram ``T*A1 + t``;
  dishes are characters ``0..A-1`` plus end-of-word ``A``; ``A`` is also the
  start context.

A move ``(g, r, key, frm, to)`` turns one table of size ``frm`` into size
``to`` for dish ``key % D[g]`` of restaurant ``r`` (size 0 = no table).
"""

from __future__ import annotations

import math

from . import rng as _rng
from .pyp import InconsistentDelta

G_TRANS, G_EMIT, G_CHAR = 0, 1, 2
LV_TRI, LV_BI, LV_UNI, LV_EMIT, LV_CBI, LV_CUNI = range(6)
N_LEVELS = 6
BACKEND = "python"


class _Particle:
    __slots__ = ("dcd", "dkd", "dn", "dK", "hist", "journal", "tags", "logw",
                 "inc", "e", "cls", "rng")

    def __init__(self):
        self.dcd = ({}, {}, {})
        self.dkd = ({}, {}, {})
        self.dn = ({}, {}, {})
        self.dK = ({}, {}, {})
        self.hist = ({}, {}, {})
        self.journal = []
        self.tags = []
        self.logw = 0.0
        self.inc = []
        self.e = []
        self.cls = []
        self.rng = None

    def copy_from(self, o: "_Particle"):
        self.dcd = tuple(dict(d) for d in o.dcd)
        self.dkd = tuple(dict(d) for d in o.dkd)
        self.dn = tuple(dict(d) for d in o.dn)
        self.dK = tuple(dict(d) for d in o.dK)
        self.hist = tuple({k: dict(h) for k, h in d.items()} for d in o.hist)
        self.journal = list(o.journal)
        self.tags = list(o.tags)
        self.logw = o.logw
        self.inc = list(o.inc)
        self.e = list(o.e)
        self.cls = list(o.cls)


class Kernel:
    backend = BACKEND

    def __init__(self, n_tags, tokens, offsets, n_words, word_chars=None, n_chars=0,
                 charlm=False, params=None):
        T = self.T = int(n_tags)
        T1 = self.T1 = T + 1
        self.BOUND = T
        self.W = int(n_words)
        self.tokens = [int(x) for x in tokens]
        self.N = len(self.tokens)
        offsets = [int(x) for x in offsets]
        self.start = [0] * self.N
        self.end = [0] * self.N
        for s in range(len(offsets) - 1):
            for j in range(offsets[s], offsets[s + 1]):
                self.start[j] = offsets[s]
                self.end[j] = offsets[s + 1]
        self.charlm = bool(charlm)
        self.A = int(n_chars)
        self.A1 = self.A + 1
        self.chars = [list(map(int, c)) for c in word_chars] if word_chars is not None else None
        if self.charlm and self.chars is None:
            raise ValueError("character LM needs word_chars")
        self.R_tri = T1 * T1
        self.r_uni = self.R_tri + T1
        n_trans = self.R_tri + T1 + 1
        n_char = T * self.A1 + T
        self.D = (T1, self.W, self.A1)
        self.rn = ([0] * n_trans, [0] * T, [0] * n_char)
        self.rK = ([0] * n_trans, [0] * T, [0] * n_char)
        self.cd = ({}, {}, {})
        self.kd = ({}, {}, {})
        self.hist = ({}, {}, {})
        self.tags = [0] * self.N
        self.allowed = bytearray(self.W * T)
        self.e_count = [0] * T
        self.params = [(0.5, 1.0)] * N_LEVELS
        if params is not None:
            self.set_params(params)
        self.p_tag0 = 1.0 / T1
        self.p_char0 = 1.0 / self.A1
        self._mark = [-1] * self.N
        self._cur_w = -1
        self._sites = []
        self._ops = []
        self._removal = []
        self._old_tags = []

    # ------------------------------------------------------------------ setup
    def set_params(self, params):
        p = [float(x) for x in params]
        if len(p) != 2 * N_LEVELS:
            raise ValueError("expected 12 hyperparameters")
        self.params = [(p[2 * i], p[2 * i + 1]) for i in range(N_LEVELS)]

    def get_params(self):
        return [x for ab in self.params for x in ab]

    def set_word_class(self, w, tags):
        T = self.T
        base = w * T
        for t in range(T):
            if self.allowed[base + t]:
                self.e_count[t] -= 1
                self.allowed[base + t] = 0
        for t in tags:
            t = int(t)
            if not 0 <= t < T:
                raise ValueError(f"tag {t} out of range")
            if not self.allowed[base + t]:
                self.allowed[base + t] = 1
                self.e_count[t] += 1

    def word_class(self, w):
        base = w * self.T
        return [t for t in range(self.T) if self.allowed[base + t]]

    def get_tags(self):
        return list(self.tags)

    def set_tags(self, tags):
        if len(tags) != self.N:
            raise ValueError("tag array length mismatch")
        self.tags = [int(t) for t in tags]

    # ----------------------------------------------------------- count access
    def _level(self, g, r):
        if g == G_TRANS:
            if r < self.R_tri:
                return LV_TRI
            return LV_BI if r < self.r_uni else LV_UNI
        if g == G_EMIT:
            return LV_EMIT
        return LV_CBI if r < self.T * self.A1 else LV_CUNI

    def _pred(self, g, r, key, lvl, pb, ov):
        n = self.rn[g][r]
        K = self.rK[g][r]
        c = self.cd[g].get(key, 0)
        k = self.kd[g].get(key, 0)
        if ov is not None:
            n += ov.dn[g].get(r, 0)
            K += ov.dK[g].get(r, 0)
            c += ov.dcd[g].get(key, 0)
            k += ov.dkd[g].get(key, 0)
        if n == 0:
            return pb
        a, b = self.params[lvl]
        return (c - a * k + (a * K + b) * pb) / (n + b)

    def _hist_of(self, g, key, ov):
        if ov is not None:
            h = ov.hist[g].get(key)
            if h is not None:
                return h
        return self.hist[g].get(key) or {}

    def _move(self, g, r, key, frm, to, ov):
        if ov is None:
            h = self.hist[g].get(key)
            if h is None:
                h = self.hist[g][key] = {}
            cd, kd, rn, rK = self.cd[g], self.kd[g], self.rn[g], self.rK[g]
        else:
            h = ov.hist[g].get(key)
            if h is None:
                h = ov.hist[g][key] = dict(self.hist[g].get(key) or {})
            cd, kd, rn, rK = ov.dcd[g], ov.dkd[g], ov.dn[g], ov.dK[g]
        if frm > 0:
            c = h.get(frm, 0)
            if c == 0:
                raise InconsistentDelta(f"group {g} restaurant {r} key {key}: no table of size {frm}")
            if c == 1:
                del h[frm]
            else:
                h[frm] = c - 1
        if to > 0:
            h[to] = h.get(to, 0) + 1
        dc = to - frm
        dk = (to > 0) - (frm > 0)
        if ov is None:
            v = cd.get(key, 0) + dc
            if v == 0:
                cd.pop(key, None)
                kd.pop(key, None)
                del self.hist[g][key]
            else:
                cd[key] = v
                kd[key] = kd.get(key, 0) + dk
            rn[r] += dc
            rK[r] += dk
        else:
            cd[key] = cd.get(key, 0) + dc
            kd[key] = kd.get(key, 0) + dk
            rn[r] = rn.get(r, 0) + dc
            rK[r] = rK.get(r, 0) + dk

    # --------------------------------------------------------------- chains
    def _trans_chain(self, t2, t1):
        return ((t2 * self.T1 + t1, LV_TRI),
                (self.R_tri + t1, LV_BI),
                (self.r_uni, LV_UNI))

    def _char_chain(self, t, prev):
        return ((t * self.A1 + prev, LV_CBI), (self.T * self.A1 + t, LV_CUNI))

    def _probs(self, g, chain, d, p0, ov):
        """Predictive probability at every level of ``chain``; last entry is ``p0``."""
        D = self.D[g]
        L = len(chain)
        out = [0.0] * (L + 1)
        p = out[L] = p0
        for i in range(L - 1, -1, -1):
            r, lvl = chain[i]
            p = out[i] = self._pred(g, r, r * D + d, lvl, p, ov)
        return out

    def _seat_chain(self, g, chain, d, probs, ov, rng, journal):
        """Seat one customer down ``chain``; True if a table opened at the last level."""
        D = self.D[g]
        for i in range(len(chain)):
            r, lvl = chain[i]
            key = r * D + d
            c = self.cd[g].get(key, 0)
            if ov is not None:
                c += ov.dcd[g].get(key, 0)
            frm = 0
            if c > 0:
                a, b = self.params[lvl]
                K = self.rK[g][r]
                k = self.kd[g].get(key, 0)
                if ov is not None:
                    K += ov.dK[g].get(r, 0)
                    k += ov.dkd[g].get(key, 0)
                w_new = (a * K + b) * probs[i + 1]
                x = rng.uniform() * (c - a * k + w_new)
                h = self._hist_of(g, key, ov)
                for s in sorted(h):
                    w = (s - a) * h[s]
                    if x < w:
                        frm = s
                        break
                    x -= w
            self._move(g, r, key, frm, frm + 1, ov)
            journal.append((g, r, key, frm, frm + 1))
            if frm > 0:
                return False
        return True

    def _unseat_chain(self, g, chain, d, ov, rng, journal):
        D = self.D[g]
        for i in range(len(chain)):
            r, lvl = chain[i]
            key = r * D + d
            h = self._hist_of(g, key, ov)
            c = self.cd[g].get(key, 0)
            if ov is not None:
                c += ov.dcd[g].get(key, 0)
            if c <= 0:
                raise InconsistentDelta(f"group {g} restaurant {r}: unseat of unserved dish {d}")
            x = rng.uniform() * c
            sizes = sorted(h)
            frm = sizes[-1]
            for s in sizes:
                w = s * h[s]
                if x < w:
                    frm = s
                    break
                x -= w
            self._move(g, r, key, frm, frm - 1, ov)
            journal.append((g, r, key, frm, frm - 1))
            if frm != 1:
                return False
        return True

    # ------------------------------------------------------- probabilities
    def trans_prob(self, t2, t1, t, ov=None):
        p = self._pred(G_TRANS, self.r_uni, self.r_uni * self.T1 + t, LV_UNI, self.p_tag0, ov)
        r = self.R_tri + t1
        p = self._pred(G_TRANS, r, r * self.T1 + t, LV_BI, p, ov)
        r = t2 * self.T1 + t1
        return self._pred(G_TRANS, r, r * self.T1 + t, LV_TRI, p, ov)

    def char_prob(self, t, prev, c, ov=None):
        A1 = self.A1
        r = self.T * A1 + t
        p = self._pred(G_CHAR, r, r * A1 + c, LV_CUNI, self.p_char0, ov)
        r = t * A1 + prev
        return self._pred(G_CHAR, r, r * A1 + c, LV_CBI, p, ov)

    def char_word_prob(self, t, w, ov=None):
        prod = 1.0
        prev = self.A
        for c in self.chars[w]:
            prod *= self.char_prob(t, prev, c, ov)
            prev = c
        prod *= self.char_prob(t, prev, self.A, ov)
        return prod

    def word_base_prob(self, t, w, ov=None):
        if ov is not None and w == self._cur_w:
            if not ov.inc[t]:
                return 0.0
            e = ov.e[t]
        else:
            if not self.allowed[w * self.T + t]:
                return 0.0
            e = self.e_count[t]
        if self.charlm:
            return self.char_word_prob(t, w, ov)
        return 1.0 / e

    def emit_prob(self, t, w, ov=None):
        return self._pred(G_EMIT, t, t * self.W + w, LV_EMIT, self.word_base_prob(t, w, ov), ov)

    def emission_tables(self, t):
        return self.rK[G_EMIT][t]

    # ------------------------------------------------------------ seating ops
    def _seat_trans(self, t2, t1, t0, ov, rng, journal):
        chain = self._trans_chain(t2, t1)
        probs = self._probs(G_TRANS, chain, t0, self.p_tag0, ov)
        self._seat_chain(G_TRANS, chain, t0, probs, ov, rng, journal)
        return probs[0]

    def _seat_emit(self, t, w, ov, rng, journal):
        pb = self.word_base_prob(t, w, ov)
        chain = ((t, LV_EMIT),)
        probs = self._probs(G_EMIT, chain, w, pb, ov)
        if self._seat_chain(G_EMIT, chain, w, probs, ov, rng, journal) and self.charlm:
            prev = self.A
            for c in self.chars[w] + [self.A]:
                cc = self._char_chain(t, prev)
                cp = self._probs(G_CHAR, cc, c, self.p_char0, ov)
                self._seat_chain(G_CHAR, cc, c, cp, ov, rng, journal)
                prev = c
        return probs[0]

    def _unseat_trans(self, t2, t1, t0, rng, journal):
        self._unseat_chain(G_TRANS, self._trans_chain(t2, t1), t0, None, rng, journal)

    def _unseat_emit(self, t, w, rng, journal):
        if self._unseat_chain(G_EMIT, ((t, LV_EMIT),), w, None, rng, journal) and self.charlm:
            seq = [self.A] + self.chars[w] + [self.A]
            for i in range(len(seq) - 1, 0, -1):
                self._unseat_chain(G_CHAR, self._char_chain(t, seq[i - 1]), seq[i], None, rng, journal)

    def _replay(self, moves, ov, journal):
        """Undo a removal journal (restoring the removed customers) inside ``ov``."""
        for g, r, key, frm, to in reversed(moves):
            self._move(g, r, key, to, frm, ov)
            journal.append((g, r, key, to, frm))

    def _apply(self, moves):
        for g, r, key, frm, to in moves:
            self._move(g, r, key, frm, to, None)

    def _revert(self, moves):
        for g, r, key, frm, to in reversed(moves):
            self._move(g, r, key, to, frm, None)

    def _tag_base(self, j, lo, hi):
        if j < lo or j >= hi:
            return self.BOUND
        return self.tags[j]

    # ------------------------------------------------------------- initialise
    def initialize(self, tags, key):
        """Seat every transition and emission customer for ``tags`` in corpus order."""
        self.set_tags(tags)
        for g in range(3):
            self.cd[g].clear()
            self.kd[g].clear()
            self.hist[g].clear()
            for i in range(len(self.rn[g])):
                self.rn[g][i] = 0
                self.rK[g][i] = 0
        rng = _rng.Stream(key)
        journal = []
        j = 0
        while j < self.N:
            lo, hi = self.start[j], self.end[j]
            for k in range(lo, hi + 1):
                self._seat_trans(self._tag_base(k - 2, lo, hi), self._tag_base(k - 1, lo, hi),
                                 self._tag_base(k, lo, hi), None, rng, journal)
                if k < hi:
                    self._seat_emit(self.tags[k], self.tokens[k], None, rng, journal)
                journal.clear()
            j = hi

    # ----------------------------------------------------------- local Gibbs
    def local_sweep(self, key):
        """One Metropolis-within-Gibbs pass over all tokens in corpus order.

        Returns the number of rejected proposals.
        """
        rng = _rng.Stream(key)
        T = self.T
        rejected = 0
        for j in range(self.N):
            w = self.tokens[j]
            lo, hi = self.start[j], self.end[j]
            z0 = self.tags[j]
            ks = [k for k in (j, j + 1, j + 2) if k <= hi]
            # remove in reverse seating order, recording the reverse predictive
            removal = []
            a_old = [0.0] * (len(ks) + 1)
            jr = []
            self._unseat_emit(z0, w, rng, jr)
            removal.append(jr)
            a_old[len(ks)] = self.emit_prob(z0, w)
            for m in range(len(ks) - 1, -1, -1):
                k = ks[m]
                jr = []
                tr = (self._tag_base(k - 2, lo, hi), self._tag_base(k - 1, lo, hi), self._tag_base(k, lo, hi))
                self._unseat_trans(tr[0], tr[1], tr[2], rng, jr)
                removal.append(jr)
                a_old[m] = self.trans_prob(tr[0], tr[1], tr[2])
            removal.reverse()
            cand = [t for t in range(T) if self.allowed[w * T + t]]
            q = []
            for z in cand:
                self.tags[j] = z
                prod = 1.0
                for k in ks:
                    prod *= self.trans_prob(self._tag_base(k - 2, lo, hi), self._tag_base(k - 1, lo, hi),
                                            self._tag_base(k, lo, hi))
                prod *= self.emit_prob(z, w)
                q.append(prod)
            total = 0.0
            for v in q:
                total += v
            x = rng.uniform() * total
            zi = len(q) - 1
            for i, v in enumerate(q):
                if x < v:
                    zi = i
                    break
                x -= v
            z = cand[zi]
            qz = q[zi]
            qz0 = q[cand.index(z0)]
            self.tags[j] = z
            seated = []
            a_new = 1.0
            for k in ks:
                a_new *= self._seat_trans(self._tag_base(k - 2, lo, hi), self._tag_base(k - 1, lo, hi),
                                          self._tag_base(k, lo, hi), None, rng, seated)
            a_new *= self._seat_emit(z, w, None, rng, seated)
            a0 = 1.0
            for v in a_old:
                a0 *= v
            if a_new != qz or a0 != qz0:
                log_r = (math.log(a_new) - math.log(qz)) - (math.log(a0) - math.log(qz0))
                if log_r < 0.0 and math.log(rng.uniform()) >= log_r:
                    self._revert(seated)
                    self.tags[j] = z0
                    for jr in removal:
                        self._revert(jr)
                    rejected += 1
        return rejected

    # ------------------------------------------------------- type sweep
    def remove_type(self, w, key):
        """Unseat every customer attached to the sites of ``w`` and journal the removal."""
        if self._cur_w >= 0:
            raise RuntimeError("type sweep already in progress")
        sites = self._site_list(w)
        self._cur_w = w
        self._sites = sites
        for i, j in enumerate(sites):
            self._mark[j] = i
        ops = []
        for j in sites:
            hi = self.end[j]
            ks = []
            for k in (j, j + 1, j + 2):
                if k > hi:
                    break
                if k > j and k < hi and self._mark[k] >= 0:
                    break
                ks.append(k)
            ops.append(ks)
        self._ops = ops
        self._old_tags = [self.tags[j] for j in sites]
        rng = _rng.Stream(_rng.derive(key, _rng.SLOT_REMOVE))
        removal = [None] * len(sites)
        for i in range(len(sites) - 1, -1, -1):
            j = sites[i]
            lo, hi = self.start[j], self.end[j]
            ks = ops[i]
            per = [None] * (len(ks) + 1)
            jr = []
            self._unseat_emit(self.tags[j], w, rng, jr)
            per[len(ks)] = jr
            for m in range(len(ks) - 1, -1, -1):
                k = ks[m]
                jr = []
                self._unseat_trans(self._tag_base(k - 2, lo, hi), self._tag_base(k - 1, lo, hi),
                                   self._tag_base(k, lo, hi), rng, jr)
                per[m] = jr
            removal[i] = per
        self._removal = removal

    def restore_type(self):
        """Undo ``remove_type`` exactly."""
        for per in self._removal:
            for jr in per:
                self._revert(jr)
        self._finish_type()

    def _finish_type(self):
        for j in self._sites:
            self._mark[j] = -1
        self._cur_w = -1
        self._sites = []
        self._ops = []
        self._removal = []

    def _site_list(self, w):
        if not hasattr(self, "_site_cache"):
            lists = [[] for _ in range(self.W)]
            for j, x in enumerate(self.tokens):
                lists[x].append(j)
            self._site_cache = lists
        return self._site_cache[w]

    def _tag_p(self, j, lo, hi, ptags):
        if j < lo or j >= hi:
            return self.BOUND
        m = self._mark[j]
        if m >= 0:
            return ptags[m]
        return self.tags[j]

    def _site_step(self, part, i, forced):
        w = self._cur_w
        j = self._sites[i]
        lo, hi = self.start[j], self.end[j]
        ks = self._ops[i]
        ptags = part.tags
        q = []
        for z in part.cls:
            ptags[i] = z
            prod = 1.0
            for k in ks:
                prod *= self.trans_prob(self._tag_p(k - 2, lo, hi, ptags), self._tag_p(k - 1, lo, hi, ptags),
                                        self._tag_p(k, lo, hi, ptags), part)
            prod *= self.emit_prob(z, w, part)
            q.append(prod)
        total = 0.0
        for v in q:
            total += v
        if forced:
            z = self._old_tags[i]
            zi = part.cls.index(z)
        else:
            x = part.rng.uniform() * total
            zi = len(q) - 1
            for m, v in enumerate(q):
                if x < v:
                    zi = m
                    break
                x -= v
            z = part.cls[zi]
        ptags[i] = z
        a = 1.0
        if forced:
            moves = self._removal[i]
            for m, k in enumerate(ks):
                a *= self.trans_prob(self._tag_p(k - 2, lo, hi, ptags), self._tag_p(k - 1, lo, hi, ptags),
                                     self._tag_p(k, lo, hi, ptags), part)
                self._replay(moves[m], part, part.journal)
            a *= self.emit_prob(z, w, part)
            self._replay(moves[len(ks)], part, part.journal)
        else:
            for k in ks:
                a *= self._seat_trans(self._tag_p(k - 2, lo, hi, ptags), self._tag_p(k - 1, lo, hi, ptags),
                                      self._tag_p(k, lo, hi, ptags), part, part.rng, part.journal)
            a *= self._seat_emit(z, w, part, part.rng, part.journal)
        part.logw += math.log(total)
        qz = q[zi]
        if a != qz:
            part.logw += math.log(a) - math.log(qz)

    def propagate_type(self, classes, logw, key, threshold=0.0):
        """Run the conditional particle filter over the removed type's sites.

        ``classes[p]`` is the sorted ambiguity class of particle ``p`` and
        ``logw[p]`` its initial log weight; particle 0 replays the removed
        state.  Commits the selected particle and returns
        ``(selected, final_log_weights, n_resample, selected_class)``; after
        resampling a slot may hold a copy of another slot's class.
        """
        w = self._cur_w
        if w < 0:
            raise RuntimeError("propagate_type without remove_type")
        P = len(classes)
        n = len(self._sites)
        T = self.T
        parts = []
        for p in range(P):
            part = _Particle()
            part.cls = [int(t) for t in classes[p]]
            part.inc = [0] * T
            for t in part.cls:
                part.inc[t] = 1
            part.e = [self.e_count[t] - self.allowed[w * T + t] + part.inc[t] for t in range(T)]
            part.tags = [0] * n
            part.logw = float(logw[p])
            part.rng = _rng.Stream(_rng.derive(key, _rng.SLOT_PARTICLE + p))
            parts.append(part)
        sel_rng = _rng.Stream(_rng.derive(key, _rng.SLOT_SELECT))
        n_resample = 0
        for i in range(n):
            for p in range(P):
                self._site_step(parts[p], i, p == 0)
            if threshold > 0.0 and P > 1 and i < n - 1:
                ws = _weights(parts)
                s1 = 0.0
                s2 = 0.0
                for v in ws:
                    s1 += v
                    s2 += v * v
                if s1 * s1 / s2 < threshold * P:
                    n_resample += 1
                    old = parts
                    parts = [old[0]]
                    for p in range(1, P):
                        anc = _draw(ws, s1, sel_rng)
                        part = _Particle()
                        part.copy_from(old[anc])
                        part.rng = old[p].rng
                        parts.append(part)
                    for part in parts:
                        part.logw = 0.0
        ws = _weights(parts)
        s1 = 0.0
        for v in ws:
            s1 += v
        sel = _draw(ws, s1, sel_rng)
        chosen = parts[sel]
        self._apply(chosen.journal)
        for i, j in enumerate(self._sites):
            self.tags[j] = chosen.tags[i]
        out = [part.logw for part in parts]
        self._finish_type()
        return sel, out, n_resample, list(chosen.cls)

    # ------------------------------------------------------------ state I/O
    def export_hist(self, g):
        """Rows ``(r, d, size, count)`` sorted, for restaurant group ``g``."""
        D = self.D[g]
        rows = []
        for key in sorted(self.hist[g]):
            h = self.hist[g][key]
            r, d = divmod(key, D)
            for s in sorted(h):
                rows.append((r, d, s, h[s]))
        return rows

    def import_hist(self, g, rows):
        D = self.D[g]
        self.cd[g].clear()
        self.kd[g].clear()
        self.hist[g].clear()
        for i in range(len(self.rn[g])):
            self.rn[g][i] = 0
            self.rK[g][i] = 0
        for r, d, s, c in rows:
            r, d, s, c = int(r), int(d), int(s), int(c)
            key = r * D + d
            h = self.hist[g].setdefault(key, {})
            h[s] = h.get(s, 0) + c
            self.cd[g][key] = self.cd[g].get(key, 0) + s * c
            self.kd[g][key] = self.kd[g].get(key, 0) + c
            self.rn[g][r] += s * c
            self.rK[g][r] += c

    def restaurant_totals(self, g):
        return list(self.rn[g]), list(self.rK[g])

    def level_stats(self, lvl):
        """(customer totals, table totals, {size: count} in size order) over restaurants of a level."""
        g = {LV_TRI: 0, LV_BI: 0, LV_UNI: 0, LV_EMIT: 1, LV_CBI: 2, LV_CUNI: 2}[lvl]
        ns, Ks = [], []
        for r in range(len(self.rn[g])):
            if self._level(g, r) == lvl and self.rn[g][r] > 0:
                ns.append(self.rn[g][r])
                Ks.append(self.rK[g][r])
        agg = {}
        D = self.D[g]
        for key, h in self.hist[g].items():
            if self._level(g, key // D) == lvl:
                for s, c in h.items():
                    agg[s] = agg.get(s, 0) + c
        return ns, Ks, dict(sorted(agg.items()))


def _weights(parts):
    m = parts[0].logw
    for part in parts:
        if part.logw > m:
            m = part.logw
    return [math.exp(part.logw - m) for part in parts]


def _draw(ws, total, rng):
    x = rng.uniform() * total
    last = 0
    for p, v in enumerate(ws):
        if v > 0.0:
            if x < v:
                return p
            last = p
        x -= v
    return last
