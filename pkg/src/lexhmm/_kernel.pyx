# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled sampling kernel; same interface and results as ``_kernel_py``."""

from libc.stdint cimport uint64_t
from libcpp cimport bool as cbool
from libcpp.map cimport map as cmap
from libcpp.vector cimport vector

from .pyp import InconsistentDelta

BACKEND = "compiled"

cdef extern from "kernel_core.hpp" namespace "lexhmm":
    cdef cppclass Particle:
        pass

    cdef cppclass Group:
        vector[long long] rn, rK

    cdef cppclass Core:
        int T, W, N, A
        vector[int] tags
        vector[unsigned char] allowed
        vector[int] e_count
        double pa[6]
        double pbs[6]
        Core(int, const vector[int]&, const vector[long long]&, int,
             const vector[vector[int]]&, int, cbool) except +
        void set_word_class(int, const vector[int]&) except +
        double trans_prob(int, int, int, const Particle*)
        double char_prob(int, int, int, const Particle*)
        double char_word_prob(int, int, const Particle*)
        double word_base_prob(int, int, const Particle*)
        double emit_prob(int, int, const Particle*)
        void initialize(uint64_t) except +
        int local_sweep(uint64_t) except +
        void remove_type(int, uint64_t) except +
        void restore_type() except +
        int propagate_type(const vector[vector[int]]&, const vector[double]&, uint64_t, double,
                           vector[double]&, int&, vector[int]&) except +
        vector[long long] export_hist(int) except +
        void import_hist(int, const vector[long long]&) except +
        void level_stats(int, vector[long long]&, vector[long long]&, cmap[int, long long]&) except +
        Group grp[3]


cdef class Kernel:
    cdef Core* core
    cdef public object backend

    def __cinit__(self, n_tags, tokens, offsets, n_words, word_chars=None, n_chars=0,
                  charlm=False, params=None):
        cdef vector[int] toks = [int(x) for x in tokens]
        cdef vector[long long] offs = [int(x) for x in offsets]
        cdef vector[vector[int]] chars
        if word_chars is not None:
            chars = [[int(c) for c in w] for w in word_chars]
        if charlm and word_chars is None:
            raise ValueError("character LM needs word_chars")
        self.core = new Core(int(n_tags), toks, offs, int(n_words), chars, int(n_chars), bool(charlm))
        self.backend = BACKEND
        if params is not None:
            self.set_params(params)

    def __dealloc__(self):
        del self.core

    # -- setup -----------------------------------------------------------------
    @property
    def T(self):
        return self.core.T

    @property
    def N(self):
        return self.core.N

    @property
    def W(self):
        return self.core.W

    def set_params(self, params):
        p = [float(x) for x in params]
        if len(p) != 12:
            raise ValueError("expected 12 hyperparameters")
        for i in range(6):
            self.core.pa[i] = p[2 * i]
            self.core.pbs[i] = p[2 * i + 1]

    def get_params(self):
        out = []
        for i in range(6):
            out += [self.core.pa[i], self.core.pbs[i]]
        return out

    def set_word_class(self, int w, tags):
        self.core.set_word_class(w, [int(t) for t in tags])

    def word_class(self, int w):
        cdef int T = self.core.T
        return [t for t in range(T) if self.core.allowed[w * T + t]]

    @property
    def e_count(self):
        return list(self.core.e_count)

    def get_tags(self):
        return list(self.core.tags)

    def set_tags(self, tags):
        if len(tags) != self.core.N:
            raise ValueError("tag array length mismatch")
        self.core.tags = [int(t) for t in tags]

    # -- probabilities (base state) ---------------------------------------------
    def _check_tag(self, int t, bint boundary=False):
        if t < 0 or t > self.core.T or (t == self.core.T and not boundary):
            raise IndexError(f"tag {t} out of range")

    def trans_prob(self, int t2, int t1, int t, ov=None):
        self._check_tag(t2, True)
        self._check_tag(t1, True)
        self._check_tag(t, True)
        return self.core.trans_prob(t2, t1, t, NULL)

    def char_prob(self, int t, int prev, int c, ov=None):
        self._check_tag(t)
        if not (0 <= prev <= self.core.A and 0 <= c <= self.core.A):
            raise IndexError("character id out of range")
        return self.core.char_prob(t, prev, c, NULL)

    def _check_word(self, int w):
        if w < 0 or w >= self.core.W:
            raise IndexError(f"word type {w} out of range")

    def char_word_prob(self, int t, int w, ov=None):
        self._check_tag(t)
        self._check_word(w)
        return self.core.char_word_prob(t, w, NULL)

    def word_base_prob(self, int t, int w, ov=None):
        self._check_tag(t)
        self._check_word(w)
        return self.core.word_base_prob(t, w, NULL)

    def emit_prob(self, int t, int w, ov=None):
        self._check_tag(t)
        self._check_word(w)
        return self.core.emit_prob(t, w, NULL)

    def emission_tables(self, int t):
        self._check_tag(t)
        return self.core.grp[1].rK[t]

    # -- samplers ------------------------------------------------------------------
    def initialize(self, tags, key):
        self.set_tags(tags)
        try:
            self.core.initialize(<uint64_t>key)
        except RuntimeError as e:
            raise InconsistentDelta(str(e)) from None

    def local_sweep(self, key):
        try:
            return self.core.local_sweep(<uint64_t>key)
        except RuntimeError as e:
            raise InconsistentDelta(str(e)) from None

    def remove_type(self, int w, key):
        try:
            self.core.remove_type(w, <uint64_t>key)
        except RuntimeError as e:
            raise InconsistentDelta(str(e)) from None

    def restore_type(self):
        self.core.restore_type()

    def propagate_type(self, classes, logw, key, double threshold=0.0):
        cdef vector[vector[int]] cls = [[int(t) for t in c] for c in classes]
        cdef vector[double] lw = [float(x) for x in logw]
        cdef vector[double] out
        cdef vector[int] chosen
        cdef int nres = 0
        cdef int sel
        try:
            sel = self.core.propagate_type(cls, lw, <uint64_t>key, threshold, out, nres, chosen)
        except RuntimeError as e:
            raise InconsistentDelta(str(e)) from None
        return sel, list(out), nres, list(chosen)

    # -- state I/O -------------------------------------------------------------------
    def export_hist(self, int g):
        cdef vector[long long] flat = self.core.export_hist(g)
        return [(flat[i], flat[i + 1], flat[i + 2], flat[i + 3]) for i in range(0, flat.size(), 4)]

    def import_hist(self, int g, rows):
        cdef vector[long long] flat
        for r in rows:
            flat.push_back(int(r[0]))
            flat.push_back(int(r[1]))
            flat.push_back(int(r[2]))
            flat.push_back(int(r[3]))
        self.core.import_hist(g, flat)

    def restaurant_totals(self, int g):
        return list(self.core.grp[g].rn), list(self.core.grp[g].rK)

    def level_stats(self, int lvl):
        cdef vector[long long] ns, Ks
        cdef cmap[int, long long] agg
        self.core.level_stats(lvl, ns, Ks, agg)
        return list(ns), list(Ks), {kv.first: kv.second for kv in agg}
