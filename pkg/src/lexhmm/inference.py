"""Samplers: type-blocked particle Gibbs, token-level Gibbs, hyperparameter slice sampling."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

from . import pyp
from . import rng as _rng
from .corpus import Corpus
from .model import (LEVELS, ModelConfig, ModelState, level_log_prob, log_joint)

log = logging.getLogger(__name__)

_LOCAL_SLOT = 201
_HYPER_SLOT = 202


@dataclass
class SamplerConfig:
    n_tags: int
    kind: str = "lex"               # lex | pyp-type | local
    emission: str = "uniform"       # uniform | charlm
    particles: int = 10
    iterations: int = 200
    seed: int = 0
    p_geom: float = 0.5
    init: str = "random"
    resample_threshold: float = 0.5
    hyper_every: int = 0            # 0 keeps hyperparameters fixed
    threads: int = 1
    discount: float = 0.5
    strength: float = 1.0
    class_discount: float = 0.5
    class_strength: float = 1.0
    backend: str | None = None

    def validate(self):
        if self.particles < 1:
            raise ValueError("need at least one particle")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if not 0.0 <= self.resample_threshold <= 1.0:
            raise ValueError("resample threshold must lie in [0, 1]")
        if self.hyper_every < 0 or self.threads < 1:
            raise ValueError("bad cadence or thread count")
        self.model_config().validate()

    def model_config(self) -> ModelConfig:
        names = {f.name for f in fields(ModelConfig)}
        return ModelConfig(**{k: v for k, v in asdict(self).items() if k in names})


@dataclass
class SweepResult:
    selected: int = 0
    class_changed: bool = False
    resamples: int = 0


def propose_class(old: tuple[int, ...], n_tags: int, rng) -> tuple[int, ...]:
    """Toggle one uniformly chosen tag, or keep ``old`` (one extra outcome).

    A toggle that would empty the class is redrawn.
    """
    while True:
        m = rng.randbelow(n_tags + 1)
        if m == n_tags:
            return old
        s = set(old)
        s ^= {m}
        if s:
            return tuple(sorted(s))


def emission_mass_terms(e_minus, tables) -> tuple[float, list[float]]:
    """Split the emission base-mass correction into a class-free part and per-tag gains.

    A class ``s`` then scores ``base + sum(gain[t] for t in s)``: every seated
    table of tag t pays log(e_t + 1) when t is in s and log(e_t) otherwise.
    """
    base = 0.0
    gain = [0.0] * len(tables)
    for t, k in enumerate(tables):
        if k:
            e = int(e_minus[t])
            if e <= 0:
                raise pyp.InconsistentDelta(f"tag {t} has emission tables but no word types")
            le = math.log(e)
            base -= k * le
            gain[t] = -k * (math.log(e + 1) - le)
    return base, gain


def initial_log_weight(state: ModelState, cls: tuple[int, ...], terms) -> float:
    """Class prior times the change in emission base mass of already-seated tables."""
    lp = math.log(state.lexicon.class_prior_prob(cls))
    if state.config.emission == "uniform":
        base, gain = terms
        lp += base
        for t in cls:
            lp += gain[t]
    return lp


def sweep_type(state: ModelState, w: int, config: SamplerConfig, iteration: int) -> SweepResult:
    """Resample the ambiguity class of ``w`` and the tags of all its tokens."""
    corpus = state.corpus
    if corpus.site_tokens(w).shape[0] == 0:
        return SweepResult()
    k = state.kernel
    lex = state.lexicon
    T = state.n_tags
    P = config.particles
    key = _rng.stream_key(config.seed, iteration, w)
    k.remove_type(w, key)
    old = lex.classes[w]
    if lex.pinned:
        classes = [old] * P
        logw = [0.0] * P
    else:
        crng = _rng.Stream(_rng.derive(key, _rng.SLOT_CLASS))
        cdelta = lex.unseat(w, crng)
        terms = None
        if state.config.emission == "uniform":
            terms = emission_mass_terms(lex.e_without(w), k.restaurant_totals(1)[1])
        classes = [old] + [propose_class(old, T, crng) for _ in range(P - 1)]
        cache: dict[tuple, float] = {}
        logw = []
        for cls in classes:
            v = cache.get(cls)
            if v is None:
                v = cache[cls] = initial_log_weight(state, cls, terms)
            logw.append(v)
    sel, _, nres, chosen = k.propagate_type([list(c) for c in classes], logw, key,
                                            config.resample_threshold)
    new = tuple(chosen)
    if not lex.pinned:
        if sel == 0:
            pyp.revert_delta(cdelta)
        else:
            if new != old:
                state.set_class(w, new)
            lex.seat(w, crng)
    return SweepResult(sel, new != old, nres)


def local_gibbs_sweep(state: ModelState, config: SamplerConfig, iteration: int) -> int:
    """Token-by-token pass in corpus order; returns the number of rejected moves."""
    key = _rng.stream_key(config.seed, iteration, _LOCAL_SLOT)
    return state.kernel.local_sweep(key)


# -- hyperparameters -----------------------------------------------------------

def slice_sample(x0: float, logf: Callable[[float], float], rng: np.random.Generator,
                 lower: float, upper: float, width: float = 1.0, max_steps: int = 50) -> float:
    """One univariate slice-sampling update with stepping out and shrinkage."""
    y = logf(x0) - rng.exponential()
    u = rng.uniform()
    lo = x0 - width * u
    hi = lo + width
    steps = max_steps
    while lo > lower and steps > 0 and logf(lo) > y:
        lo -= width
        steps -= 1
    steps = max_steps
    while hi < upper and steps > 0 and logf(hi) > y:
        hi += width
        steps -= 1
    lo = max(lo, lower)
    hi = min(hi, upper)
    while True:
        x = rng.uniform(lo, hi)
        if lo < x < hi and logf(x) > y:
            return x
        if x < x0:
            lo = x
        else:
            hi = x
        if hi - lo < 1e-12:
            return x0


def level_posterior(ns, Ks, sizes) -> Callable[[float, float], float]:
    """Log posterior of (discount, strength) with uniform and Gamma(1, 1) priors."""
    def f(a, b):
        if not (0.0 < a < 1.0) or b <= 0.0:
            return -math.inf
        return level_log_prob(ns, Ks, sizes, a, b) - b
    return f


def resample_hyperparameters(state: ModelState, rng: np.random.Generator, sweeps: int = 1) -> None:
    """Slice-sample one (discount, strength) pair per restaurant level.

    The class-restaurant parameters and the geometric parameter stay fixed.
    Seating arrangements are not touched.
    """
    charlm = state.config.emission == "charlm"
    for i, lv in enumerate(LEVELS):
        if i >= 4 and not charlm:
            continue
        ns, Ks, sizes = state.kernel.level_stats(i)
        if not ns:
            continue
        f = level_posterior(ns, Ks, sizes)
        prm = state.params[lv]
        a, b = prm.discount, prm.strength
        for _ in range(sweeps):
            a = slice_sample(a, lambda x: f(x, b), rng, 0.0, 1.0, width=0.2)
            b = slice_sample(b, lambda x: f(a, x), rng, 0.0, math.inf, width=2.0)
        prm.discount, prm.strength = a, b
    state.push_params()


# -- training loop ---------------------------------------------------------------

def iteration_order(seed: int, iteration: int, n_types: int) -> np.ndarray:
    return np.random.Generator(np.random.PCG64([seed, iteration])).permutation(n_types)


def run_iteration(state: ModelState, config: SamplerConfig, iteration: int) -> dict:
    t0 = time.perf_counter()
    rec = {"iteration": iteration + 1}
    if config.kind == "local":
        rej = local_gibbs_sweep(state, config, iteration)
        rec["rejected"] = rej
    else:
        changed = resamples = swept = 0
        for w in iteration_order(config.seed, iteration, state.corpus.n_types).tolist():
            r = sweep_type(state, w, config, iteration)
            changed += r.class_changed
            resamples += r.resamples
            swept += 1
        rec["new_class_fraction"] = changed / max(swept, 1)
        rec["resamples"] = resamples
    if config.hyper_every and (iteration + 1) % config.hyper_every == 0:
        resample_hyperparameters(state, np.random.Generator(
            np.random.PCG64([config.seed, iteration, _HYPER_SLOT])))
    rec["seconds"] = time.perf_counter() - t0
    rec["log_joint"] = log_joint(state)
    rec["mean_class_size"] = state.lexicon.mean_class_size()
    return rec


def run_training(corpus: Corpus, config: SamplerConfig, state: ModelState | None = None,
                 start_iteration: int = 0,
                 on_iteration: Callable[[ModelState, dict], None] | None = None):
    """Run ``config.iterations`` sweeps; returns (state, final tags, diagnostics).

    Pass ``state`` and ``start_iteration`` to continue from a checkpoint.
    """
    config.validate()
    if state is None:
        state = ModelState(corpus, config.model_config())
        state.initialize(config.seed)
    diagnostics = []
    for it in range(start_iteration, config.iterations):
        rec = run_iteration(state, config, it)
        diagnostics.append(rec)
        log.info("iteration %d log_joint %.3f (%.2fs)", rec["iteration"], rec["log_joint"], rec["seconds"])
        if on_iteration is not None:
            on_iteration(state, rec)
    return state, state.tags, diagnostics
