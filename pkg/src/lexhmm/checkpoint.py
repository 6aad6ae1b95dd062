"""Versioned checkpoints of a sampler state.

A checkpoint is an uncompressed ``.npz`` archive holding the exported model
arrays (see ``model.export_state``), the sampler configuration as JSON, the
number of completed iterations, the diagnostics so far and a fingerprint of
the training corpus.  Random streams are keyed by (seed, iteration, ...), so
these fields are enough to continue a run exactly.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import asdict, fields

import numpy as np

from .corpus import Corpus
from .inference import SamplerConfig
from .model import ModelState, export_state, import_state

FORMAT = "lexhmm-checkpoint"
VERSION = 1

# fields that may differ between the checkpointed and the resuming run
RESUMABLE_FIELDS = {"iterations", "threads", "backend"}


class CheckpointError(ValueError):
    pass


def corpus_fingerprint(corpus: Corpus) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(corpus.tokens, dtype=np.int32).tobytes())
    h.update(np.ascontiguousarray(corpus.offsets, dtype=np.int64).tobytes())
    h.update("\n".join(corpus.vocab).encode("utf-8"))
    return h.hexdigest()


def save(path, state: ModelState, config: SamplerConfig, iteration: int,
         diagnostics: list | None = None) -> None:
    """Write atomically: a partial file never replaces a good checkpoint."""
    arrays = export_state(state)
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "iteration": int(iteration),
        "config": asdict(config),
        "corpus": corpus_fingerprint(state.corpus),
        "diagnostics": diagnostics or [],
    }
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".npz.tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            np.savez(f, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read(path) -> tuple[dict, dict]:
    """(metadata, arrays) without building a state."""
    with np.load(path, allow_pickle=False) as z:
        arrays = {k: z[k] for k in z.files}
    try:
        meta = json.loads(arrays.pop("meta").tobytes().decode("utf-8"))
    except KeyError:
        raise CheckpointError(f"{path}: not a checkpoint (no metadata)") from None
    if meta.get("format") != FORMAT:
        raise CheckpointError(f"{path}: not a checkpoint")
    if meta.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {meta.get('version')}")
    return meta, arrays


def config_from_meta(meta: dict) -> SamplerConfig:
    names = {f.name for f in fields(SamplerConfig)}
    return SamplerConfig(**{k: v for k, v in meta["config"].items() if k in names})


def check_compatible(saved: SamplerConfig, config: SamplerConfig) -> None:
    a, b = asdict(saved), asdict(config)
    diff = sorted(k for k in a if k not in RESUMABLE_FIELDS and a[k] != b.get(k))
    if diff:
        raise CheckpointError("configuration differs from the checkpoint in: " + ", ".join(diff))


def load(path, corpus: Corpus, config: SamplerConfig | None = None):
    """Rebuild the state; returns (state, config, completed iterations, diagnostics).

    Refuses a checkpoint made on a different corpus, or one whose sampling
    configuration disagrees with ``config``.
    """
    meta, arrays = read(path)
    if meta["corpus"] != corpus_fingerprint(corpus):
        raise CheckpointError(f"{path}: checkpoint was made on a different corpus")
    saved = config_from_meta(meta)
    if config is None:
        config = saved
    else:
        check_compatible(saved, config)
    state = ModelState(corpus, config.model_config())
    import_state(state, arrays)
    return state, config, int(meta["iteration"]), list(meta["diagnostics"])
