"""Unsupervised part-of-speech induction with a Pitman-Yor trigram HMM and an ambiguity-class lexicon."""

from .backend import default_backend, have_compiled
from .corpus import Corpus, Tagset, WordType, read_conllx, read_corpus, read_vertical, sites_of_type
from .inference import SamplerConfig, run_training, sweep_type
from .model import ModelConfig, ModelState, log_joint

__version__ = "0.1.0"

__all__ = [
    "Corpus", "Tagset", "WordType", "read_conllx", "read_corpus", "read_vertical", "sites_of_type",
    "ModelConfig", "ModelState", "log_joint", "SamplerConfig", "run_training", "sweep_type",
    "default_backend", "have_compiled", "__version__",
]
