"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
kernel.  ``LEXHMM_BACKEND=python`` or ``=compiled`` forces a choice (the
latter raises if the extension is missing).
"""

from __future__ import annotations

import os

from . import _kernel_py

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _kernel_py.Kernel}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled.Kernel


def default_backend() -> str:
    env = os.environ.get("LEXHMM_BACKEND", "").strip().lower()
    if env:
        if env not in ("python", "compiled"):
            raise ValueError(f"LEXHMM_BACKEND must be 'python' or 'compiled', not {env!r}")
        if env not in BACKENDS:
            raise ImportError("compiled kernel requested but lexhmm._kernel is not built")
        return env
    return "compiled" if "compiled" in BACKENDS else "python"


def kernel_class(name: str | None = None):
    name = name or default_backend()
    try:
        return BACKENDS[name]
    except KeyError:
        raise ImportError(f"kernel backend {name!r} is not available") from None


def have_compiled() -> bool:
    return "compiled" in BACKENDS
