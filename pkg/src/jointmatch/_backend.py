"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy fallback in ``_kernels_py`` is used.  Set ``JOINTMATCH_BACKEND=python``
to force the fallback (``compiled`` makes a missing extension an error).
"""

import importlib
import os

from . import _kernels_py

_FUNCS = ("softmax_rows", "xent_backward", "select_pseudo", "hash_buckets",
          "hashed_bow", "augment_tokens")


def load(name=None):
    """Return ``(module, backend_name)`` for ``name`` in {None, 'python', 'compiled'}."""
    name = name or os.environ.get("JOINTMATCH_BACKEND", "auto")
    if name == "python":
        return _kernels_py, "python"
    try:
        mod = importlib.import_module("jointmatch._kernels")
    except ImportError:
        if name == "compiled":
            raise
        return _kernels_py, "python"
    return mod, "compiled"


kernels, BACKEND = load()

softmax_rows = kernels.softmax_rows
xent_backward = kernels.xent_backward
select_pseudo = kernels.select_pseudo
hash_buckets = kernels.hash_buckets
hashed_bow = kernels.hashed_bow
augment_tokens = kernels.augment_tokens

__all__ = ["BACKEND", "kernels", "load", *_FUNCS]
