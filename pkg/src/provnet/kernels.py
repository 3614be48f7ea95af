"""Hot-loop kernels, compiled when available.

``BACKEND`` is ``"cython"`` when the extension imported, else ``"python"``.
Set ``PROVNET_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels as python

try:
    if os.environ.get("PROVNET_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from . import _ckernels as compiled
except ImportError:
    compiled = None

_impl = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"


def get_backend(name=None):
    """Return the kernel module for ``name`` (``"cython"``, ``"python"`` or None for default)."""
    if name is None:
        return _impl
    if name == "python":
        return python
    if name == "cython":
        if compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
        return compiled
    raise ValueError(f"unknown kernel backend {name!r}")


def pair_keys(indptr, indices, n_nodes, start, stop, backend=None):
    return get_backend(backend).pair_keys(indptr, indices, n_nodes, start, stop)


def greedy_merges(n, src, dst, weight, backend=None):
    return get_backend(backend).greedy_merges(n, src, dst, weight)
