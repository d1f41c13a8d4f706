"""Kernel selection: compiled extension when importable, numpy fallback otherwise.

Set ``STOCHHYST_BACKEND=python`` to force the fallback.
"""
import os

from . import _pykernels

python_kernels = _pykernels

if os.environ.get("STOCHHYST_BACKEND", "").lower() == "python":
    kernels = _pykernels
    compiled_kernels = None
else:
    try:
        from . import _ckernels as compiled_kernels
    except ImportError:  # extension not built
        compiled_kernels = None
    kernels = compiled_kernels if compiled_kernels is not None else _pykernels

BACKEND = "cython" if kernels is not _pykernels else "python"
