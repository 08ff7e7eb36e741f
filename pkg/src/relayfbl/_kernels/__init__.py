"""Hot kernels with a compiled core and a numpy fallback.

The compiled extension is used when it was built and importable; set
``RELAYFBL_NO_EXT=1`` to force the numpy path. ``BACKEND`` reports which one
is active. Both backends agree to rounding error but are not bit-identical,
so reproducibility guarantees hold per backend.
"""
import os

from . import _pykernels as python

compiled = None
if not os.environ.get("RELAYFBL_NO_EXT"):
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

box_muller = _impl.box_muller
sq_dist_rows = _impl.sq_dist_rows
mgf_exponents = _impl.mgf_exponents

__all__ = ["BACKEND", "box_muller", "sq_dist_rows", "mgf_exponents", "python", "compiled"]
