"""Selects the compiled extension or the NumPy fallback at import time.

Set ``NETKUCB_BACKEND=python`` to force the fallback (used by the
benchmark and the backend-equivalence tests); ``NETKUCB_BACKEND=compiled``
raises if the extension is missing.
"""

import os

from . import _ops_np

_requested = os.environ.get("NETKUCB_BACKEND", "auto")

if _requested == "python":
    ops = _ops_np
    BACKEND = "python"
else:
    try:
        from . import _core as ops  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "NETKUCB_BACKEND=compiled but netkucb._core is not built; "
                "run `pip install -e .` or `python setup.py build_ext --inplace`"
            )
        ops = _ops_np
        BACKEND = "python"

grow_inverse = ops.grow_inverse
sherman_morrison = ops.sherman_morrison
linear_row = ops.linear_row
rbf_row = ops.rbf_row
matern_row = ops.matern_row
