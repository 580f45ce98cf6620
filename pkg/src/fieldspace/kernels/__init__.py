"""Kernel backend selection.

The numba-compiled kernels are the default. Set ``FIELDSPACE_BACKEND=numpy``
to force the pure-NumPy fallback; when numba is not importable the fallback is
selected automatically. ``benchmarks/bench_kernels.py`` times the two backends
head to head.
"""

from __future__ import annotations

import os
import warnings

from . import pure

_requested = os.environ.get("FIELDSPACE_BACKEND", "").strip().lower()

if _requested in ("numpy", "pure"):
    _impl = pure
    BACKEND = "numpy"
elif _requested in ("", "numba"):
    try:
        from . import jit as _impl  # noqa: F401

        BACKEND = "numba"
    except ImportError as exc:
        if _requested == "numba":
            raise
        warnings.warn(f"numba unavailable ({exc}); using pure-NumPy kernels")
        _impl = pure
        BACKEND = "numpy"
else:
    raise ValueError(
        f"FIELDSPACE_BACKEND={_requested!r} not recognized (use 'numba' or 'numpy')"
    )

eval_many = _impl.eval_many
eval_units_at = _impl.eval_units_at
plan_grid = _impl.plan_grid

__all__ = ["BACKEND", "eval_many", "eval_units_at", "plan_grid", "pure"]
