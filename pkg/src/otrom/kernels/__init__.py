"""Backend dispatch for the numeric hot loops.

The env var OTROM_NUMBA picks the implementation at import time:

* unset or "auto" - numba if importable, else pure numpy
* "1"/"true"/"on" - numba, raising if it is not installed
* "0"/"false"/"off" - pure numpy

``BACKEND`` records the active choice; ``benchmarks/bench_kernels.py``
compares the two implementations head to head.
"""

from __future__ import annotations

import os

_choice = os.environ.get("OTROM_NUMBA", "auto").strip().lower()

if _choice in ("0", "false", "no", "off"):
    from . import numpy_backend as _impl

    BACKEND = "numpy"
elif _choice in ("1", "true", "yes", "on"):
    from . import numba_backend as _impl  # noqa: F401  (ImportError is the contract)

    BACKEND = "numba"
else:
    try:
        from . import numba_backend as _impl

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - depends on environment
        from . import numpy_backend as _impl

        BACKEND = "numpy"

dual_update = _impl.dual_update
marginal_sums = _impl.marginal_sums
plan_dense = _impl.plan_dense
plan_triplets = _impl.plan_triplets
scatter_plan_dense = _impl.scatter_plan_dense
scatter_plan_triplets = _impl.scatter_plan_triplets

__all__ = [
    "BACKEND",
    "dual_update",
    "marginal_sums",
    "plan_dense",
    "plan_triplets",
    "scatter_plan_dense",
    "scatter_plan_triplets",
]
