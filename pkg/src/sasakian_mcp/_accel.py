"""Selects the numba or pure-numpy implementation of the hot kernels.

Set ``SASAKIAN_MCP_DISABLE_NUMBA=1`` before import to force the numpy path.
"""

import os

_FLAG = "SASAKIAN_MCP_DISABLE_NUMBA"

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None
NUMBA_DISABLED = os.environ.get(_FLAG, "").strip().lower() in ("1", "true", "yes", "on")
USE_NUMBA = NUMBA_AVAILABLE and not NUMBA_DISABLED

if USE_NUMBA:
    # the bundled TBB is often too old; skip it rather than warn on first launch
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
