"""Worker-count control for the numba kernels.

``COHERENT_THREADS`` caps the number of workers. Every kernel splits its work
into fixed units (slabs, rows, tiles) whose results do not depend on how they
are scheduled, so outputs are bit-identical for any worker count.
"""

from __future__ import annotations

import logging
import os
import sys

logger = logging.getLogger(__name__)


def _env_threads() -> int | None:
    raw = os.environ.get("COHERENT_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        logger.warning("ignoring non-integer COHERENT_THREADS=%r", raw)
        return None
    return max(1, n)


_requested = _env_threads()
if _requested is not None and "numba" not in sys.modules and "NUMBA_NUM_THREADS" not in os.environ:
    # numba sizes its pool at import; allow oversubscription on small machines
    os.environ["NUMBA_NUM_THREADS"] = str(max(_requested, os.cpu_count() or 1))

import numba  # noqa: E402

# the bundled TBB is too old for numba and only produces a warning
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


def max_workers() -> int:
    return numba.config.NUMBA_NUM_THREADS


def set_workers(n: int) -> int:
    """Set the worker count (clamped to the pool size); returns the value used."""
    n = max(1, min(int(n), max_workers()))
    numba.set_num_threads(n)
    return n


def get_workers() -> int:
    return numba.get_num_threads()


if _requested is not None:
    if _requested > max_workers():
        logger.warning("COHERENT_THREADS=%d exceeds numba pool of %d", _requested, max_workers())
    set_workers(_requested)
