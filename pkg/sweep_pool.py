"""Bounded worker pool for independent sweep cells."""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterator, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)


def _call(fn: Callable, cell: Any) -> Tuple[Any, Optional[str]]:
    try:
        return fn(cell), None
    except Exception as e:
        return None, f"{type(e).__name__}: {e}"


def run_cells(fn: Callable, cells: Sequence[Any],
              jobs: int = 1) -> Iterator[Tuple[Any, Any, Optional[str]]]:
    """
    Apply fn to every cell and yield (cell, result, error) in cell order.

    Exceptions raised by fn are captured per cell as an error string so one
    bad cell never aborts the sweep. jobs <= 1 runs in-process; larger values
    use a process pool of that size. Output order never depends on jobs.

    Args:
        fn: Module-level (picklable) function of a single cell
        cells: Work items
        jobs: Worker count
    """
    if jobs <= 1 or len(cells) <= 1:
        for cell in cells:
            result, error = _call(fn, cell)
            yield cell, result, error
        return

    workers = min(jobs, len(cells))
    logger.debug(f"Dispatching {len(cells)} cells to {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_call, fn, cell) for cell in cells]
        # Collect in submission order so results are written by a single collector
        for cell, future in zip(cells, futures):
            result, error = future.result()
            yield cell, result, error
