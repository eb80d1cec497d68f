"""
Bounded worker pool for per-video work.

Videos are independent, so each one is handed to a thread executor while a
fixed number of asyncio workers pull from a shared queue. Results come back
in input order no matter which video finishes first.
"""

import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Tuple, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

ProgressCallback = Callable[[int, int], None]


class ParallelVideoRunner:
    """Runs a function over many videos with a configurable worker pool."""

    def __init__(self, num_workers: int = 4):
        """
        Initialize the runner.

        Args:
            num_workers: Maximum number of videos processed at once
        """
        if num_workers < 1:
            raise ValueError("num_workers must be >= 1")
        self.num_workers = num_workers

    async def run_all(
        self,
        func: Callable[[T], R],
        items: Iterable[T],
        progress_callback: Optional[ProgressCallback] = None,
    ) -> List[R]:
        """
        Apply `func` to every item in parallel.

        Strategy:
        1. Queue (index, item) pairs
        2. Start min(num_workers, len(items)) workers that each run items
           through the shared thread executor until the queue is empty
        3. Write each result into its input slot

        Args:
            func: Synchronous per-item function
            items: Work items; consumed eagerly
            progress_callback: Optional callback(done, total) after each item

        Returns:
            Results in input order

        Raises:
            Exception: The first failure in input order; remaining work is abandoned
            asyncio.CancelledError: If interrupted, stops all workers and re-raises
        """
        work: List[T] = list(items)
        total = len(work)
        if total == 0:
            return []

        workers = min(self.num_workers, total)
        queue: asyncio.Queue = asyncio.Queue()
        for index, item in enumerate(work):
            queue.put_nowait((index, item))

        results: List[Optional[R]] = [None] * total
        failures: List[Tuple[int, BaseException]] = []
        stop_event = asyncio.Event()
        done = 0
        loop = asyncio.get_running_loop()
        executor = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="facegraph")

        async def worker():
            nonlocal done
            while not stop_event.is_set():
                try:
                    index, item = queue.get_nowait()
                except asyncio.QueueEmpty:
                    break
                try:
                    results[index] = await loop.run_in_executor(executor, func, item)
                except asyncio.CancelledError:
                    stop_event.set()
                    raise
                except Exception as e:
                    failures.append((index, e))
                    stop_event.set()
                    break
                finally:
                    queue.task_done()
                done += 1
                if progress_callback:
                    progress_callback(done, total)

        worker_tasks = [asyncio.create_task(worker()) for _ in range(workers)]
        try:
            await asyncio.gather(*worker_tasks)
        except asyncio.CancelledError:
            stop_event.set()
            raise
        finally:
            for task in worker_tasks:
                if not task.done():
                    task.cancel()
            await asyncio.gather(*worker_tasks, return_exceptions=True)
            executor.shutdown(wait=not failures and not stop_event.is_set(), cancel_futures=True)

        if failures:
            index, error = min(failures, key=lambda f: f[0])
            logger.debug("Worker failed on item %d: %s", index, error)
            raise error
        return results  # type: ignore[return-value]
