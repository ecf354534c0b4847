import asyncio
import threading
from typing import Any, Callable, Coroutine, Optional, Sequence, TypeVar

T = TypeVar("T")


class AsyncRunner:
    """
    Background event loop that runs blocking jobs side by side for synchronous callers.

    The BuildingHub trains its increasing and decreasing surrogates through :meth:`run_blocking_parallel`. Each job
    gets a worker thread, the loop gathers them and the caller blocks until all are done.

    Example::

        runner = AsyncRunner()
        inc, dec = runner.run_blocking_parallel([lambda: train(split_inc), lambda: train(split_dec)])
        runner.shutdown()
    """

    def __init__(self):
        self.loop: asyncio.AbstractEventLoop | None = None
        self._thread = threading.Thread(target=self._serve, name="ahumpc-runner", daemon=True)
        self._ready = threading.Event()
        self._thread.start()
        self._ready.wait(timeout=5.0)

    @property
    def running(self) -> bool:
        return self.loop is not None and self.loop.is_running()

    def run_blocking_parallel(
        self, jobs: Sequence[Callable[[], T]], timeout: Optional[float] = None
    ) -> list[T | BaseException]:
        """
        Run blocking callables in worker threads at the same time and wait for all of them.

        Args:
            jobs: Callables without arguments (use ``functools.partial`` to bind them).
            timeout: Seconds to wait for the slowest job. None waits forever.

        Returns:
            list[T | BaseException]: Result or raised exception per job, in job order. A failing job never affects
            the others.

        Raises:
            RuntimeError: If the runner was shut down.
            TimeoutError: If the jobs do not finish within ``timeout``.
        """
        if not jobs:
            return []

        async def gather() -> list[Any]:
            return await asyncio.gather(*(asyncio.to_thread(job) for job in jobs), return_exceptions=True)

        return self._submit(gather(), timeout)

    def shutdown(self) -> None:
        """Stop the loop and join its thread. Further calls raise ``RuntimeError``."""
        if self.running:
            self.loop.call_soon_threadsafe(self.loop.stop)
        if self._thread.is_alive():
            self._thread.join(timeout=2.0)

    # ------------------------------------------------------------------------------------------------------------------
    # Private Methods
    # ------------------------------------------------------------------------------------------------------------------

    def _serve(self) -> None:
        self.loop = asyncio.new_event_loop()
        asyncio.set_event_loop(self.loop)
        self._ready.set()
        try:
            self.loop.run_forever()
        finally:
            self.loop.close()

    def _submit(self, coro: Coroutine[Any, Any, T], timeout: Optional[float]) -> T:
        if not self.running:
            coro.close()
            raise RuntimeError("AsyncRunner is not running")
        return asyncio.run_coroutine_threadsafe(coro, self.loop).result(timeout)
