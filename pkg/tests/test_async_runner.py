import functools
import threading
import time
import unittest

from ahumpc.utils import AsyncRunner


def _fit(samples: int, scale: float) -> float:
    return samples * scale


class TestAsyncRunner(unittest.TestCase):
    """Test suite for AsyncRunner"""

    def setUp(self):
        self.runner = AsyncRunner()

    def tearDown(self):
        self.runner.shutdown()

    def test_starts_running(self):
        """Test that a new runner has a live loop"""
        self.assertTrue(self.runner.running)

    def test_results_keep_job_order(self):
        """Test that results come back in job order, not finishing order"""

        def slow():
            time.sleep(0.2)
            return "inc"

        results = self.runner.run_blocking_parallel([slow, lambda: "dec"])
        self.assertEqual(results, ["inc", "dec"])

    def test_partial_jobs(self):
        """Test jobs bound with functools.partial"""
        jobs = [functools.partial(_fit, 10, 0.5), functools.partial(_fit, 4, 2.0)]
        self.assertEqual(self.runner.run_blocking_parallel(jobs), [5.0, 8.0])

    def test_jobs_overlap(self):
        """Test that two jobs run at the same time"""
        barrier = threading.Barrier(2, timeout=2.0)

        def job():
            barrier.wait()
            return "done"

        start = time.time()
        self.assertEqual(self.runner.run_blocking_parallel([job, job], timeout=5.0), ["done", "done"])
        self.assertLess(time.time() - start, 2.0)

    def test_failing_job_is_returned(self):
        """Test that one failing job leaves the other result intact"""

        def failing():
            raise ValueError("training failed")

        results = self.runner.run_blocking_parallel([failing, lambda: "model"])
        self.assertIsInstance(results[0], ValueError)
        self.assertEqual(results[1], "model")

    def test_empty_jobs(self):
        self.assertEqual(self.runner.run_blocking_parallel([]), [])

    def test_timeout(self):
        """Test that a job slower than the timeout raises TimeoutError"""
        release = threading.Event()

        def stuck():
            release.wait(2.0)

        try:
            with self.assertRaises(TimeoutError):
                self.runner.run_blocking_parallel([stuck], timeout=0.1)
        finally:
            release.set()

    def test_shutdown(self):
        """Test that a shut down runner refuses new jobs"""
        self.runner.shutdown()
        self.assertFalse(self.runner.running)
        with self.assertRaises(RuntimeError):
            self.runner.run_blocking_parallel([lambda: 1])

    def test_shutdown_twice(self):
        self.runner.shutdown()
        self.runner.shutdown()
        self.assertFalse(self.runner.running)


if __name__ == "__main__":
    unittest.main()
