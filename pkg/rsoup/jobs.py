"""
jobs.py - Independent runs on worker threads

The N fine-tunings, the M MORL runs and the sweep evaluations share no
mutable state, so they can run side by side. Results are collected by
submission index, never by completion order, which keeps every output a
pure function of its inputs.

    main thread                     worker threads (<= jobs at once)
    +------------------+            +------------------+
    | map(fn, items)   | -- spawn ->| fn(item_0)       |--+
    |   ...            | -- spawn ->| fn(item_1)       |--+--> results[i]
    |   join all       |            +------------------+  |
    |   results[0..n]  | <-- drain_notifications() -------+
    +------------------+

Key insight: "Parallel inside, ordered outside."
"""

import logging
import threading

logger = logging.getLogger(__name__)


class JobPool:
    def __init__(self, jobs: int = 1):
        self.jobs = max(1, int(jobs))
        self.tasks = {}  # index -> {status, label}
        self._notification_queue = []
        self._lock = threading.Lock()

    def map(self, fn, items, labels=None) -> list:
        items = list(items)
        labels = list(labels) if labels is not None else [str(i) for i in range(len(items))]
        results = [None] * len(items)
        errors = {}
        if self.jobs == 1 or len(items) <= 1:
            for i, item in enumerate(items):
                self._execute(i, labels[i], fn, item, results, errors, None)
                if i in errors:
                    raise errors[i]
            return results

        gate = threading.Semaphore(self.jobs)
        threads = []
        for i, item in enumerate(items):
            gate.acquire()
            thread = threading.Thread(
                target=self._execute, args=(i, labels[i], fn, item, results, errors, gate), daemon=True
            )
            thread.start()
            threads.append(thread)
        for thread in threads:
            thread.join()
        if errors:
            raise errors[min(errors)]
        return results

    def _execute(self, index, label, fn, item, results, errors, gate):
        with self._lock:
            self.tasks[index] = {"status": "running", "label": label}
        try:
            results[index] = fn(item)
            status = "completed"
        except Exception as e:
            errors[index] = e
            status = "error"
            logger.debug("job %s failed: %s", label, e)
        finally:
            if gate is not None:
                gate.release()
        with self._lock:
            self.tasks[index]["status"] = status
            self._notification_queue.append({"index": index, "label": label, "status": status})

    def drain_notifications(self) -> list:
        """Return and clear all pending completion notifications."""
        with self._lock:
            notifs = list(self._notification_queue)
            self._notification_queue.clear()
        return notifs
