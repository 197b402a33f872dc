"""Background jobs (experiments, evaluations) with ordered progress events.

One writer at a time: every job and every synchronous retrain contends for
the same exclusive lock, so a second concurrent training request is
rejected as busy rather than queued.
"""

from __future__ import annotations

import threading
import traceback
import uuid
from dataclasses import dataclass, field
from typing import Any, Callable


class Busy(Exception):
    pass


@dataclass
class Job:
    id: str
    kind: str
    status: str = "running"  # running | done | failed | cancelled
    events: list[dict] = field(default_factory=list)
    result: Any = None
    error: str | None = None
    cancel_event: threading.Event = field(default_factory=threading.Event)
    cond: threading.Condition = field(default_factory=threading.Condition)

    def emit(self, event: dict) -> None:
        with self.cond:
            self.events.append(event)
            self.cond.notify_all()

    def finish(self, status: str, result=None, error: str | None = None) -> None:
        with self.cond:
            self.status = status
            self.result = result
            self.error = error
            self.cond.notify_all()


class JobManager:
    def __init__(self, train_lock: threading.Lock):
        self.train_lock = train_lock
        self.jobs: dict[str, Job] = {}

    def start(self, kind: str, fn: Callable[[Job], Any]) -> Job:
        if not self.train_lock.acquire(blocking=False):
            raise Busy("a training job is already running")
        job = Job(id=uuid.uuid4().hex[:12], kind=kind)
        self.jobs[job.id] = job

        def runner() -> None:
            try:
                result = fn(job)
                if job.cancel_event.is_set():
                    job.finish("cancelled")
                else:
                    job.finish("done", result)
            except Exception as exc:  # surfaced through the job record
                job.finish("failed", error=f"{exc}\n{traceback.format_exc()}")
            finally:
                self.train_lock.release()

        threading.Thread(target=runner, daemon=True).start()
        return job

    def get(self, job_id: str) -> Job | None:
        return self.jobs.get(job_id)

    def cancel(self, job_id: str) -> bool:
        job = self.jobs.get(job_id)
        if job is None or job.status != "running":
            return False
        job.cancel_event.set()
        return True


def follow_events(job: Job, poll_timeout: float = 0.25):
    """Yield each event once, then a terminal status event; blocks between
    events until the job finishes."""
    sent = 0
    while True:
        with job.cond:
            while sent >= len(job.events) and job.status == "running":
                job.cond.wait(timeout=poll_timeout)
            pending = job.events[sent:]
            status = job.status
        for event in pending:
            yield {"type": "progress", **event}
        sent += len(pending)
        if status != "running" and sent >= len(job.events):
            yield {"type": "status", "status": status, "error": job.error}
            return
