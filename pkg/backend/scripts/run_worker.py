#!/usr/bin/env python3
"""Background run worker: one daemon thread per service process.

Loop: reap stale jobs, claim the next queued job, run it in a subprocess
(``run_runner.py``), capture its stdout as the job log, then either requeue
(attempts remaining) or move the job to a terminal state.

Guarded by ``RUN_WORKER_ENABLED``. A compression run can take a long time;
``RUN_JOB_TIMEOUT_SEC`` bounds it, and ``reap_stale`` picks up anything left
running when the process restarts.
"""

from __future__ import annotations

import json
import os
import socket
import subprocess
import sys
import threading
import time

_SCRIPTS_DIR = os.path.dirname(os.path.abspath(__file__))
_BACKEND_DIR = os.path.dirname(_SCRIPTS_DIR)
for _p in (_BACKEND_DIR, _SCRIPTS_DIR):
    if _p not in sys.path:
        sys.path.append(_p)

try:
    from config import (  # type: ignore
        RUN_JOB_TIMEOUT_SEC,
        RUN_MAX_LOG_CHARS,
        RUN_QUEUE_POLL_SEC,
        RUN_WORKER_ENABLED,
    )
except Exception:
    RUN_WORKER_ENABLED = True
    RUN_QUEUE_POLL_SEC = 2
    RUN_JOB_TIMEOUT_SEC = 3600
    RUN_MAX_LOG_CHARS = 200_000

try:
    import run_queue as queue  # type: ignore
except Exception:  # pragma: no cover
    from scripts import run_queue as queue  # type: ignore

_RUNNER = os.path.join(_SCRIPTS_DIR, "run_runner.py")
_WORKER_ID = f"{socket.gethostname()}:{os.getpid()}"
_started = False
_started_lock = threading.Lock()
_LOG_FLUSH_SEC = 3.0


def _parse_result(stdout: str) -> dict:
    """Pull the last ``RESULT_JSON:{...}`` line out of the runner output."""
    for line in reversed((stdout or "").splitlines()):
        line = line.strip()
        if line.startswith("RESULT_JSON:"):
            try:
                return json.loads(line[len("RESULT_JSON:"):])
            except Exception:
                return {}
    return {}


def _run_job(job: dict, timeout: float | None = None) -> dict:
    job_id = job["job_id"]
    env = os.environ.copy()
    env["PYTHONIOENCODING"] = "utf-8"
    env["PYTHONUNBUFFERED"] = "1"
    # Runner must see the same job store as this process.
    env["FRACTURE_RUNS_DIR"] = str(queue.root())
    timeout = float(timeout if timeout is not None else RUN_JOB_TIMEOUT_SEC)

    proc = subprocess.Popen(
        [sys.executable, _RUNNER, job_id],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
        encoding="utf-8",
        errors="replace",
        cwd=_BACKEND_DIR,
        env=env,
        bufsize=1,
    )

    lines: list = []
    lines_lock = threading.Lock()

    def _reader():
        try:
            for line in proc.stdout:  # type: ignore[union-attr]
                with lines_lock:
                    lines.append(line)
        except Exception:
            pass

    reader = threading.Thread(target=_reader, name=f"run-log-{job_id[:8]}", daemon=True)
    reader.start()

    def _current_logs() -> str:
        with lines_lock:
            text = "".join(lines)
        return text[-RUN_MAX_LOG_CHARS:]

    start = time.time()
    last_flush = 0.0
    timed_out = False
    while True:
        finished = proc.poll() is not None and not reader.is_alive()
        now = time.time()
        if not finished and now - start > timeout:
            timed_out = True
            try:
                proc.kill()
            except Exception:
                pass
            break
        if now - last_flush >= _LOG_FLUSH_SEC:
            last_flush = now
            if not queue.set_progress(job_id, _current_logs()):
                try:
                    proc.kill()
                except Exception:
                    pass
                print(f"[run-worker] job {job_id} no longer running, stopped subprocess", flush=True)
                return {"ok": False, "error": "cancelled"}
        if finished:
            break
        time.sleep(0.2)

    reader.join(timeout=2)
    logs = _current_logs()
    if timed_out:
        logs += f"\n💥 Runner timed out after {timeout:g}s"
        result = {"ok": False, "summary": None, "error": "timeout"}
    else:
        result = _parse_result(logs) or {"ok": False, "summary": None, "error": "runner exited without a result"}

    error = result.get("error")
    if result.get("ok"):
        queue.complete(job_id, "done", summary=result.get("summary"), logs=logs, error=None)
        print(f"[run-worker] job {job_id} done", flush=True)
        return result

    current = queue.get_job(job_id) or job
    attempts = int(current.get("attempts", 0))
    max_attempts = int(current.get("max_attempts", 1))
    # Config errors are deterministic; retrying cannot help.
    retryable = result.get("exit_code") not in (2,)
    if retryable and attempts < max_attempts:
        queue.requeue(job_id, error=error, logs=logs)
        print(f"[run-worker] job {job_id} requeued ({attempts}/{max_attempts}): {error}", flush=True)
    else:
        queue.complete(job_id, "failed", logs=logs, error=error)
        print(f"[run-worker] job {job_id} FAILED after {attempts} attempt(s): {error}", flush=True)
    return result


def run_once(worker_id: str | None = None) -> dict | None:
    """Claim and run one queued job synchronously; None when the queue is empty."""
    job = queue.claim_next(worker_id or _WORKER_ID)
    if not job:
        return None
    print(f"[run-worker] claimed job {job['job_id']} ({job.get('label')})", flush=True)
    return _run_job(job)


def _loop() -> None:
    poll = max(1, int(RUN_QUEUE_POLL_SEC))
    print(f"[run-worker] started ({_WORKER_ID}), polling every {poll}s", flush=True)
    while True:
        try:
            jobs = queue.list_jobs()
            queue.reap_stale(RUN_JOB_TIMEOUT_SEC + 60, jobs=jobs)
            job = queue.claim_next(_WORKER_ID)
            if job:
                print(f"[run-worker] claimed job {job['job_id']} ({job.get('label')})", flush=True)
                _run_job(job)
                continue
        except Exception as exc:
            print(f"[run-worker] loop error: {exc}", flush=True)
        time.sleep(poll)


def start_worker(app=None) -> None:
    """Start the single background worker thread (idempotent)."""
    global _started
    if not RUN_WORKER_ENABLED:
        print("[run-worker] disabled via RUN_WORKER_ENABLED", flush=True)
        return
    with _started_lock:
        if _started:
            return
        _started = True
    t = threading.Thread(target=_loop, name="run-worker", daemon=True)
    t.start()
