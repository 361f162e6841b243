#!/usr/bin/env python3
"""File-backed job store for the run service.

One directory per job under ``RUNS_DIR``::

    <job_id>/job.json     job record (below)
    <job_id>/config.cfg   the validated run configuration
    <job_id>/logs.txt     captured runner output
    <job_id>/output/      curve.csv, summary.txt, snapshots/

Job record shape::

    {
      job_id, label, experiment, config_digest,
      status: queued|running|done|failed,
      attempts, max_attempts,
      created_at, started_at, finished_at, worker_id,
      summary,   # RunSummary fields once done
      error,     # last error message (str|None)
    }

Records are rewritten whole through a temp file and ``os.replace`` so a
reader never sees a half-written job.
"""

from __future__ import annotations

import json
import os
import sys
import threading
import uuid
from datetime import datetime, timezone
from pathlib import Path

_SCRIPTS_DIR = os.path.dirname(os.path.abspath(__file__))
_BACKEND_DIR = os.path.dirname(_SCRIPTS_DIR)
for _p in (_BACKEND_DIR, _SCRIPTS_DIR):
    if _p not in sys.path:
        sys.path.append(_p)

try:
    from config import RUN_MAX_ATTEMPTS, RUN_MAX_LOG_CHARS, RUNS_DIR  # type: ignore
except Exception:  # pragma: no cover
    RUNS_DIR = Path(_BACKEND_DIR).parent / "service_runs"
    RUN_MAX_ATTEMPTS = 1
    RUN_MAX_LOG_CHARS = 200_000

_lock = threading.RLock()
_root_override: Path | None = None


def set_root(path: str | Path | None) -> None:
    """Point the store somewhere else (tests, one-off tools)."""
    global _root_override
    _root_override = Path(path) if path is not None else None


def root() -> Path:
    return _root_override or Path(RUNS_DIR)


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def _age_seconds(iso, now=None):
    """Seconds since an ISO-8601 timestamp, or None if it can't be parsed."""
    if not iso:
        return None
    try:
        ts = datetime.fromisoformat(str(iso).replace("Z", "+00:00")).timestamp()
    except Exception:
        return None
    return (now if now is not None else datetime.now(timezone.utc).timestamp()) - ts


def _valid_id(job_id) -> bool:
    return isinstance(job_id, str) and len(job_id) == 32 and all(c in "0123456789abcdef" for c in job_id)


def job_dir(job_id: str) -> Path:
    if not _valid_id(job_id):
        raise ValueError(f"bad job id {job_id!r}")
    return root() / job_id


def config_path(job_id: str) -> Path:
    return job_dir(job_id) / "config.cfg"


def output_dir(job_id: str) -> Path:
    return job_dir(job_id) / "output"


def _save(job: dict) -> None:
    path = job_dir(job["job_id"]) / "job.json"
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(job, indent=2, sort_keys=True), encoding="utf-8")
    os.replace(tmp, path)


def _save_logs(job_id: str, logs) -> None:
    try:
        (job_dir(job_id) / "logs.txt").write_text((logs or "")[-RUN_MAX_LOG_CHARS:], encoding="utf-8")
    except Exception:
        pass


def get_logs(job_id: str) -> str:
    try:
        return (job_dir(job_id) / "logs.txt").read_text(encoding="utf-8")
    except Exception:
        return ""


def enqueue(config_text: str, experiment: str, config_digest: str, label: str = "") -> dict:
    """Create a queued job for an already validated configuration."""
    job = {
        "job_id": uuid.uuid4().hex,
        "label": (label or "").strip() or experiment,
        "experiment": experiment,
        "config_digest": config_digest,
        "status": "queued",
        "attempts": 0,
        "max_attempts": int(RUN_MAX_ATTEMPTS),
        "created_at": _now_iso(),
        "started_at": None,
        "finished_at": None,
        "worker_id": None,
        "summary": None,
        "error": None,
    }
    with _lock:
        d = job_dir(job["job_id"])
        d.mkdir(parents=True, exist_ok=False)
        (d / "config.cfg").write_text(config_text, encoding="utf-8")
        _save(job)
    return job


def get_job(job_id: str):
    """One job record, or None."""
    try:
        return json.loads((job_dir(job_id) / "job.json").read_text(encoding="utf-8"))
    except Exception:
        return None


def list_jobs() -> list:
    """All jobs, oldest first."""
    base = root()
    if not base.is_dir():
        return []
    jobs = []
    for d in base.iterdir():
        if d.is_dir() and _valid_id(d.name):
            job = get_job(d.name)
            if job:
                jobs.append(job)
    jobs.sort(key=lambda j: (j.get("created_at") or "", j.get("job_id")))
    return jobs


def claim_next(worker_id: str, jobs=None):
    """Mark the oldest queued job running for this worker and return it, or None."""
    with _lock:
        jobs = jobs if jobs is not None else list_jobs()
        for job in jobs:
            if job.get("status") != "queued":
                continue
            job["status"] = "running"
            job["worker_id"] = worker_id
            job["started_at"] = _now_iso()
            job["attempts"] = int(job.get("attempts", 0)) + 1
            _save(job)
            return job
    return None


def complete(job_id: str, status: str, summary=None, logs=None, error=None):
    with _lock:
        job = get_job(job_id)
        if not job:
            return None
        job["status"] = status
        job["finished_at"] = _now_iso()
        job["summary"] = summary
        job["error"] = error
        _save(job)
    if logs is not None:
        _save_logs(job_id, logs)
    return job


def requeue(job_id: str, error=None, logs=None):
    with _lock:
        job = get_job(job_id)
        if not job:
            return None
        job["status"] = "queued"
        job["worker_id"] = None
        job["started_at"] = None
        job["error"] = error
        _save(job)
    if logs is not None:
        _save_logs(job_id, logs)
    return job


def set_progress(job_id: str, logs) -> bool:
    """Store partial logs; False if the job is no longer running."""
    job = get_job(job_id)
    if not job or job.get("status") != "running":
        return False
    _save_logs(job_id, logs)
    return True


def reap_stale(timeout_sec: float, jobs=None) -> int:
    """Requeue (or fail) jobs left running longer than the timeout; returns the count."""
    count = 0
    now = datetime.now(timezone.utc).timestamp()
    with _lock:
        for job in jobs if jobs is not None else list_jobs():
            if job.get("status") != "running":
                continue
            age = _age_seconds(job.get("started_at"), now)
            if age is None or age <= timeout_sec:
                continue
            count += 1
            if int(job.get("attempts", 0)) < int(job.get("max_attempts", 1)):
                requeue(job["job_id"], error="stale: worker stopped responding")
            else:
                complete(job["job_id"], "failed", error="stale: worker stopped responding")
    return count
