"""Gunicorn settings for the run service.

Loaded via ``-c gunicorn.conf.py`` after ``--chdir backend`` (see render.yaml).
Keep this file in ``backend/`` so the chdir'd process always finds it.
"""

import os

# One worker: the run worker thread lives inside it, and a second process
# would start a second worker draining the same job store.
workers = 1
worker_class = "gthread"

# Requests only read job files; runs happen in runner subprocesses.
threads = int(os.environ.get("WEB_THREADS", "4"))

timeout = 120
graceful_timeout = 30
keepalive = 5


def on_starting(server):
    """Report the request concurrency and warn about competing run workers."""
    settings = server.cfg
    threaded = "gthread" in str(getattr(settings, "worker_class_str", "") or settings.worker_class)
    per_worker = settings.threads if threaded else 1
    print(
        f"🧵 run service: {settings.workers} worker(s) x {per_worker} thread(s)",
        flush=True,
    )
    if settings.workers != 1:
        print(f"⚠️ {settings.workers} gunicorn workers will each drain the job store", flush=True)
