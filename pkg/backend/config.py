#!/usr/bin/env python3
"""
Process configuration for the fracture simulator.

Settings are sourced from environment variables so the CLI, the run service
and the test suite can be tuned without touching code. A local `.env` file at
the repository root is loaded automatically when present (development
convenience). Per-run physics lives in RunConfig files, not here.
"""

from __future__ import annotations

import logging
import os
import sys
from pathlib import Path

from dotenv import load_dotenv


_BASE_DIR = Path(__file__).resolve().parent
_ENV_PATH = _BASE_DIR.parent / ".env"

load_dotenv(_ENV_PATH)

_TRUTHY = ("1", "true", "yes", "on")

# Log verbosity for the CLI, the runner subprocess and the web service.
LOG_LEVEL = (os.environ.get("FRACTURE_LOG_LEVEL") or "INFO").strip().upper()

# Threads used to evaluate interface forces in the solver. Output is
# bit-identical for any value; this only trades wall-clock for CPU.
SOLVER_WORKERS = max(1, int(os.environ.get("FRACTURE_WORKERS", "1")))

# Default output directory for `harness run` when --out is not given.
OUTPUT_DIR = (os.environ.get("FRACTURE_OUTPUT_DIR") or "runs").strip()

# Bundled RunConfig presets (tension, shear and compression parameter sets).
PRESETS_DIR = Path(
    os.environ.get("FRACTURE_PRESETS_DIR") or (_BASE_DIR / "scripts" / "presets")
)

# Run service job store. One directory per job: job.json, config.cfg, output/.
RUNS_DIR = Path(os.environ.get("FRACTURE_RUNS_DIR") or (_BASE_DIR.parent / "service_runs"))

# Background run worker (one daemon thread per service process).
# RUN_QUEUE_POLL_SEC: poll interval while idle. RUN_JOB_TIMEOUT_SEC: a runner
# subprocess older than this is killed and the job retried or failed.
# RUN_MAX_ATTEMPTS: tries before a job is marked failed.
RUN_WORKER_ENABLED = os.environ.get("RUN_WORKER_ENABLED", "true").lower() in _TRUTHY
RUN_QUEUE_POLL_SEC = int(os.environ.get("RUN_QUEUE_POLL_SEC", "2"))
RUN_JOB_TIMEOUT_SEC = int(os.environ.get("RUN_JOB_TIMEOUT_SEC", "3600"))
RUN_MAX_ATTEMPTS = int(os.environ.get("RUN_MAX_ATTEMPTS", "1"))
# Keep the most recent runner output only; compression runs print a line per sample.
RUN_MAX_LOG_CHARS = int(os.environ.get("RUN_MAX_LOG_CHARS", "200000"))

# Long acceptance runs in the test suite (full compression specimen, 1e4-substep oracle).
RUN_SLOW_TESTS = os.environ.get("FRACTURE_RUN_SLOW", "").lower() in _TRUTHY


def configure_logging(level: str | None = None) -> None:
    """Attach one stdout handler to the package loggers.

    Entry points call this once; library modules only ever use
    ``logging.getLogger(__name__)``.
    """
    root = logging.getLogger()
    wanted = getattr(logging, (level or LOG_LEVEL), logging.INFO)
    if not any(getattr(h, "_fracture", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stdout)
        handler.setFormatter(logging.Formatter("[fracture] %(levelname)s %(asctime)s %(message)s"))
        handler._fracture = True  # type: ignore[attr-defined]
        root.addHandler(handler)
    root.setLevel(wanted)
