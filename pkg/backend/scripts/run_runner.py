#!/usr/bin/env python3
"""Run one queued experiment in its own process.

Run as: ``python run_runner.py <job_id>``

Everything the run prints becomes the job log. The final stdout line is
always::

    RESULT_JSON:{"ok": bool, "summary": {...}|null, "error": str|null, "exit_code": int}

so the worker can read the outcome however much the run printed before it.
"""

from __future__ import annotations

import json
import os
import sys
import traceback
from dataclasses import asdict

_SCRIPTS_DIR = os.path.dirname(os.path.abspath(__file__))
_BACKEND_DIR = os.path.dirname(_SCRIPTS_DIR)
for _p in (_BACKEND_DIR, _SCRIPTS_DIR):
    if _p not in sys.path:
        sys.path.append(_p)


def _emit(result: dict) -> None:
    print("RESULT_JSON:" + json.dumps(result), flush=True)


def main(argv) -> int:
    if len(argv) < 2:
        _emit({"ok": False, "summary": None, "error": "missing job_id", "exit_code": 2})
        return 2
    job_id = argv[1]

    try:
        import harness  # type: ignore
        import run_config  # type: ignore
        import run_queue as queue  # type: ignore
        from config import configure_logging  # type: ignore
    except Exception:
        from scripts import harness, run_config  # type: ignore
        from scripts import run_queue as queue  # type: ignore
        from config import configure_logging  # type: ignore

    configure_logging()
    job = queue.get_job(job_id)
    if not job:
        _emit({"ok": False, "summary": None, "error": f"job {job_id} not found", "exit_code": 2})
        return 2
    print(f"▶️ Running job {job_id} ({job.get('label')}) attempt {job.get('attempts')}", flush=True)

    try:
        cfg = run_config.parse_config(queue.config_path(job_id))
    except run_config.ConfigError as exc:
        _emit({"ok": False, "summary": None, "error": str(exc), "exit_code": harness.EXIT_CONFIG})
        return harness.EXIT_CONFIG

    try:
        summary = harness.run(cfg, queue.output_dir(job_id))
    except harness.NUMERICAL_ERRORS as exc:
        print(f"💥 {exc}", flush=True)
        _emit({"ok": False, "summary": None, "error": str(exc), "exit_code": harness.EXIT_NUMERICAL})
        return harness.EXIT_NUMERICAL
    except Exception as exc:
        traceback.print_exc()
        _emit({"ok": False, "summary": None, "error": f"{type(exc).__name__}: {exc}", "exit_code": 1})
        return 1

    print(f"✅ peak {summary.peak_stress:.6g} Pa, {summary.broken_interfaces} broken", flush=True)
    _emit({"ok": True, "summary": asdict(summary), "error": None, "exit_code": 0})
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv))
