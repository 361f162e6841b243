"""Code revision stamped into run summaries and the service health route."""

from __future__ import annotations

import functools
import os
import subprocess
from pathlib import Path

_CHECKOUT = Path(__file__).resolve().parents[2]
_COMMIT_VARS = ("FRACTURE_GIT_COMMIT", "RENDER_GIT_COMMIT", "GIT_COMMIT")
_BRANCH_VARS = ("RENDER_GIT_BRANCH", "GIT_BRANCH")


def _first_env(names: tuple[str, ...]) -> str:
    for name in names:
        value = (os.environ.get(name) or "").strip()
        if value:
            return value
    return ""


def _rev_parse(*args: str) -> str:
    """Ask git about the checkout; empty when git is missing or fails."""
    try:
        proc = subprocess.run(
            ["git", "rev-parse", *args],
            cwd=_CHECKOUT, capture_output=True, text=True, timeout=2,
        )
    except (OSError, subprocess.SubprocessError):
        return ""
    return proc.stdout.strip() if proc.returncode == 0 else ""


@functools.lru_cache(maxsize=1)
def _lookup() -> tuple[tuple[str, str], ...]:
    commit = _first_env(_COMMIT_VARS)
    source = "env" if commit else "git"
    commit = commit or _rev_parse("HEAD")
    if not commit:
        source = "unknown"
    branch = _first_env(_BRANCH_VARS) or (_rev_parse("--abbrev-ref", "HEAD") if commit else "")

    short = commit[:7]
    if not short:
        label = "unknown"
    elif branch and branch != "HEAD":
        label = f"{short} ({branch})"
    else:
        label = short
    return (
        ("commit", commit),
        ("commit_short", short),
        ("branch", branch),
        ("source", source),
        ("label", label),
    )


def get_build_info() -> dict:
    """Commit, branch and a short label; env vars win over a local checkout."""
    return dict(_lookup())
