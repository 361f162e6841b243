"""Repo-root entry for ``gunicorn -c gunicorn.conf.py``; settings live in backend/."""

import os
import runpy

_SETTINGS = os.path.join(os.path.dirname(os.path.abspath(__file__)), "backend", "gunicorn.conf.py")

# Re-export public settings so a start command without --chdir gets the same
# single-worker layout the run service needs.
globals().update({k: v for k, v in runpy.run_path(_SETTINGS).items() if not k.startswith("_")})
