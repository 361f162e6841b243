import os
import sys

import pytest

# The service worker must not start while the app module is imported in tests.
os.environ.setdefault("RUN_WORKER_ENABLED", "false")

_BACKEND_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
_SCRIPTS_DIR = os.path.join(_BACKEND_DIR, "scripts")
for _p in (_BACKEND_DIR, _SCRIPTS_DIR):
    if _p not in sys.path:
        sys.path.append(_p)

from config import RUN_SLOW_TESTS  # noqa: E402
from fracture.constitutive import GOSFORD_SANDSTONE, TRANSJURANE_SANDSTONE  # noqa: E402


def pytest_collection_modifyitems(config, items):
    if RUN_SLOW_TESTS:
        return
    skip = pytest.mark.skip(reason="slow; set FRACTURE_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def transjurane():
    return TRANSJURANE_SANDSTONE


@pytest.fixture
def gosford():
    return GOSFORD_SANDSTONE


@pytest.fixture
def job_store(tmp_path):
    import run_queue

    run_queue.set_root(tmp_path / "service_runs")
    yield run_queue
    run_queue.set_root(None)
