import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the reference oracles

from tss_lab.analysis import analyze_case
from tss_lab.config import bundled_scenarios


@pytest.fixture(scope="session")
def scenarios():
    return bundled_scenarios()


@pytest.fixture(scope="session")
def case_results(scenarios):
    """The six study cases, run once per session: verdicts plus index series."""
    return {cid: analyze_case(cid, sc) for cid, sc in sorted(scenarios.items())}
