"""Shared fixtures and small builders used across the test modules."""

from pathlib import Path

import pytest

from georep.bounds import ContainerId, Update

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

CID = ContainerId("usertable", "family")


def make_update(key="k", value=b"v", wall_ms=0, origin=1, seq=None,
                container=CID, block=None, _counter=[0]):
    """Update with a fresh (origin, seq) identity unless seq is pinned."""
    if seq is None:
        _counter[0] += 1
        seq = _counter[0]
    return Update(container=container, key=key, value=value, wall_ms=wall_ms,
                  origin=origin, seq=seq, block=block)


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR
