"""Pytest Configuration and Fixtures

Shared fixtures for all tests: the worked example instances, a private
metrics collector, and logging/settings isolation.
"""

from dataclasses import dataclass

import pytest
import structlog

from ccsim.config import get_settings
from ccsim.core.entities import PlacementState, RequestProfile, SystemParams
from ccsim.monitoring import MetricsCollector
from ccsim.services.delivery_service import DeliveryService
from ccsim.services.placement_service import place


@dataclass(frozen=True)
class Instance:
    """A network, a request profile over it and the coded placement"""

    params: SystemParams
    profile: RequestProfile
    placement: PlacementState


def make_instance(n_files: int, n_groups: int, alpha: int, requests) -> Instance:
    params = SystemParams(n_files=n_files, n_groups=n_groups, alpha=alpha)
    return Instance(
        params=params,
        profile=RequestProfile.of(n_files, requests),
        placement=place(params),
    )


@pytest.fixture(autouse=True)
def isolate_process_state():
    """Undo CLI logging configuration and cached settings after every test"""
    yield
    structlog.reset_defaults()
    get_settings.cache_clear()


@pytest.fixture
def metrics() -> MetricsCollector:
    """Fresh collector so counts start at zero"""
    return MetricsCollector()


@pytest.fixture
def delivery(metrics) -> DeliveryService:
    return DeliveryService(metrics=metrics)


# =============================================================================
# Worked Example Instances
# =============================================================================


@pytest.fixture
def type1_example() -> Instance:
    """N=3, M=3, alpha=2; group 2 asks for file 2 only"""
    return make_instance(3, 3, 2, [[1, 2], [2], [1, 2]])


@pytest.fixture
def type2_example() -> Instance:
    """N=4, M=3, alpha=2; Type-II pairing with three leftovers"""
    return make_instance(4, 3, 2, [[1, 2, 3], [2, 3], [1, 4]])


@pytest.fixture
def type3_example() -> Instance:
    """N=5, M=3, alpha=2; every cache keeps one shared fragment"""
    return make_instance(5, 3, 2, [[1, 2, 3], [2, 3, 4], [2, 3, 5]])


@pytest.fixture
def type4_example() -> Instance:
    """N=5, M=3, alpha=2; one request set, one packet-group, two leftovers"""
    return make_instance(5, 3, 2, [[1, 2, 4], [2, 3], [4, 5]])


@pytest.fixture
def last_stage_example() -> Instance:
    """N=3, M=3, alpha=2; nine fragments reach the last stage"""
    return make_instance(3, 3, 2, [[1, 2, 3], [2, 3], [1]])


@pytest.fixture
def packet_group_example() -> Instance:
    """N=6, M=4, alpha=3; no request set but one four-cache packet-group"""
    return make_instance(6, 4, 3, [[1, 2, 4], [3, 5, 6], [1, 2, 4], [3, 5, 6]])


@pytest.fixture
def request_set_example() -> Instance:
    """N=8, M=6, alpha=3; seven request sets"""
    return make_instance(8, 6, 3, [[1, 2, 3], [2, 4], [2, 3], [3, 5], [6, 7], [8]])


@pytest.fixture
def singleton_example() -> Instance:
    """N=4, M=5, alpha=2; single requests with file 1 asked twice"""
    return make_instance(4, 5, 2, [[1], [1], [2], [3], [4]])
