import numpy as np
import pytest

from lbirl.env import LoadBalanceEnv
from lbirl.kpi import KpiConfig
from lbirl.simnet import SimParams
from lbirl.topology import TopologyConfig, build_topology
from lbirl.traffic import TrafficScenario, scenario_preset


def tiny_scenario(sid: int = 1, **kw) -> TrafficScenario:
    """Small UE population for fast unit tests; same texture as the presets."""
    base = dict(ue_count=80, packet_mean_bits=32e6, packet_sigma=0.6,
                request_interval_s=40.0)
    base.update(kw)
    return TrafficScenario(id=sid, **base)


@pytest.fixture(scope="session")
def topo():
    return build_topology()


@pytest.fixture(scope="session")
def kpi_cfg():
    return KpiConfig()


@pytest.fixture()
def tiny_env():
    return LoadBalanceEnv(tiny_scenario())


def make_tiny_env(sid: int = 1, **kw) -> LoadBalanceEnv:
    return LoadBalanceEnv(tiny_scenario(sid, **kw))
