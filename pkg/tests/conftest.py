import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qcontact.models import builtin

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

LAGRANGIAN_MODELS = ("e1", "rocket", "free2contact")
STRUCTURE_MODELS = ("contact-r3", "two-contact-r4", "standard-qcontact(1,2)",
                    "standard-qcontact(2,3)", "example-e1")


@pytest.fixture(scope="session")
def models():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = builtin(name)
        return cache[name]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def fixture_path(name):
    return os.path.join(FIXTURES, name)
