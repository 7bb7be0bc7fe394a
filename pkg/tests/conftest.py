import functools

import pytest

from ergomix.modelspace import default_measure_params
from ergomix.pushforward import calibrate_truncation
from ergomix.semigroups import make_instance

INSTANCE_NAMES = ["translation", "rudnicki_translation", "birth_death", "death_model", "black_scholes"]


@functools.lru_cache(maxsize=None)
def instance(name):
    return make_instance(name, {})


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return str(tmp_path_factory.mktemp("plan-cache"))


@pytest.fixture(scope="session")
def planned(cache_dir):
    """``planned(name, J)`` -> (system, calibrated params, plan), memoized per session."""
    memo = {}

    def get(name, J=40):
        if (name, J) not in memo:
            system = instance(name)
            params, plan = calibrate_truncation(system, default_measure_params(), J=J,
                                                cache_dir=cache_dir)
            memo[name, J] = (system, params, plan)
        return memo[name, J]

    return get
