"""Shared fixtures and the --runslow switch."""
import numpy as np
import pytest

from cife.core.types import Variant
from cife.data.generators import FactorizedTaskSpec, gen_factorized
from cife.models.networks import ModelSpec, build_model
from cife.probes.common import ProbeSettings


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance orderings (run with --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_task_spec():
    return FactorizedTaskSpec(
        num_classes=3, input_dim=6, class_dim=2, nuisance_dim=2, noise=0.2,
        n_source=48, n_target=40, n_test=24, seed=7,
    )


@pytest.fixture
def tiny_dataset(tiny_task_spec):
    return gen_factorized(tiny_task_spec)


@pytest.fixture
def tiny_model_spec():
    return ModelSpec(extractor_hidden=(8,), invariant_dim=4, specific_dim=3, head_hidden=5)


@pytest.fixture
def make_model(tiny_model_spec):
    """Factory for small models over the tiny task's widths."""
    def factory(variant=Variant.CIFE_DANN, input_dim=6, num_classes=3, seed=0):
        return build_model(variant, input_dim, num_classes, tiny_model_spec, seed=seed)
    return factory


@pytest.fixture
def fast_probe():
    return ProbeSettings(hidden=8, epochs=5, batch_size=16)
