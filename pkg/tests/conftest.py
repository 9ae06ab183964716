import numpy as np
import pytest
from hypothesis import strategies as st

from quadrature import QuadraturePlan
from spd_core import validate_spd
from util import resolve_path

seeds = st.integers(min_value=0, max_value=2**63 - 1)


@pytest.fixture
def plan():
    return QuadraturePlan()


@pytest.fixture
def lenient_plan():
    return QuadraturePlan(strict=False)


@pytest.fixture
def diag():
    def make(*values):
        return validate_spd(np.diag(np.asarray(values, dtype=float)))
    return make


@pytest.fixture
def scalar():
    def make(value):
        return validate_spd(np.array([[float(value)]]))
    return make


@pytest.fixture
def config_path():
    return resolve_path("config.env")


@pytest.fixture
def sample_path():
    def make(name):
        return resolve_path("static_data", name)
    return make
