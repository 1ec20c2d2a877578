# pin small-matrix linear algebra to one BLAS thread before numpy loads;
# threaded OpenBLAS is ~10x slower on the 144x144 solves used everywhere
import os

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import numpy as np
import pytest

from trionw.params import ModelParams


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def b_crossing(params):
    from trionw.hamiltonian import find_crossing_field
    return find_crossing_field(params, ("T-1/2", "T-3/2"), (1.5, 5.0))


@pytest.fixture()
def rng():
    return np.random.default_rng(20260810)
