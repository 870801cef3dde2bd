import math

import pytest

from singflow.config import build_experiment
from singflow.fields import FieldSpec
from singflow.singularity import build_profile


@pytest.fixture(scope="session")
def saddle_spec():
    return FieldSpec.linear_saddle(1.0, 1.0)


@pytest.fixture(scope="session")
def lorenz_spec():
    return FieldSpec.lorenz()


@pytest.fixture(scope="session")
def saddle_profile(saddle_spec):
    # the acceptance geometry: r = e^-2 with a widened chart ball
    return build_profile(saddle_spec, (0.1, -0.1), r=math.exp(-2), beta1=0.2)


@pytest.fixture(scope="session")
def lorenz_profile(lorenz_spec):
    return build_profile(lorenz_spec, (0.5, 0.5, 0.5))


@pytest.fixture(scope="session")
def saddle_config():
    return {
        "version": 1,
        "field": {"kind": "linear_saddle", "lambda_u": 1.0, "lambda_s": 1.0,
                  "integ_tol": 1e-10},
        "box": {"lo": [-0.25, -0.25], "hi": [0.25, 0.25]},
        "singularities": [{"seed": [0.05, -0.05], "r": math.exp(-2),
                           "beta1": 0.2, "n_max": 15}],
        "partition": {"L": 7.5, "beta": 0.02, "samples_per_layer": 128,
                      "regular_cover": "flowbox", "cover_samples": 3000,
                      "cover_cell_cap": 6000},
        "measure": {"orbit_count": 8, "horizon": 60, "burn_in": 6},
        "rng_seed": 42,
    }


@pytest.fixture(scope="session")
def saddle_exp(saddle_config):
    return build_experiment(saddle_config)


@pytest.fixture(scope="session")
def machinery_exp():
    """Small-L saddle fixture: cell radii representable at float scale.

    L here is deliberately below the honest tube constant, so only the
    partition geometry (separated sets, Voronoi assignment, diameters) is
    exercised, not the tube theorems.
    """
    cfg = {
        "version": 1,
        "field": {"kind": "linear_saddle", "integ_tol": 1e-10},
        "box": {"lo": [-0.25, -0.25], "hi": [0.25, 0.25]},
        "singularities": [{"seed": [0.05, -0.05], "r": math.exp(-2),
                           "beta1": 0.2, "n_max": 12}],
        "partition": {"L": 1.2, "beta": 0.04, "samples_per_layer": 256,
                      "regular_cover": "none"},
        "measure": {"orbit_count": 4, "horizon": 30, "burn_in": 3},
        "rng_seed": 7,
    }
    return build_experiment(cfg)
