"""Online sparse estimation by adaptive projections onto hyperslabs and
weighted l1 balls, with sparse-LMS baselines and an experiment harness.

Set ``APWL1_DISABLE_NUMBA=1`` before import to run the pure-numpy kernels.
"""
from ._kernels import BACKEND
from .baselines import LmsConfig, lasso_solve, lms_run, rzalms_step, zalms_step
from .datagen import ScenarioSpec, gen_sparse_vector, gen_timevarying_truth, make_stream
from .filter import FilterConfig, FilterState, init, run, step
from .projections import (
    Hyperslab,
    ProjectionError,
    WeightedL1Ball,
    ball_contains,
    distance_to_hyperslab,
    project_hyperslab,
    project_weighted_l1_ball,
)

__version__ = "0.1.0"
