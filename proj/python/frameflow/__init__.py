"""Frame-bundle SDE schemes, convergence ladders and Brownian motion on the sphere."""

from ._core import (
    FrameflowError,
    InvalidArgument,
    coupled_strong_error,
    develop,
    fit_order,
    gbm_weak_error,
    increments,
    problem_names,
    scheme_names,
    selftest,
    simulate,
    sphere_path,
    wasserstein2_1d,
)

__all__ = [
    "FrameflowError",
    "InvalidArgument",
    "coupled_strong_error",
    "develop",
    "fit_order",
    "gbm_weak_error",
    "increments",
    "problem_names",
    "scheme_names",
    "selftest",
    "simulate",
    "sphere_path",
    "wasserstein2_1d",
]
