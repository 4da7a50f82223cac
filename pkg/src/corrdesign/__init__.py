"""Optimal designs for comparing two regression curves with errors correlated
within and between groups."""

__version__ = "0.1.0"

from .blue import (
    BlueCovariance,
    InformationMatrix,
    NumericalError,
    blue_cov,
    blue_cov_a0,
    blue_estimate_path,
    info_matrix,
    loewner_gap,
    marginal_cov,
)
from .design import CriterionConfig, DesignProblem, PsoConfig, h_function, optimize_design, phi_p, uniform_design
from .discrete import (
    Design,
    WeightMatrices,
    b_matrices,
    estimate,
    estimator_cov,
    mse_vs_blue,
    optimal_weights,
    unbiasedness_residual,
)
from .kernel import GroupCovariance, TriangularKernel, brownian_gram, cross_correlation, sigma_sqrt, to_brownian
from .model import (
    F_A,
    F_B,
    F_C,
    CompositeModel,
    CurveBasis,
    ModelError,
    build_general,
    build_separate,
    build_shared,
    difference_contrast,
)
from .simulate import BandResult, confidence_band, critical_value, sample_observations
