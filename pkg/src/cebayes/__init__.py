"""Bayesian state and parameter estimation with conditional expectation as
the computational primitive: linear (Gauss-Markov-Kalman, ensemble) and
nonlinear (polynomial Galerkin) filters acting directly on random variables
represented as sample ensembles or polynomial chaos expansions."""

__version__ = "0.1.0"

from .condexp import (
    GramMatrix,
    ObsBasis,
    OptimalMap,
    build_obs_basis,
    evaluate_map,
    galerkin_solve,
    gram,
    mmse_residual,
)
from .filters import (
    AssimilationStep,
    KalmanGain,
    UpdateReport,
    UpdateScheme,
    assimilate_sequence,
    covariance_match_update,
    enkf_update,
    fit_posterior_covariance,
    gmkf_update,
    kalman_gain,
    mean_correct_update,
    polynomial_filter_update,
    variance_scaled_update,
)
from .models import (
    CubicToyModel,
    LinearGaussianModel,
    Lorenz84Model,
    Lorenz84ParamFModel,
    Lorenz84Params,
    Model,
    TwinRun,
    cubic_observe,
    exact_kalman_step,
    lorenz84_rhs,
    make_twin_experiment,
    rk4_step,
)
from .pce import (
    MultiIndexSet,
    QuadratureGrid,
    eval_basis,
    eval_basis_matrix,
    evaluate_pce,
    gauss_grid,
    multi_index_set,
    project,
    project_regression,
)
from .rv import (
    EnsembleRV,
    GermSpec,
    MomentSummary,
    PCERV,
    covariance,
    cross_covariance,
    kde_pdf,
    mean,
    quantiles,
    sample_pce,
    total_variance,
)
from .seeding import STREAM_LABELS, stream_rng

__all__ = [name for name in dir() if not name.startswith("_")]
