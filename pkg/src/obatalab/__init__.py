"""Spectral-gap stability toolkit for one-dimensional weighted intervals.

Modules:
  measures      grids, CD(K,N) densities, distortion coefficients, checkers
  isoperimetry  diameter-constrained model profiles and comparison constants
  spectral      Neumann eigenproblems, Green operator, cosine decomposition
  obata1d       deficit/distance and diameter/deficit experiment sweeps
  localization  discrete ray-family pipeline up to the final assembly
  plotting      deterministic SVG rendering of sweep tables
  cli           batch front-end (entry point: obatalab)
"""

__version__ = "0.1.0"

from .errors import (
    ConditioningError,
    ConfigError,
    DegenerateDensityError,
    DisconnectedSupportError,
    NonCDInputError,
    NormalizationError,
    ObataLabError,
    ParameterDomainError,
    UndefinedQuotientError,
)
from .measures import (
    CoefficientQuery,
    Grid,
    WeightedInterval,
    cd_check,
    cd_check_differential,
    envelope_check,
    generate_cd_density,
    integrate,
    load_density_csv,
    model_density,
    omega,
    sigma_coeff,
    tau_coeff,
)
from .isoperimetry import (
    ProfileQuery,
    asymptotic_constant,
    bbg_constant,
    bbg_ratio_check,
    g_eval,
    profile,
    profile_ode_residual,
    solve_R,
)
from .spectral import (
    bochner_check,
    cosine_decompose,
    deficit,
    green_apply,
    lichnerowicz_check,
    neumann_eigs,
    poincare_check,
    rayleigh,
)
from .obata1d import (
    ExperimentSpec,
    FitResult,
    deficit_distance_sweep,
    diameter_deficit_sweep,
    eigen_comparison_check,
    loglog_fit,
    upper_gap_check,
)
from .localization import (
    DeficitLedger,
    Ray,
    RayFamily,
    SuspensionGeometry,
    assemble_main,
    bad_set_energy,
    global_deficit,
    load_family,
    long_mass_bound,
    normalize,
    per_ray_cosine,
    pole_concentration,
    select_long_rays,
    variance_bound,
    volume_control,
)
from .plotting import render_plot
