"""Forward probabilistic estimation of extreme offshore structural response.

Chain: storm-peak extraction -> semiparametric margins -> conditional
extremes dependence -> conditioned wave simulation -> Morison loading ->
importance-sampled response distributions -> storm/annual maxima, return
values and the conditional environment density -- plus IFORM environmental
contours and the overlap diagnostic used to judge them.
"""

from .condext import HtFit, JointDensityGrid, estimate_density_grid, fit_ht, simulate_joint
from .contours import (
    AggregateScore,
    ConditionalModel,
    Contour,
    ModelSpec,
    aggregate_score,
    enumerate_specs,
    fit_conditional_model,
    iform_contour,
    inverse_rosenblatt,
    model_zoo,
    rosenblatt,
    zeta_overlap,
)
from .data import (
    HindcastSeries,
    PeakExtractionConfig,
    StormPeakSample,
    extract_storm_peaks,
    load_hindcast,
    period_from_steepness,
    steepness_from_period,
)
from .errors import ConfigError, DataError, NumericalError, StormResponseError
from .marginal import (
    GpdFit,
    MarginalModel,
    ThresholdDiagnostics,
    fit_gpd,
    fit_marginal,
    from_laplace,
    marginal_cdf,
    marginal_quantile,
    threshold_diagnostics,
    to_laplace,
)
from .response import (
    CdeGrid,
    FragilityCurve,
    ResponseDistribution,
    StructureSpec,
    WaveConfig,
    WeightedResponseSample,
    annual_max_cdf,
    cde,
    exceedance_map,
    failure_probability,
    max_response_single_wave,
    morison_base_shear,
    response_cdf,
    return_value,
    simulate_response_sample,
    storm_max_cdf,
    structure_a,
    structure_b,
    structure_c,
)
from .waves import (
    Spectrum,
    WaveField,
    dispersion_wavenumber,
    frequency_grid,
    jonswap_spectrum,
    simulate_conditioned_wave,
    time_grid,
)

__version__ = "0.1.0"
