"""Continued-fraction digit engines and extreme-value experiments.

Three digit-generating dynamical systems (regular, nearest-integer, and
Hurwitz complex continued fractions) with exact-orbit arithmetic, their
invariant-measure machinery, and Monte Carlo verification of the digit
extreme-value limit laws.
"""

from .errors import (
    CfExtremesError,
    DualityViolation,
    EngineInvariantViolation,
    ExactZero,
    InsufficientMass,
    MissingConstants,
    OutsideDomain,
    PrecisionExhausted,
    ReconstructionDivergence,
    RegionViolation,
)
from .numerics import (
    AdaptiveComplex,
    AdaptiveReal,
    ComplexPartsSource,
    ComplexShiftedSource,
    ConstantSource,
    RandomStream,
    RationalSource,
    ShiftedSource,
    UniformBoxSource,
    UniformUnitSource,
    default_initial_bits,
    refine_and_agree,
    sample_uniform_box,
    sample_uniform_unit,
)
from .engines import (
    Family,
    GaussianInt,
    HccfExpansion,
    NicfExpansion,
    RcfExpansion,
    Status,
    convergents,
    expand,
    expansion_to_json,
    gauss_map,
    hurwitz_map,
    in_fundamental_square,
    naive_complex_trap,
    naive_region_contains,
    nearest_gaussian,
    nicf_map,
    reconstruct_check,
    reduce_to_domain,
)
from .measures import (
    CuspConstants,
    DensityGrid,
    DiskGeometry,
    HurwitzSample,
    RegionTag,
    TailCurve,
    bulk_sector_area,
    density_histogram,
    disk_geometry,
    empirical_hccf_tail,
    empirical_tail_curve,
    estimate_cusp_constants,
    exact_tail_curve,
    gauss_density,
    gauss_digit_tail,
    grid_l1_distance,
    nicf_density,
    nicf_digit_tail,
    region_classify,
    scaling_check,
    single_orbit_sample_hccf,
    sliver_sector_area,
    stationary_sample_hccf,
    symmetry_defect,
)
from .evt import (
    EvlReport,
    ExceedanceTable,
    MaximaSample,
    PoissonReport,
    RateProbe,
    ScalingFamily,
    StreamingExtremes,
    count_exceedances,
    frechet_limit,
    kth_max_duality_check,
    l_solver,
    maxima,
    poisson_pmf,
    rate_curve,
    run_evl_experiment,
    run_poisson_experiment,
    scaling_family,
)

__version__ = "0.1.0"
