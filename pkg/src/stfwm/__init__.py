"""Seeded four-wave-mixing photon experiment: simulation and fourfold analysis."""

from .coinc import (
    ACC_BINS,
    CarResult,
    CoincConfig,
    FourfoldHistogram,
    brute_force_fourfolds,
    count_fourfolds,
    extract_car,
    plane_slice,
)
from .core import (
    AnalyticRates,
    FockState,
    GainParam,
    OverlapModel,
    analytic_acc_rate,
    analytic_cc_rate,
    bs_two_photon_split,
    cloning_fidelity,
    evolve_first_order,
    pair_gen_enhancement,
    predicted_car,
)
from .fitkit import (
    BaselineFit,
    DelayScanPoint,
    GaussianFit,
    confidence_band,
    fit_baseline,
    fit_delay_scan,
    r_prime,
)
from .tagsim import (
    DetectorConfig,
    PulseTrainConfig,
    SourceConfig,
    expected_singles_rate,
    simulate,
)
from .ttfio import (
    ConfigError,
    FormatError,
    RunConfig,
    load_run_config,
    parse_run_config,
    read_csv_tags,
    read_tags,
    read_tt4f,
    write_csv_tags,
    write_tt4f,
)

__version__ = "0.1.0"
