"""Firm-level electricity consumption regime analysis.

The package turns daily kWh readings into year-over-year deviation
series, fits a two-regime Gaussian hidden Markov model to each firm,
and aggregates the filtered recession probabilities into
consumption-weighted indexes.
"""

from .ecu import (
    EcuSeries,
    FirmDay,
    FirmDayPanel,
    SrpiSeries,
    ZeroWeightError,
    ecu_at,
    ecu_grouped,
    srpi,
)
from .hmm import (
    PROSPEROUS,
    RECESSIONARY,
    FilterDegeneracyError,
    FilterOutput,
    FitReport,
    RegimeModel,
    RegimeParams,
    em_fit,
    forward_filter,
    init_params,
    label_regimes,
    sample_path,
)
from .preprocess import (
    AlignedPair,
    CleanSeries,
    DeviationSeries,
    RawSeries,
    align,
    detect_outliers,
    deviation,
    interpolate,
    smooth,
)
from .simgen import PanelConfig, SyntheticPanel, generate, truth_labels

__version__ = "0.1.0"

__all__ = [
    "AlignedPair",
    "CleanSeries",
    "DeviationSeries",
    "EcuSeries",
    "FilterDegeneracyError",
    "FilterOutput",
    "FirmDay",
    "FirmDayPanel",
    "FitReport",
    "PROSPEROUS",
    "PanelConfig",
    "RECESSIONARY",
    "RawSeries",
    "RegimeModel",
    "RegimeParams",
    "SrpiSeries",
    "SyntheticPanel",
    "ZeroWeightError",
    "align",
    "detect_outliers",
    "deviation",
    "ecu_at",
    "ecu_grouped",
    "em_fit",
    "forward_filter",
    "generate",
    "init_params",
    "interpolate",
    "label_regimes",
    "sample_path",
    "smooth",
    "srpi",
    "truth_labels",
]
