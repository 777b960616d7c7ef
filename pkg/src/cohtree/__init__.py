"""Taxonomic trees over financial time series.

Distances between return series are measured two ways, by correlation
(``sqrt(2(1 - rho))``) and by spectral coherence
(``sqrt((1/2pi) integral(1 - C))``), per trading session and averaged over
the horizon; a minimum spanning tree over the averaged distances is the
resulting taxonomy, scored against sector/industry labels.
"""
from .errors import (
    CohtreeError,
    DegenerateInputError,
    EmptyResultError,
    InsufficientDataError,
    NumericalDegeneracyError,
    UsageError,
    ValidationError,
)
from .graph import (
    SECTOR_COLORS,
    SectorLabeling,
    TaxonomyTree,
    color_for_sector,
    export_tree,
    minimum_spanning_tree,
    read_labels_csv,
    sector_adjacency_score,
    sector_subtree_score,
    tree_from_export,
)
from .metrics import (
    DistanceMatrix,
    average_matrices,
    coherence_distance,
    coherence_distance_from_spectrum,
    correlation_distance,
    matrix_from_csv,
    matrix_from_json,
    matrix_to_csv,
    matrix_to_json,
    model_gain,
    pearson_correlation,
    residual_power_ratio,
    session_distance_matrix,
    triangle_violation,
)
from .pipeline import PipelineConfig, RunReport, run_pipeline
from .series import (
    PriceSeries,
    SessionCalendar,
    StandardizedReturns,
    align_and_fill,
    read_calendar_csv,
    read_prices_csv,
    segment_sessions,
    session_grid,
    standardize,
    to_log_returns,
)
from .spectral import (
    CoherenceSpectrum,
    CrossSpectrumEstimate,
    SpectralConfig,
    SpectrumEstimate,
    coherence,
    coherence_from_spectra,
    welch_csd,
    welch_psd,
)
from .synth import (
    GeneratorSpec,
    SyntheticMarket,
    ar1,
    delayed_copy,
    factor_market,
    white_noise,
    write_dataset,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
