"""Semiconductor surface-screening capacitance model with electrostatic
distance-offset calibration and force-correction utilities."""

from .calibration import (
    CalibModel,
    FitResult,
    MeasurementPoint,
    MeasurementSeries,
    NoiseSpec,
    OffsetCalibrator,
    ParallelPlate,
    SpherePlate,
    fit_offset,
    generate_synthetic,
    max_capacitance_offset,
    model_capacitance,
    model_capacitance_parallel,
    model_capacitance_sphere,
)
from .core import (
    REDUCED_LENGTH_M,
    CapacitanceBreakdown,
    EquilibriumState,
    MaterialParams,
    PlateConfig,
    SIMaterial,
    capacitance_breakdown,
    capacitance_from_bending,
    depletion_depth,
    finite_difference_capacitance,
    reduce_units,
    series_capacitance,
    si_units,
    solve_equilibrium,
    surface_charge,
)
from .correction import (
    CorrectedPoint,
    CorrectionSpec,
    apply_correction_series,
    corrected_distance,
    force_correction,
)
from .errors import (
    ConvergenceError,
    CorrectionSeriesError,
    DepletionAssumptionError,
    FlatBandError,
    InvalidParameterError,
    LinearizationWarning,
    ModelError,
    ParseError,
    PFAInvalidError,
    ThroughContactError,
    UnphysicalGapError,
)
from .screening import (
    DEBYE_PRESETS,
    METAL_OFFSET_NM,
    DebyeInputs,
    debye_length,
    debye_offset,
    metal_offset,
)

__version__ = "0.1.0"
