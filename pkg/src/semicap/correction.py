"""Propagation of a distance offset into force-vs-distance comparisons.

An electrostatic calibration overstates the true gap by the offset, so a
force that scales locally as d^(-p) appears stronger than expected at the
calibrated distance. ``force_correction`` returns that fractional increase,
either to first order (p * offset / d) or as the exact power-law ratio.
Lengths are unit-agnostic as long as ``d`` and the offset share a unit.
"""

import math
import warnings
from dataclasses import dataclass

from .errors import (
    CorrectionSeriesError,
    InvalidParameterError,
    LinearizationWarning,
    UnphysicalGapError,
)

# Offset-to-distance ratio beyond which the first-order form is flagged.
LINEARIZATION_RATIO = 0.2


@dataclass(frozen=True)
class CorrectionSpec:
    """Local force power law (F proportional to d^-power_law) and total
    distance offset; positive offset means the true gap is smaller than the
    electrostatically calibrated one."""

    d_offset: float
    power_law: float = 4.0

    def __post_init__(self):
        _require_finite("d_offset", self.d_offset)
        _require_finite("power_law", self.power_law)
        if self.power_law <= 0:
            raise InvalidParameterError(f"power_law must be positive, got {self.power_law}")


def _require_finite(name, value):
    if not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value!r}")


def force_correction(d: float, spec: CorrectionSpec, mode: str = "linear") -> float:
    """Fractional force increase at calibrated distance d.

    Linear mode returns power_law * d_offset / d and warns when the offset
    is not small against d; exact mode returns the full power-law ratio
    (d / (d - d_offset))^power_law - 1.
    """
    _require_finite("d", d)
    if d <= 0:
        raise InvalidParameterError(f"distance must be positive, got {d}")
    if mode == "linear":
        if abs(spec.d_offset) / d > LINEARIZATION_RATIO:
            warnings.warn(
                f"offset/distance ratio {abs(spec.d_offset) / d:.3g} exceeds "
                f"{LINEARIZATION_RATIO}; first-order correction is unreliable, "
                "consider mode='exact'",
                LinearizationWarning,
                stacklevel=2,
            )
        return spec.power_law * spec.d_offset / d
    if mode == "exact":
        d_true = d - spec.d_offset
        if d_true <= 0:
            raise UnphysicalGapError(
                f"offset {spec.d_offset} leaves no positive true gap at d={d}"
            )
        return (d / d_true) ** spec.power_law - 1.0
    raise InvalidParameterError(f"mode must be 'linear' or 'exact', got {mode!r}")


def corrected_distance(d_electrostatic: float, d_offset: float) -> float:
    """True gap implied by an electrostatically calibrated distance."""
    _require_finite("d_electrostatic", d_electrostatic)
    _require_finite("d_offset", d_offset)
    if d_electrostatic <= d_offset:
        raise UnphysicalGapError(
            f"electrostatic distance {d_electrostatic} does not exceed offset {d_offset}"
        )
    return d_electrostatic - d_offset


@dataclass(frozen=True)
class CorrectedPoint:
    d_true: float
    force: float
    correction_frac: float


def apply_correction_series(series, spec: CorrectionSpec, mode: str = "linear"):
    """Correct a sequence of (calibrated distance, measured force) records.

    Forces pass through untouched; each output point carries the corrected
    distance and the fractional force correction. Row failures are collected
    and raised together as a CorrectionSeriesError with their indices.
    """
    out = []
    row_errors = []
    for i, (d, force) in enumerate(series):
        try:
            out.append(
                CorrectedPoint(
                    d_true=corrected_distance(d, spec.d_offset),
                    force=force,
                    correction_frac=force_correction(d, spec, mode=mode),
                )
            )
        except (InvalidParameterError, UnphysicalGapError) as exc:
            row_errors.append((i, exc))
    if row_errors:
        raise CorrectionSeriesError(row_errors)
    return out
