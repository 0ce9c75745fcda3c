"""File formats: measurement CSV, force-series CSV and the JSON fit report.

Files are UTF-8 with '#'-prefixed comment lines ignored on ingest. Lengths
are in nm and capacitances in pF on disk; the in-memory calibration objects
use SI units (m, F). All emitted numerics carry 12 significant digits and
no timestamps, so identical inputs produce byte-identical files.
"""

import json
import math
from pathlib import Path

import numpy as np

from .calibration import (
    CalibModel,
    FitResult,
    MeasurementPoint,
    MeasurementSeries,
    model_capacitance,
)
from .errors import ParseError

NM = 1e-9
PF = 1e-12

MEASUREMENT_COLUMNS = ("stage_nm", "capacitance_pF", "sigma_pF", "contact")
SERIES_COLUMNS = ("d_nm", "force_arb", "correction_frac")


def fmt(x) -> str:
    """Render a number with 12 significant digits."""
    return f"{x:.12g}"


def _round12(value):
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return float(fmt(value)) if math.isfinite(value) else value
    if isinstance(value, dict):
        return {k: _round12(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round12(v) for v in value]
    return value


def _data_lines(path):
    """Yield (line_number, stripped_text) for non-comment, non-blank lines."""
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def _parse_float(token, name, lineno):
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"could not parse {name} from {token!r}", line=lineno) from None
    return value


def read_measurement_csv(path, geometry, metadata=None) -> MeasurementSeries:
    """Read a stage/capacitance series.

    Expected header: ``stage_nm,capacitance_pF`` optionally followed by
    ``sigma_pF`` and/or a ``contact`` flag column (1 marks the electrically
    detected contact point).
    """
    lines = _data_lines(path)
    try:
        header_line, header = next(lines)
    except StopIteration:
        raise ParseError(f"{path}: no header row found") from None

    names = [t.strip() for t in header.split(",")]
    if names[:2] != ["stage_nm", "capacitance_pF"]:
        raise ParseError(
            "header must start with 'stage_nm,capacitance_pF', got "
            f"{header!r}",
            line=header_line,
        )
    extras = names[2:]
    if any(name not in ("sigma_pF", "contact") for name in extras) or len(extras) != len(
        set(extras)
    ):
        raise ParseError(
            f"unexpected columns {extras!r}; allowed extras are 'sigma_pF' and 'contact'",
            line=header_line,
        )
    col = {name: i for i, name in enumerate(names)}

    points = []
    for lineno, line in lines:
        tokens = [t.strip() for t in line.split(",")]
        if len(tokens) != len(names):
            raise ParseError(
                f"expected {len(names)} fields, got {len(tokens)}", line=lineno
            )
        stage = _parse_float(tokens[col["stage_nm"]], "stage_nm", lineno)
        cap = _parse_float(tokens[col["capacitance_pF"]], "capacitance_pF", lineno)
        sigma = None
        if "sigma_pF" in col:
            sigma = _parse_float(tokens[col["sigma_pF"]], "sigma_pF", lineno) * PF
        is_contact = False
        if "contact" in col:
            flag = tokens[col["contact"]]
            if flag not in ("0", "1", ""):
                raise ParseError(f"contact flag must be 0 or 1, got {flag!r}", line=lineno)
            is_contact = flag == "1"
        points.append(
            MeasurementPoint(
                stage_position=stage * NM,
                capacitance=cap * PF,
                sigma=sigma,
                is_contact=is_contact,
            )
        )
    if not points:
        raise ParseError(f"{path}: no data rows found")
    return MeasurementSeries(points=points, geometry=geometry, metadata=dict(metadata or {}))


def measurement_csv_text(series: MeasurementSeries) -> str:
    """Serialize a series back to the measurement CSV schema."""
    with_sigma = series.points[0].sigma is not None
    with_contact = any(p.is_contact for p in series.points)

    lines = [f"# {key}: {series.metadata[key]}" for key in sorted(series.metadata)]
    header = ["stage_nm", "capacitance_pF"]
    if with_sigma:
        header.append("sigma_pF")
    if with_contact:
        header.append("contact")
    lines.append(",".join(header))
    for p in series.points:
        row = [fmt(p.stage_position / NM), fmt(p.capacitance / PF)]
        if with_sigma:
            row.append(fmt(p.sigma / PF))
        if with_contact:
            row.append("1" if p.is_contact else "0")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_measurement_csv(series: MeasurementSeries, path):
    Path(path).write_text(measurement_csv_text(series), encoding="utf-8")


def fit_report_dict(result: FitResult) -> dict:
    """JSON-ready fit report.

    The model and covariance are expressed in file units (nm, pF); the
    covariance rows/columns follow ``metadata['free_parameters']``.
    """
    unit = {"d_contact": NM, "b": NM, "scale": 1.0, "c_stray": PF}
    scale = np.array([unit[name] for name in result.free_parameters])
    cov = result.covariance / np.outer(scale, scale)

    metadata = dict(result.metadata)
    metadata["free_parameters"] = list(result.free_parameters)
    for key in ("roughness_correction", "offset_roughness_corrected"):
        if key in metadata:
            metadata[key + "_nm"] = metadata.pop(key) / NM

    report = {
        "model": {
            "d_contact_nm": result.model.d_contact / NM,
            "b_nm": result.model.b / NM,
            "scale": result.model.scale,
            "c_stray_pF": result.model.c_stray / PF,
        },
        "covariance": cov.tolist(),
        "rms_residual": result.rms_residual / PF,
        "converged": result.converged,
        "n_iterations": result.n_iterations,
        "warnings": list(result.warnings),
        "metadata": metadata,
    }
    return _round12(report)


def fit_report_text(result: FitResult) -> str:
    return json.dumps(fit_report_dict(result), indent=2) + "\n"


def write_fit_report(result: FitResult, path):
    Path(path).write_text(fit_report_text(result), encoding="utf-8")


def residuals_csv_text(series: MeasurementSeries, model: CalibModel) -> str:
    """Per-point residual table for a fitted model, in file units."""
    lines = ["stage_nm,capacitance_pF,model_pF,residual_pF"]
    for p in series.points:
        c_model = model_capacitance(p.stage_position, model, series.geometry)
        lines.append(
            ",".join(
                [
                    fmt(p.stage_position / NM),
                    fmt(p.capacitance / PF),
                    fmt(c_model / PF),
                    fmt((p.capacitance - c_model) / PF),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def read_force_series_csv(path):
    """Read (d_nm, force_arb) rows; a trailing correction_frac column is ignored."""
    lines = _data_lines(path)
    try:
        header_line, header = next(lines)
    except StopIteration:
        raise ParseError(f"{path}: no header row found") from None
    names = [t.strip() for t in header.split(",")]
    if names[:2] != ["d_nm", "force_arb"] or any(
        n not in SERIES_COLUMNS for n in names
    ):
        raise ParseError(
            f"header must be 'd_nm,force_arb[,correction_frac]', got {header!r}",
            line=header_line,
        )
    rows = []
    for lineno, line in lines:
        tokens = [t.strip() for t in line.split(",")]
        if len(tokens) != len(names):
            raise ParseError(f"expected {len(names)} fields, got {len(tokens)}", line=lineno)
        d = _parse_float(tokens[0], "d_nm", lineno)
        force = _parse_float(tokens[1], "force_arb", lineno)
        rows.append((d, force))
    return rows


def corrected_series_csv_text(points) -> str:
    """Serialize corrected points as d_nm,force_arb,correction_frac rows."""
    lines = [",".join(SERIES_COLUMNS)]
    for p in points:
        lines.append(",".join([fmt(p.d_true), fmt(p.force), fmt(p.correction_frac)]))
    return "\n".join(lines) + "\n"
