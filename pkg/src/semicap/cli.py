"""Command-line frontend.

Subcommands: equilibrium, curve, debye, fit, synth, correct. Exit codes:
0 success, 1 runtime or convergence failure, 2 usage or validation error.
Failures emit a machine-readable error JSON on stderr. Outputs carry no
timestamps, so identical invocations (including seeds) produce byte
identical files.
"""

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as sio
from .calibration import (
    PARAM_NAMES,
    CalibModel,
    NoiseSpec,
    ParallelPlate,
    SpherePlate,
    fit_offset,
    generate_synthetic,
)
from .core import (
    MaterialParams,
    PlateConfig,
    SIMaterial,
    capacitance_from_bending,
    reduce_units,
    solve_equilibrium,
)
from .correction import CorrectionSpec, apply_correction_series
from .errors import (
    InvalidParameterError,
    ModelError,
    ParseError,
)
from .screening import DEBYE_PRESETS, DebyeInputs, debye_length, debye_offset

NM = sio.NM
PF = sio.PF
CM2 = 1e-4
CM = 1e-2

TOLERANCE_BOUNDS = (1e-15, 1e-3)


@dataclass
class RunConfig:
    material: MaterialParams | None
    plate: PlateConfig | None
    tolerances: dict
    presets: dict


def _config_dict(raw, key, required=True):
    section = raw.get(key)
    if section is None:
        if required:
            raise InvalidParameterError(f"config is missing the '{key}' section")
        return {}
    if not isinstance(section, dict):
        raise InvalidParameterError(f"config section '{key}' must be an object")
    return dict(section)


def _take(section, name, *, optional=False, section_name=""):
    if name not in section:
        if optional:
            return None
        raise InvalidParameterError(f"config {section_name} is missing field '{name}'")
    return section.pop(name)


def load_config(path) -> RunConfig:
    """Load and validate a JSON run configuration.

    Two layouts are accepted, selected by the top-level ``units`` field:
    ``si`` (default) with fields n_d_per_cm3, n_s_per_cm2_per_V, E_F_V,
    kappa, alpha_reduced and d0_nm; or ``reduced`` with n_d_red, n_s_red,
    E_F_V, kappa, alpha_red and d0_red.
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InvalidParameterError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"config {path} is not valid JSON: {exc}", line=exc.lineno) from exc
    if not isinstance(raw, dict):
        raise InvalidParameterError("config root must be a JSON object")

    units = raw.get("units", "si")
    if units not in ("si", "reduced"):
        raise InvalidParameterError(f"config units must be 'si' or 'reduced', got {units!r}")
    material = _config_dict(raw, "material", required=False)
    plate = _config_dict(raw, "plate", required=False)

    params = None
    if material:
        if units == "si":
            si = SIMaterial(
                n_d_per_cm3=_take(material, "n_d_per_cm3", section_name="material"),
                n_s_per_cm2_per_V=_take(material, "n_s_per_cm2_per_V", section_name="material"),
                E_F_V=_take(material, "E_F_V", section_name="material"),
                kappa=_take(material, "kappa", section_name="material"),
                alpha_reduced=_take(material, "alpha_reduced", optional=True),
            )
            params = reduce_units(si)
        else:
            params = MaterialParams(
                n_d=_take(material, "n_d_red", section_name="material"),
                n_s=_take(material, "n_s_red", section_name="material"),
                E_F=_take(material, "E_F_V", section_name="material"),
                kappa=_take(material, "kappa", section_name="material"),
                alpha=_take(material, "alpha_red", optional=True),
            )
        if material:
            raise InvalidParameterError(f"unknown material fields: {sorted(material)}")

    plate_cfg = None
    if plate:
        d0 = _take(plate, "d0_nm" if units == "si" else "d0_red", section_name="plate")
        n_plates = _take(plate, "n_semiconducting_plates", optional=True)
        plate_cfg = PlateConfig(
            d0=d0, n_semiconducting_plates=1 if n_plates is None else n_plates
        )
        if plate:
            raise InvalidParameterError(f"unknown plate fields: {sorted(plate)}")

    tolerances = {}
    tol_section = _config_dict(raw, "tolerances", required=False)
    for field_name, kwarg in (("root_xtol", "xtol"), ("neutrality_tol", "neutrality_tol")):
        value = tol_section.pop(field_name, None)
        if value is not None:
            lo, hi = TOLERANCE_BOUNDS
            if not (isinstance(value, (int, float)) and lo <= value <= hi):
                raise InvalidParameterError(
                    f"tolerance {field_name} must lie in [{lo:g}, {hi:g}], got {value!r}"
                )
            tolerances[kwarg] = float(value)
    if tol_section:
        raise InvalidParameterError(f"unknown tolerance fields: {sorted(tol_section)}")

    presets = {}
    for name, fields in _config_dict(raw, "presets", required=False).items():
        fields = dict(fields)
        presets[name] = DebyeInputs(
            temperature=_take(fields, "temperature_K", section_name=f"preset {name}"),
            carrier_density=_take(
                fields, "carrier_density_per_cm3", section_name=f"preset {name}"
            ),
            kappa=_take(fields, "kappa", section_name=f"preset {name}"),
        )

    return RunConfig(material=params, plate=plate_cfg, tolerances=tolerances, presets=presets)


def config_dict(material: MaterialParams, plate: PlateConfig) -> dict:
    """Serialize reduced-unit parameters into the loadable config schema."""
    return {
        "units": "reduced",
        "material": {
            "n_d_red": material.n_d,
            "n_s_red": material.n_s,
            "E_F_V": material.E_F,
            "kappa": material.kappa,
            "alpha_red": material.alpha,
        },
        "plate": {
            "d0_red": plate.d0,
            "n_semiconducting_plates": plate.n_semiconducting_plates,
        },
    }


def _require_config(args) -> RunConfig:
    if not args.config:
        raise InvalidParameterError("this command requires --config")
    cfg = load_config(args.config)
    if cfg.material is None or cfg.plate is None:
        raise InvalidParameterError(
            f"config {args.config} must define both 'material' and 'plate' sections"
        )
    return cfg


def _write_output(text, args):
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json_text(payload) -> str:
    return json.dumps(sio._round12(payload), indent=2) + "\n"


def cmd_equilibrium(args) -> int:
    cfg = _require_config(args)
    if not (math.isfinite(args.v0) and args.v0 > 0):
        raise InvalidParameterError(f"--v0 must be positive, got {args.v0}")
    state = solve_equilibrium(args.v0, cfg.material, cfg.plate, **cfg.tolerances)
    fields = {
        "sigma0": state.sigma0,
        "sigma1": state.sigma1,
        "V1": state.V1,
        "d1": state.d1,
        "V0": state.V0,
        "residual_neutrality": state.residual_neutrality,
    }
    if args.format == "csv":
        text = ",".join(fields) + "\n" + ",".join(sio.fmt(v) for v in fields.values()) + "\n"
    else:
        text = _json_text(fields)
    _write_output(text, args)
    return 0


def cmd_curve(args) -> int:
    cfg = _require_config(args)
    if not (0 < args.d0_min < args.d0_max):
        raise InvalidParameterError("need 0 < --d0-min < --d0-max")
    if args.n_points < 2:
        raise InvalidParameterError("--n-points must be at least 2")
    if not (math.isfinite(args.v0) and args.v0 > 0):
        raise InvalidParameterError(f"--v0 must be positive, got {args.v0}")

    grid = np.geomspace(args.d0_min, args.d0_max, args.n_points)
    n_plates = cfg.plate.n_semiconducting_plates

    held_v1 = None
    if args.hold == "v1":
        first = solve_equilibrium(
            args.v0,
            cfg.material,
            PlateConfig(d0=float(grid[0]), n_semiconducting_plates=n_plates),
            **cfg.tolerances,
        )
        held_v1 = first.V1

    lines = [f"# hold: {args.hold}, V0: {sio.fmt(args.v0)}"]
    if held_v1 is not None:
        lines.append(f"# V1: {sio.fmt(held_v1)}")
    lines.append("d0,c_total,d_offset,inv_c_total")
    for d0 in grid:
        plate = PlateConfig(d0=float(d0), n_semiconducting_plates=n_plates)
        try:
            if held_v1 is None:
                state = solve_equilibrium(args.v0, cfg.material, plate, **cfg.tolerances)
                bd = capacitance_from_bending(state.V1, cfg.material, plate)
            else:
                bd = capacitance_from_bending(held_v1, cfg.material, plate)
        except ModelError as exc:
            lines.append(f"# d0={sio.fmt(d0)} error: {exc}")
            continue
        lines.append(
            ",".join(
                sio.fmt(v) for v in (d0, bd.c_total, bd.d_offset, 1.0 / bd.c_total)
            )
        )
    _write_output("\n".join(lines) + "\n", args)
    return 0


def cmd_debye(args) -> int:
    if args.preset:
        presets = dict(DEBYE_PRESETS)
        if args.config:
            presets.update(load_config(args.config).presets)
        if args.preset not in presets:
            raise InvalidParameterError(
                f"unknown preset {args.preset!r}; available: {sorted(presets)}"
            )
        inp = presets[args.preset]
    else:
        missing = [
            flag
            for flag, value in (
                ("--temperature-k", args.temperature_k),
                ("--carrier-per-cm3", args.carrier_per_cm3),
                ("--kappa", args.kappa),
            )
            if value is None
        ]
        if missing:
            raise InvalidParameterError(
                f"either --preset or all of {missing} must be given"
            )
        inp = DebyeInputs(
            temperature=args.temperature_k,
            carrier_density=args.carrier_per_cm3,
            kappa=args.kappa,
        )

    lam_nm = debye_length(inp, two_species=args.two_species)
    offset_nm = debye_offset(lam_nm, inp.kappa, args.n_plates)
    payload = {
        "lambda_debye_nm": lam_nm,
        "lambda_debye_um": lam_nm * 1e-3,
        "offset_nm": offset_nm,
        "n_plates": args.n_plates,
        "two_species": args.two_species,
        "inputs": {
            "temperature_K": inp.temperature,
            "carrier_density_per_cm3": inp.carrier_density,
            "kappa": inp.kappa,
        },
    }
    if args.format == "csv":
        keys = ("lambda_debye_nm", "offset_nm", "n_plates", "carrier_density_per_cm3")
        values = (lam_nm, offset_nm, args.n_plates, inp.carrier_density)
        text = ",".join(keys) + "\n" + ",".join(sio.fmt(v) for v in values) + "\n"
    else:
        text = _json_text(payload)
    _write_output(text, args)
    return 0


def _geometry_from_args(args):
    if args.geometry == "parallel":
        return ParallelPlate(area=args.area_cm2 * CM2)
    if args.geometry == "sphere":
        return SpherePlate(radius=args.radius_cm * CM)
    raise InvalidParameterError(f"unknown geometry {args.geometry!r}")


def cmd_fit(args) -> int:
    geometry = _geometry_from_args(args)
    series = sio.read_measurement_csv(args.data, geometry)
    init = CalibModel(
        d_contact=args.init_contact_nm * NM,
        b=args.init_b_nm * NM,
        scale=args.init_scale,
        c_stray=args.init_stray_pf * PF,
    )
    free = {name.strip() for name in args.free.split(",") if name.strip()}
    unknown = free - set(PARAM_NAMES)
    if unknown:
        raise InvalidParameterError(f"unknown parameters in --free: {sorted(unknown)}")
    if not free:
        raise InvalidParameterError("--free must name at least one parameter")
    fixed = set(PARAM_NAMES) - free

    result = fit_offset(series, init, fixed, roughness=args.roughness_nm * NM)

    report = sio.fit_report_dict(result)
    b_nm = report["model"]["b_nm"]
    if "b" in result.free_parameters:
        i = result.free_parameters.index("b")
        se_nm = math.sqrt(max(report["covariance"][i][i], 0.0))
        print(f"offset_nm = {sio.fmt(b_nm)} +/- {sio.fmt(se_nm)}", file=sys.stderr)
    else:
        print(f"offset_nm = {sio.fmt(b_nm)} (pinned)", file=sys.stderr)

    _write_output(json.dumps(report, indent=2) + "\n", args)
    if args.residuals:
        Path(args.residuals).write_text(
            sio.residuals_csv_text(series, result.model), encoding="utf-8"
        )
    return 0 if result.converged else 1


def cmd_synth(args) -> int:
    geometry = _geometry_from_args(args)
    truth = CalibModel(
        d_contact=args.contact_nm * NM,
        b=args.b_nm * NM,
        scale=args.scale,
        c_stray=args.stray_pf * PF,
    )
    if args.n_points < 2:
        raise InvalidParameterError("--n-points must be at least 2")
    if args.d0_min_nm < 0 or args.d0_max_nm <= args.d0_min_nm:
        raise InvalidParameterError("need 0 <= --d0-min-nm < --d0-max-nm")
    if args.spacing == "log":
        if args.d0_min_nm <= 0:
            raise InvalidParameterError("log spacing requires --d0-min-nm > 0")
        d0 = np.geomspace(args.d0_min_nm, args.d0_max_nm, args.n_points)
    else:
        d0 = np.linspace(args.d0_min_nm, args.d0_max_nm, args.n_points)

    grid = truth.d_contact + d0 * NM
    noise = NoiseSpec(fractional_sigma=args.noise_frac, additive_floor=args.noise_floor_pf * PF)
    series = generate_synthetic(truth, geometry, grid, noise, args.seed)
    _write_output(sio.measurement_csv_text(series), args)
    return 0


def cmd_correct(args) -> int:
    rows = sio.read_force_series_csv(args.series)
    spec = CorrectionSpec(d_offset=args.offset_nm, power_law=args.power_law)
    points = apply_correction_series(rows, spec, mode=args.mode)
    _write_output(sio.corrected_series_csv_text(points), args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--output", help="write output to this path instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default="json")

    parser = argparse.ArgumentParser(
        prog="semicap",
        description="Semiconductor screening capacitance model and distance-offset calibration",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("equilibrium", parents=[common], help="solve the charge balance at a bias")
    p.add_argument("--v0", type=float, required=True, help="applied potential in volts")
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("curve", parents=[common], help="sweep capacitance against gap")
    p.add_argument("--v0", type=float, required=True)
    p.add_argument("--d0-min", type=float, required=True, help="smallest gap (config length units)")
    p.add_argument("--d0-max", type=float, required=True)
    p.add_argument("--n-points", type=int, default=50)
    p.add_argument(
        "--hold",
        choices=("v0", "v1"),
        default="v0",
        help="re-solve at fixed V0 per point, or freeze V1 from the first point",
    )
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("debye", parents=[common], help="bulk Debye screening comparison")
    p.add_argument("--preset", help="named material preset, e.g. Si-intrinsic")
    p.add_argument("--temperature-k", type=float)
    p.add_argument("--carrier-per-cm3", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--two-species", action="store_true", help="count both carrier polarities")
    p.add_argument("--n-plates", type=int, default=1, choices=(1, 2))
    p.set_defaults(func=cmd_debye)

    p = sub.add_parser("fit", parents=[common], help="fit offset and contact to measured data")
    p.add_argument("data", help="measurement CSV (stage_nm,capacitance_pF[,sigma_pF][,contact])")
    p.add_argument("--geometry", choices=("parallel", "sphere"), required=True)
    p.add_argument("--area-cm2", type=float, default=1.0)
    p.add_argument("--radius-cm", type=float, default=1.0)
    p.add_argument("--init-b-nm", type=float, default=100.0)
    p.add_argument("--init-contact-nm", type=float, default=0.0)
    p.add_argument("--init-scale", type=float, default=1.0)
    p.add_argument("--init-stray-pf", type=float, default=0.0)
    p.add_argument(
        "--free",
        default="b,scale",
        help="comma list of free parameters among d_contact,b,scale,c_stray",
    )
    p.add_argument("--roughness-nm", type=float, default=0.0)
    p.add_argument("--residuals", help="also write a per-point residual CSV here")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic measurement CSV")
    p.add_argument("--geometry", choices=("parallel", "sphere"), required=True)
    p.add_argument("--area-cm2", type=float, default=1.0)
    p.add_argument("--radius-cm", type=float, default=1.0)
    p.add_argument("--b-nm", type=float, required=True, help="true distance offset")
    p.add_argument("--contact-nm", type=float, default=0.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--stray-pf", type=float, default=0.0)
    p.add_argument("--d0-min-nm", type=float, default=0.0)
    p.add_argument("--d0-max-nm", type=float, required=True)
    p.add_argument("--n-points", type=int, default=50)
    p.add_argument("--spacing", choices=("linear", "log"), default="linear")
    p.add_argument("--noise-frac", type=float, default=0.0)
    p.add_argument("--noise-floor-pf", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("correct", parents=[common], help="apply a distance offset to a force series")
    p.add_argument("series", help="CSV with d_nm,force_arb[,correction_frac]")
    p.add_argument("--offset-nm", type=float, required=True)
    p.add_argument("--power-law", type=float, default=4.0)
    p.add_argument("--mode", choices=("linear", "exact"), default="linear")
    p.set_defaults(func=cmd_correct)

    return parser


def _emit_error(exc) -> None:
    payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    print(json.dumps(payload), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, InvalidParameterError) as exc:
        _emit_error(exc)
        return 2
    except ModelError as exc:
        _emit_error(exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
