"""Comparison screening models: naive bulk Debye screening and the
space-charge penetration of a good metal.

Lengths returned by this module are in nanometres, the package's SI-facing
length unit.
"""

import math
from dataclasses import dataclass

import scipy.constants as spc

from .errors import InvalidParameterError

# Effective field-penetration depth of a good metal, per plate, in nm.
# Thomas-Fermi-scale space-charge value for a parabolic conduction band;
# exposed as a configurable default rather than a hard-coded truth.
METAL_OFFSET_NM = 0.1


@dataclass(frozen=True)
class DebyeInputs:
    """Bulk screening inputs: temperature (K), mobile-carrier density
    (cm^-3) and bare dielectric constant."""

    temperature: float
    carrier_density: float
    kappa: float

    def __post_init__(self):
        for name in ("temperature", "carrier_density", "kappa"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParameterError(f"{name} must be positive and finite, got {value!r}")


# Intrinsic materials at 300 K. The carrier densities are the classic
# tabulated room-temperature values (1.45e10 cm^-3 for Si, 2.4e13 cm^-3 for
# Ge); modern determinations differ by tens of percent, which is why the
# checks against quoted penetration depths carry a factor-1.5 band.
DEBYE_PRESETS = {
    "Si-intrinsic": DebyeInputs(temperature=300.0, carrier_density=1.45e10, kappa=11.7),
    "Ge-intrinsic": DebyeInputs(temperature=300.0, carrier_density=2.4e13, kappa=16.0),
}


def debye_length(inp: DebyeInputs, *, two_species: bool = False) -> float:
    """Debye screening length sqrt(eps0 kappa kB T / (e^2 n)) in nm.

    ``two_species`` counts both carrier polarities of an intrinsic
    semiconductor (n -> 2n, shortening the length by sqrt 2). The default is
    the single-species form.
    """
    n_m3 = inp.carrier_density * 1e6
    if two_species:
        n_m3 *= 2.0
    lam_m = math.sqrt(
        spc.epsilon_0 * inp.kappa * spc.k * inp.temperature / (spc.e**2 * n_m3)
    )
    return lam_m / 1e-9


def _check_n_plates(n_plates):
    if n_plates not in (1, 2):
        raise InvalidParameterError(f"n_plates must be 1 or 2, got {n_plates!r}")


def debye_offset(lambda_d: float, kappa: float, n_plates: int = 1) -> float:
    """Distance offset implied by Debye screening: 2 * lambda_d / kappa per plate.

    Unit-agnostic in length (returns the unit ``lambda_d`` came in).
    """
    if not (math.isfinite(lambda_d) and lambda_d > 0):
        raise InvalidParameterError(f"lambda_d must be positive, got {lambda_d!r}")
    if not (math.isfinite(kappa) and kappa >= 1):
        raise InvalidParameterError(f"kappa must be >= 1, got {kappa!r}")
    _check_n_plates(n_plates)
    return n_plates * 2.0 * lambda_d / kappa


def metal_offset(n_plates: int = 1, per_plate_nm: float = METAL_OFFSET_NM) -> float:
    """Distance offset of good metallic plates, in nm (default 0.1 nm per plate)."""
    _check_n_plates(n_plates)
    if not (math.isfinite(per_plate_nm) and per_plate_nm > 0):
        raise InvalidParameterError(f"per_plate_nm must be positive, got {per_plate_nm!r}")
    return n_plates * per_plate_nm
