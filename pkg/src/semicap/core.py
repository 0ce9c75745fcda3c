"""Equilibrium charge balance and differential capacitance of a biased
semiconductor surface.

The model: a perfectly conducting plate at potential V0 faces a
semiconducting plate across a vacuum gap d0. Charge sigma0 on the conductor
is screened partly by surface states (areal density of states n_s filled up
to the Fermi level E_F) and partly by a depletion region of constant charge
density n_d and depth d1, across which the bands bend by V1 = alpha * d1**2.

Everything here works in reduced units: the vacuum permittivity and the
electron charge are both 1, potentials are in volts, and one reduced length
unit corresponds to ``REDUCED_LENGTH_M`` at the SI boundary (1 nm). With
those choices a charge per unit area is numerically the potential drop it
produces across one length unit of vacuum gap, and capacitance per unit
area is an inverse length. :func:`reduce_units` / :func:`si_units` convert
a laboratory-facing parameter set (cm^-3, cm^-2 V^-1, volts) to and from
reduced units.
"""

import math
from dataclasses import dataclass

import scipy.constants as spc
from scipy.optimize import brentq

from .errors import (
    ConvergenceError,
    DepletionAssumptionError,
    FlatBandError,
    InvalidParameterError,
)

# SI length represented by one reduced length unit.
REDUCED_LENGTH_M = 1e-9

# Reduced value of a bulk density given in cm^-3 / a surface density of
# states given in cm^-2 V^-1.
_N_D_PER_CM3 = spc.e * 1e6 * REDUCED_LENGTH_M**2 / spc.epsilon_0
_N_S_PER_CM2_V = spc.e * 1e4 * REDUCED_LENGTH_M / spc.epsilon_0

# Band bending below this is treated as flat band (bulk capacitance diverges).
FLAT_BAND_V1 = 1e-15


def _require_finite(name, value):
    if not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class MaterialParams:
    """Electronic parameters of a semiconducting plate, in reduced units.

    ``alpha`` is the band-bending curvature (V1 = alpha * d1**2). When left
    unset it defaults to n_d / kappa, the constant-depletion-charge value
    without the conventional factor 1/2; pass it explicitly to use another
    convention.
    """

    n_d: float
    n_s: float
    E_F: float
    kappa: float
    alpha: float | None = None

    def __post_init__(self):
        for name in ("n_d", "n_s", "E_F", "kappa"):
            _require_finite(name, getattr(self, name))
        if self.n_d <= 0:
            raise InvalidParameterError(f"n_d must be positive, got {self.n_d}")
        if self.n_s < 0:
            raise InvalidParameterError(f"n_s must be non-negative, got {self.n_s}")
        if self.kappa < 1:
            raise InvalidParameterError(f"kappa must be >= 1, got {self.kappa}")
        if self.alpha is None:
            object.__setattr__(self, "alpha", self.n_d / self.kappa)
        _require_finite("alpha", self.alpha)
        if self.alpha <= 0:
            raise InvalidParameterError(f"alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class PlateConfig:
    """Gap geometry: physical separation d0 and how many of the two plates
    are semiconducting (the distance offset scales with that count)."""

    d0: float
    n_semiconducting_plates: int = 1

    def __post_init__(self):
        _require_finite("d0", self.d0)
        if self.d0 <= 0:
            raise InvalidParameterError(f"d0 must be positive, got {self.d0}")
        if self.n_semiconducting_plates not in (1, 2):
            raise InvalidParameterError(
                f"n_semiconducting_plates must be 1 or 2, got {self.n_semiconducting_plates}"
            )


@dataclass(frozen=True)
class EquilibriumState:
    """Solved charge and potential configuration at applied potential V0."""

    sigma0: float
    sigma1: float
    V1: float
    d1: float
    V0: float
    residual_neutrality: float


@dataclass(frozen=True)
class CapacitanceBreakdown:
    """Differential capacitances per unit area and the implied distance offset.

    ``c_total`` is the series combination of the gap capacitance with the
    parallel surface-state and space-charge contributions; ``d_offset`` is
    1 / (c_surface + c_bulk) per semiconducting plate, the excess apparent
    separation an electrostatic calibration reports.
    """

    c_gap: float
    c_surface: float
    c_bulk: float
    c_total: float
    d_offset: float


@dataclass(frozen=True)
class SIMaterial:
    """Laboratory-facing material description (unit-bearing field names)."""

    n_d_per_cm3: float
    n_s_per_cm2_per_V: float
    E_F_V: float
    kappa: float
    alpha_reduced: float | None = None

    def __post_init__(self):
        for name in ("n_d_per_cm3", "n_s_per_cm2_per_V", "E_F_V", "kappa"):
            _require_finite(name, getattr(self, name))
        if self.n_d_per_cm3 <= 0:
            raise InvalidParameterError("n_d_per_cm3 must be positive")
        if self.n_s_per_cm2_per_V < 0:
            raise InvalidParameterError("n_s_per_cm2_per_V must be non-negative")
        if self.kappa < 1:
            raise InvalidParameterError("kappa must be >= 1")


def reduce_units(si: SIMaterial) -> MaterialParams:
    """Convert an SI-facing material description to reduced units.

    Round-trips with :func:`si_units` to better than 1e-12 relative.
    """
    return MaterialParams(
        n_d=si.n_d_per_cm3 * _N_D_PER_CM3,
        n_s=si.n_s_per_cm2_per_V * _N_S_PER_CM2_V,
        E_F=si.E_F_V,
        kappa=si.kappa,
        alpha=si.alpha_reduced,
    )


def si_units(params: MaterialParams) -> SIMaterial:
    """Inverse of :func:`reduce_units`."""
    return SIMaterial(
        n_d_per_cm3=params.n_d / _N_D_PER_CM3,
        n_s_per_cm2_per_V=params.n_s / _N_S_PER_CM2_V,
        E_F_V=params.E_F,
        kappa=params.kappa,
        alpha_reduced=params.alpha,
    )


def depletion_depth(V1: float, params: MaterialParams) -> float:
    """Depth of the depletion region producing band bending V1."""
    _require_finite("V1", V1)
    if V1 < 0:
        raise InvalidParameterError(f"V1 must be non-negative, got {V1}")
    return math.sqrt(V1 / params.alpha)


def surface_charge(V1: float, params: MaterialParams) -> float:
    """Surface-state charge per area at band bending V1: (E_F - V1) * n_s."""
    return (params.E_F - V1) * params.n_s


def series_capacitance(c_a: float, c_b: float) -> float:
    """Series combination c_a * c_b / (c_a + c_b) of two per-area capacitances."""
    for name, c in (("c_a", c_a), ("c_b", c_b)):
        if not (c > 0):
            raise InvalidParameterError(f"{name} must be positive, got {c}")
    return c_a * c_b / (c_a + c_b)


def _charge_balance(sigma0, V0, params, d0):
    # Root function: sigma0 + (E_F - V1) n_s - n_d sqrt(V1/alpha) with
    # V1 = V0 - sigma0 d0, clamped against rounding at the V1 = 0 endpoint.
    V1 = V0 - sigma0 * d0
    if V1 < 0.0:
        V1 = 0.0
    return sigma0 + (params.E_F - V1) * params.n_s - params.n_d * math.sqrt(V1 / params.alpha)


def solve_equilibrium(
    V0: float,
    params: MaterialParams,
    plate: PlateConfig,
    *,
    xtol: float = 1e-12,
    max_iter: int = 200,
    neutrality_tol: float = 1e-9,
    bracket_factor: float = 10.0,
) -> EquilibriumState:
    """Solve the equilibrium charge balance at applied potential V0 > 0.

    Finds the conductor charge sigma0 such that the potential drop across
    the gap plus the band bending equals V0 while the surface-state and
    depletion charges neutralize sigma0. The balance function is strictly
    increasing in sigma0, so a single bracketed root is solved with Brent's
    method over sigma0 in [-bracket_factor * V0/d0, V0/d0] (the right end
    is flat band, V1 = 0; negative sigma0, hence V1 > V0, is admitted).

    The returned state's charge-neutrality residual must not exceed
    ``neutrality_tol`` relative to the largest term entering the balance
    (at order-unity parameters this reduces to the absolute criterion;
    very large screening densities make an absolute criterion unattainable
    in double precision).

    Raises
    ------
    DepletionAssumptionError
        If no root with V1 >= 0 exists in the bracket (accumulation or
        inverted bias, outside the model's regime).
    ConvergenceError
        If the root finder does not converge within ``max_iter`` iterations;
        carries the bracket used.
    """
    _require_finite("V0", V0)
    if V0 <= 0:
        raise InvalidParameterError(f"V0 must be positive, got {V0}")

    hi = V0 / plate.d0
    lo = -bracket_factor * hi

    def f(s0):
        return _charge_balance(s0, V0, params, plate.d0)

    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        sigma0 = lo
    elif f_hi == 0.0:
        sigma0 = hi
    elif f_lo * f_hi > 0:
        raise DepletionAssumptionError(
            f"no equilibrium with V1 >= 0 for V0={V0}: charge balance does not "
            f"change sign on sigma0 in [{lo}, {hi}] (accumulation or inverted bias)"
        )
    else:
        try:
            sigma0 = brentq(f, lo, hi, xtol=xtol, maxiter=max_iter)
        except RuntimeError as exc:
            raise ConvergenceError(
                f"root finder did not converge within {max_iter} iterations: {exc}",
                bracket=(lo, hi),
            ) from exc

    V1 = V0 - sigma0 * plate.d0
    if V1 < 0.0:
        V1 = 0.0
    sigma1 = surface_charge(V1, params)
    d1 = depletion_depth(V1, params)
    residual = abs(sigma0 + sigma1 - params.n_d * d1)
    # Largest term entering the balance; the surface-state contribution is a
    # cancellation of n_s * E_F against n_s * V1, so its rounding floor
    # grows with n_s even though sigma1 itself may be tiny.
    charge_scale = max(
        1.0, abs(sigma0), params.n_d * d1, params.n_s * (abs(params.E_F) + V1)
    )
    if residual > neutrality_tol * charge_scale:
        raise ConvergenceError(
            f"charge-neutrality residual {residual:.3e} exceeds tolerance "
            f"{neutrality_tol:.3e} (scale {charge_scale:.3e})",
            bracket=(lo, hi),
        )
    return EquilibriumState(
        sigma0=sigma0,
        sigma1=sigma1,
        V1=V1,
        d1=d1,
        V0=V0,
        residual_neutrality=residual,
    )


def capacitance_from_bending(
    V1: float, params: MaterialParams, plate: PlateConfig
) -> CapacitanceBreakdown:
    """Differential-capacitance breakdown at a given band bending V1 > 0.

    c_gap = 1/d0, c_surface = n_s, c_bulk = n_d (4 alpha V1)^(-1/2); the
    total is the series combination of c_gap with c_surface + c_bulk, and
    the distance offset is n_semiconducting_plates / (c_surface + c_bulk).
    """
    _require_finite("V1", V1)
    if V1 <= FLAT_BAND_V1:
        raise FlatBandError(
            f"V1={V1!r} is at flat band (<= {FLAT_BAND_V1}); the space-charge "
            "capacitance is unbounded there"
        )
    c_gap = 1.0 / plate.d0
    c_surface = params.n_s
    c_bulk = params.n_d * (4.0 * params.alpha * V1) ** -0.5
    c_total = series_capacitance(c_gap, c_surface + c_bulk)
    d_offset = plate.n_semiconducting_plates / (c_surface + c_bulk)
    return CapacitanceBreakdown(
        c_gap=c_gap,
        c_surface=c_surface,
        c_bulk=c_bulk,
        c_total=c_total,
        d_offset=d_offset,
    )


def capacitance_breakdown(
    state: EquilibriumState, params: MaterialParams, plate: PlateConfig
) -> CapacitanceBreakdown:
    """Differential-capacitance breakdown at a solved equilibrium state."""
    return capacitance_from_bending(state.V1, params, plate)


def finite_difference_capacitance(
    V0: float,
    params: MaterialParams,
    plate: PlateConfig,
    h: float | None = None,
    *,
    xtol: float = 1e-14,
) -> float:
    """Central-difference estimate of the differential capacitance d(sigma0)/dV0.

    Solves the equilibrium at V0 - h and V0 + h and differences sigma0. The
    default step is 1e-6 * V0; the root tolerance is kept well below the
    step so solver noise stays negligible in the quotient.
    """
    if h is None:
        h = 1e-6 * V0
    _require_finite("h", h)
    if not 0 < h < V0:
        raise InvalidParameterError(f"step h must satisfy 0 < h < V0, got h={h}, V0={V0}")
    below = solve_equilibrium(V0 - h, params, plate, xtol=xtol)
    above = solve_equilibrium(V0 + h, params, plate, xtol=xtol)
    return (above.sigma0 - below.sigma0) / (2.0 * h)
