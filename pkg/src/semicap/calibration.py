"""In-situ distance-offset calibration from capacitance-vs-position data.

A translation stage moves one plate toward the other until electrical
contact; the measured capacitance follows the ideal geometric form with the
gap enlarged by a distance offset ``b``. Fitting that model to a measured
series extracts the offset, the contact position and the geometry scale.

This module works in SI units throughout: positions and lengths in metres,
areas in m^2, capacitances in farads. File formats (nm, pF) are converted
at the I/O boundary in :mod:`semicap.io`.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.constants as spc
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import (
    InvalidParameterError,
    PFAInvalidError,
    ThroughContactError,
)
from .leastsq import least_squares_lm

PARAM_NAMES = ("d_contact", "b", "scale", "c_stray")


@dataclass(frozen=True)
class ParallelPlate:
    """Parallel-plate geometry with effective area in m^2."""

    area: float

    def __post_init__(self):
        if not (math.isfinite(self.area) and self.area > 0):
            raise InvalidParameterError(f"area must be positive, got {self.area!r}")


@dataclass(frozen=True)
class SpherePlate:
    """Sphere-above-plane geometry with sphere radius in m."""

    radius: float

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise InvalidParameterError(f"radius must be positive, got {self.radius!r}")


@dataclass(frozen=True)
class MeasurementPoint:
    stage_position: float
    capacitance: float
    sigma: float | None = None
    is_contact: bool = False


@dataclass
class MeasurementSeries:
    """Ordered capacitance-vs-stage-position records for one geometry.

    Requires at least 4 points, strictly monotone stage positions and
    positive finite capacitances. Uncertainties must be given for all points
    or for none.
    """

    points: list[MeasurementPoint]
    geometry: ParallelPlate | SpherePlate
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.points) < 4:
            raise InvalidParameterError(
                f"need at least 4 measurement points, got {len(self.points)}"
            )
        stages = [p.stage_position for p in self.points]
        diffs = [b - a for a, b in zip(stages, stages[1:])]
        if not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
            raise InvalidParameterError("stage positions must be strictly monotone")
        for p in self.points:
            if not (math.isfinite(p.capacitance) and p.capacitance > 0):
                raise InvalidParameterError(
                    f"capacitance must be positive and finite, got {p.capacitance!r}"
                )
            if p.sigma is not None and not (math.isfinite(p.sigma) and p.sigma > 0):
                raise InvalidParameterError(f"sigma must be positive, got {p.sigma!r}")
        n_sigma = sum(p.sigma is not None for p in self.points)
        if n_sigma not in (0, len(self.points)):
            raise InvalidParameterError("uncertainties must be given for all points or none")

    def stage_positions(self):
        return np.array([p.stage_position for p in self.points])

    def capacitances(self):
        return np.array([p.capacitance for p in self.points])

    def sigmas(self):
        """Uncertainty array, or None when the series carries none."""
        if self.points[0].sigma is None:
            return None
        return np.array([p.sigma for p in self.points])

    def contact_position(self):
        """Stage position of the flagged contact point, or None."""
        for p in self.points:
            if p.is_contact:
                return p.stage_position
        return None


@dataclass(frozen=True)
class CalibModel:
    """Measurement-model parameters: contact position and offset in metres,
    dimensionless geometry scale, additive stray capacitance in farads."""

    d_contact: float = 0.0
    b: float = 0.0
    scale: float = 1.0
    c_stray: float = 0.0

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value!r}")
        if self.b < 0:
            raise InvalidParameterError(f"offset b must be non-negative, got {self.b}")
        if self.scale <= 0:
            raise InvalidParameterError(f"scale must be positive, got {self.scale}")


@dataclass
class FitResult:
    """Best-fit model with covariance (over the free parameters, in their
    listed order), residual statistics and convergence diagnostics."""

    model: CalibModel
    covariance: np.ndarray
    rms_residual: float
    n_iterations: int
    converged: bool
    free_parameters: tuple
    warnings: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def model_capacitance_parallel(stage_position, model: CalibModel, area: float):
    """Parallel-plate capacitance eps0 * area * scale / (d0 + b) + c_stray,
    with d0 = stage_position - d_contact.

    At d0 = 0 this is the finite contact maximum eps0 * area / b (+ stray).
    Accepts scalar or array stage positions.
    """
    z = np.asarray(stage_position, dtype=float)
    d0 = z - model.d_contact
    if np.any(d0 < 0):
        raise ThroughContactError(
            f"stage position behind contact at d_contact={model.d_contact}"
        )
    gap = d0 + model.b
    if np.any(gap <= 0):
        raise InvalidParameterError("zero gap with zero offset: capacitance is unbounded")
    c = model.scale * spc.epsilon_0 * area / gap + model.c_stray
    return c if c.ndim else float(c)


def model_capacitance_sphere(stage_position, model: CalibModel, radius: float):
    """Sphere-plate capacitance 2 pi eps0 R scale * ln(R / (d0 + b)) + c_stray.

    Valid for gaps small against the radius (proximity-force regime); the
    offset enters only through d0 -> d0 + b, exactly as for flat plates.
    """
    z = np.asarray(stage_position, dtype=float)
    d0 = z - model.d_contact
    if np.any(d0 < 0):
        raise ThroughContactError(
            f"stage position behind contact at d_contact={model.d_contact}"
        )
    gap = d0 + model.b
    if np.any(gap <= 0):
        raise InvalidParameterError("zero gap with zero offset: capacitance is unbounded")
    if np.any(gap >= radius):
        raise PFAInvalidError(
            f"gap {np.max(gap):g} not small against radius {radius:g}"
        )
    c = model.scale * 2.0 * np.pi * spc.epsilon_0 * radius * np.log(radius / gap) + model.c_stray
    return c if c.ndim else float(c)


def model_capacitance(stage_position, model: CalibModel, geometry):
    """Forward capacitance model for either geometry."""
    if isinstance(geometry, ParallelPlate):
        return model_capacitance_parallel(stage_position, model, geometry.area)
    if isinstance(geometry, SpherePlate):
        return model_capacitance_sphere(stage_position, model, geometry.radius)
    raise InvalidParameterError(f"unknown geometry {geometry!r}")


def max_capacitance_offset(c_max: float, area: float) -> float:
    """Offset from a directly measured contact capacitance: eps0 * area / c_max.

    ``c_max`` must already have any stray capacitance subtracted.
    """
    if not (math.isfinite(c_max) and c_max > 0):
        raise InvalidParameterError(f"c_max must be positive, got {c_max!r}")
    if not (math.isfinite(area) and area > 0):
        raise InvalidParameterError(f"area must be positive, got {area!r}")
    return spc.epsilon_0 * area / c_max


def _raw_capacitance(z, params, geometry):
    # Unvalidated forward evaluation used inside the fit loop: out-of-domain
    # trial parameters return +inf so the damping schedule rejects the step.
    d_contact, b, scale, c_stray = params
    gap = z - d_contact + b
    if isinstance(geometry, ParallelPlate):
        if np.any(gap <= 0):
            return np.full_like(z, np.inf)
        return scale * spc.epsilon_0 * geometry.area / gap + c_stray
    if np.any(gap <= 0) or np.any(gap >= geometry.radius):
        return np.full_like(z, np.inf)
    return (
        scale * 2.0 * np.pi * spc.epsilon_0 * geometry.radius * np.log(geometry.radius / gap)
        + c_stray
    )


def _raw_jacobian(z, params, geometry):
    # Columns in PARAM_NAMES order: d_contact, b, scale, c_stray.
    d_contact, b, scale, c_stray = params
    gap = z - d_contact + b
    J = np.empty((z.size, 4))
    if isinstance(geometry, ParallelPlate):
        k = spc.epsilon_0 * geometry.area
        J[:, 0] = scale * k / gap**2
        J[:, 1] = -scale * k / gap**2
        J[:, 2] = k / gap
    else:
        q = 2.0 * np.pi * spc.epsilon_0 * geometry.radius
        J[:, 0] = scale * q / gap
        J[:, 1] = -scale * q / gap
        J[:, 2] = q * np.log(geometry.radius / gap)
    J[:, 3] = 1.0
    return J


def fit_offset(
    data: MeasurementSeries,
    init: CalibModel,
    fixed=(),
    *,
    roughness: float = 0.0,
    max_iter: int = 500,
    gtol: float = 1e-10,
    xtol: float = 1e-12,
) -> FitResult:
    """Weighted least-squares fit of the forward model to a measured series.

    ``fixed`` names parameters pinned at their ``init`` values; the rest are
    free. Residuals are weighted by 1/sigma when the series carries
    uncertainties and unweighted otherwise. A point flagged as the contact
    point pins d_contact at its stage position (contact is a datum, not a
    fit parameter); without such a datum, sphere-geometry fits pin
    d_contact at the init value, and fits that leave both d_contact and b
    free carry an identifiability warning since only their difference is
    determined.

    The parameter covariance comes from the Gauss-Newton normal matrix at
    the solution (scaled by the residual variance for unweighted fits).
    ``roughness`` is subtracted from the fitted offset in the result
    metadata; no roughness model is applied to the fit itself.

    Raises ConvergenceError (carrying the best solution so far) when the
    minimizer hits its iteration cap.
    """
    unknown = set(fixed) - set(PARAM_NAMES)
    if unknown:
        raise InvalidParameterError(f"unknown parameter names in fixed: {sorted(unknown)}")

    z = data.stage_positions()
    c_meas = data.capacitances()
    sigma = data.sigmas()
    sqrt_w = np.ones_like(c_meas) if sigma is None else 1.0 / sigma

    fixed_eff = set(fixed)
    fit_warnings = []
    metadata = dict(data.metadata)
    init_eff = init

    contact = data.contact_position()
    if contact is not None:
        # an electrically detected contact point is a datum: it pins the
        # contact position regardless of the init value
        init_eff = replace(init, d_contact=contact)
        fixed_eff.add("d_contact")
        metadata["d_contact_source"] = "contact datum"
    elif isinstance(data.geometry, SpherePlate) and "d_contact" not in fixed_eff:
        fixed_eff.add("d_contact")
        metadata["d_contact_source"] = "pinned at init (no contact datum)"

    free = tuple(name for name in PARAM_NAMES if name not in fixed_eff)
    if not free:
        raise InvalidParameterError("all parameters are fixed; nothing to fit")
    if "d_contact" in free and "b" in free and contact is None:
        fit_warnings.append(
            "d_contact and b are both free with no contact datum; the model depends "
            "only on their difference, so the fit is structurally unidentifiable"
        )

    full0 = np.array([getattr(init_eff, name) for name in PARAM_NAMES])
    free_idx = [PARAM_NAMES.index(name) for name in free]

    def assemble(x):
        full = full0.copy()
        full[free_idx] = x
        return full

    def residual(x):
        return (_raw_capacitance(z, assemble(x), data.geometry) - c_meas) * sqrt_w

    def jacobian(x):
        return _raw_jacobian(z, assemble(x), data.geometry)[:, free_idx] * sqrt_w[:, None]

    if not np.all(np.isfinite(residual(full0[free_idx]))):
        raise InvalidParameterError("initial model is outside its domain for this data")

    lm = least_squares_lm(
        residual, full0[free_idx], jac=jacobian, max_iter=max_iter, gtol=gtol, xtol=xtol
    )

    full = assemble(lm.x)
    fitted = CalibModel(**dict(zip(PARAM_NAMES, full)))
    c_model = _raw_capacitance(z, full, data.geometry)
    rms = float(np.sqrt(np.mean((c_model - c_meas) ** 2)))

    J = jacobian(lm.x)
    cov = np.linalg.pinv(J.T @ J)
    if sigma is None:
        n, p = z.size, len(free)
        dof = n - p
        if dof > 0:
            cov = cov * (2.0 * lm.cost / dof)
        else:
            fit_warnings.append("no residual degrees of freedom; covariance not scaled")
    cov = 0.5 * (cov + cov.T)
    d = np.diag(cov).copy()
    np.fill_diagonal(cov, np.maximum(d, 0.0))

    metadata["weighted"] = sigma is not None
    if roughness:
        metadata["roughness_correction"] = roughness
        metadata["offset_roughness_corrected"] = fitted.b - roughness

    return FitResult(
        model=fitted,
        covariance=cov,
        rms_residual=rms,
        n_iterations=lm.n_iter,
        converged=lm.converged,
        free_parameters=free,
        warnings=fit_warnings,
        metadata=metadata,
    )


@dataclass(frozen=True)
class NoiseSpec:
    """Multiplicative Gaussian noise of the given fractional sigma plus an
    optional additive Gaussian floor (in capacitance units)."""

    fractional_sigma: float = 0.0
    additive_floor: float = 0.0

    def __post_init__(self):
        for name in ("fractional_sigma", "additive_floor"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InvalidParameterError(f"{name} must be non-negative, got {value!r}")


def generate_synthetic(
    truth: CalibModel,
    geometry,
    grid,
    noise: NoiseSpec = NoiseSpec(),
    seed: int = 0,
    *,
    mark_contact: bool = True,
    metadata: dict | None = None,
) -> MeasurementSeries:
    """Evaluate the forward model on a stage-position grid and add
    reproducible pseudo-random noise.

    The same seed always produces the identical series. Per-point
    uncertainties are recorded whenever the noise spec is non-degenerate.
    Grid points exactly at the truth's contact position are flagged as
    contact points unless ``mark_contact`` is off.
    """
    grid = np.asarray(grid, dtype=float)
    c_true = np.asarray(model_capacitance(grid, truth, geometry), dtype=float)

    rng = np.random.default_rng(seed)
    c_noisy = c_true.copy()
    if noise.fractional_sigma > 0:
        c_noisy = c_noisy * (1.0 + noise.fractional_sigma * rng.standard_normal(grid.size))
    if noise.additive_floor > 0:
        c_noisy = c_noisy + noise.additive_floor * rng.standard_normal(grid.size)
    if np.any(c_noisy <= 0):
        raise InvalidParameterError(
            "noise drove a synthetic capacitance non-positive; reduce the noise level"
        )

    if noise.fractional_sigma > 0 or noise.additive_floor > 0:
        sigmas = np.sqrt((noise.fractional_sigma * c_true) ** 2 + noise.additive_floor**2)
    else:
        sigmas = None

    points = [
        MeasurementPoint(
            stage_position=float(zi),
            capacitance=float(ci),
            sigma=None if sigmas is None else float(si),
            is_contact=bool(mark_contact and zi == truth.d_contact),
        )
        for zi, ci, si in zip(grid, c_noisy, sigmas if sigmas is not None else c_noisy)
    ]
    meta = {
        "synthetic": True,
        "seed": int(seed),
        "noise_fractional_sigma": noise.fractional_sigma,
        "noise_additive_floor": noise.additive_floor,
        "truth_d_contact_m": truth.d_contact,
        "truth_b_m": truth.b,
        "truth_scale": truth.scale,
        "truth_c_stray_F": truth.c_stray,
    }
    if metadata:
        meta.update(metadata)
    return MeasurementSeries(points=points, geometry=geometry, metadata=meta)


class OffsetCalibrator(BaseEstimator, RegressorMixin):
    """Scikit-learn style estimator for the distance-offset calibration.

    Parameters
    ----------
    geometry : {"parallel", "sphere"}
        Forward-model geometry.
    area : float
        Plate area in m^2 (parallel geometry).
    radius : float
        Sphere radius in m (sphere geometry).
    b0, d_contact0, scale0, c_stray0 : float
        Initial model parameters (SI units).
    fit_contact, fit_scale, fit_stray : bool
        Which parameters besides the offset are free.
    roughness : float
        Surface-roughness length subtracted from the extracted offset in the
        fit metadata.

    Attributes
    ----------
    offset_ : float
        Fitted distance offset in metres.
    offset_stderr_ : float
        Standard error of the offset from the fit covariance.
    result_ : FitResult
        Full fit diagnostics.
    """

    def __init__(
        self,
        geometry="parallel",
        area=1e-4,
        radius=1e-2,
        b0=1e-7,
        d_contact0=0.0,
        scale0=1.0,
        c_stray0=0.0,
        fit_contact=False,
        fit_scale=True,
        fit_stray=False,
        roughness=0.0,
        max_iter=500,
    ):
        self.geometry = geometry
        self.area = area
        self.radius = radius
        self.b0 = b0
        self.d_contact0 = d_contact0
        self.scale0 = scale0
        self.c_stray0 = c_stray0
        self.fit_contact = fit_contact
        self.fit_scale = fit_scale
        self.fit_stray = fit_stray
        self.roughness = roughness
        self.max_iter = max_iter

    def _make_geometry(self):
        if self.geometry == "parallel":
            return ParallelPlate(area=self.area)
        if self.geometry == "sphere":
            return SpherePlate(radius=self.radius)
        raise InvalidParameterError(
            f"geometry must be 'parallel' or 'sphere', got {self.geometry!r}"
        )

    @staticmethod
    def _as_positions(X):
        X = check_array(X, ensure_2d=False, dtype=float)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise InvalidParameterError("X must be a single column of stage positions")
            X = X[:, 0]
        return X

    def fit(self, X, y, sigma=None):
        """Fit the calibration model.

        X holds stage positions in metres (1-D or single-column 2-D), y the
        measured capacitances in farads, sigma optional 1-sigma capacitance
        uncertainties used as weights.
        """
        z = self._as_positions(X)
        y = np.asarray(y, dtype=float).ravel()
        if sigma is not None:
            sigma = np.asarray(sigma, dtype=float).ravel()
        order = np.argsort(z)
        points = [
            MeasurementPoint(
                stage_position=float(z[i]),
                capacitance=float(y[i]),
                sigma=None if sigma is None else float(sigma[i]),
            )
            for i in order
        ]
        series = MeasurementSeries(points=points, geometry=self._make_geometry())

        fixed = set()
        if not self.fit_contact:
            fixed.add("d_contact")
        if not self.fit_scale:
            fixed.add("scale")
        if not self.fit_stray:
            fixed.add("c_stray")
        init = CalibModel(
            d_contact=self.d_contact0, b=self.b0, scale=self.scale0, c_stray=self.c_stray0
        )
        result = fit_offset(
            series, init, fixed, roughness=self.roughness, max_iter=self.max_iter
        )

        self.result_ = result
        self.offset_ = result.model.b
        self.d_contact_ = result.model.d_contact
        self.scale_ = result.model.scale
        self.c_stray_ = result.model.c_stray
        self.converged_ = result.converged
        self.n_iter_ = result.n_iterations
        if "b" in result.free_parameters:
            i = result.free_parameters.index("b")
            self.offset_stderr_ = float(np.sqrt(result.covariance[i, i]))
        else:
            self.offset_stderr_ = 0.0
        return self

    def predict(self, X):
        """Model capacitance (farads) at the given stage positions."""
        check_is_fitted(self, "result_")
        z = self._as_positions(X)
        return np.asarray(model_capacitance(z, self.result_.model, self._make_geometry()))
