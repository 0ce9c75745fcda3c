"""Damped Gauss-Newton minimizer for small dense least-squares problems.

The normal equations are damped with the Marquardt diagonal, which makes
the step scale-free in the parameters, so wildly different parameter
magnitudes (metres next to farads) need no manual rescaling. The damping
parameter grows by ``lam_up`` whenever a trial step fails to reduce the
cost and shrinks by ``lam_down`` on success.

Convergence is declared when either the scaled gradient infinity norm
drops below ``gtol`` or the diagonally scaled step norm drops below
``xtol``; both measures are dimensionless.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError

_TINY = 1e-300


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    grad_norm: float
    n_iter: int
    converged: bool
    message: str


def _numeric_jacobian(residual, x, r0, x_scale):
    n, p = r0.size, x.size
    J = np.empty((n, p))
    step = np.sqrt(np.finfo(float).eps) * np.maximum(np.abs(x), x_scale)
    for j in range(p):
        xp = x.copy()
        xp[j] += step[j]
        J[:, j] = (residual(xp) - r0) / step[j]
    return J


def _scaled_grad_norm(g, diag, cost):
    # Gradient measured in the (sqrt of the) natural curvature scale of each
    # parameter, relative to the residual magnitude.
    denom = np.sqrt(np.maximum(diag, _TINY))
    return float(np.max(np.abs(g) / denom) / max(np.sqrt(2.0 * cost), _TINY))


def least_squares_lm(
    residual,
    x0,
    jac=None,
    *,
    max_iter: int = 500,
    gtol: float = 1e-10,
    xtol: float = 1e-12,
    lam0: float = 1e-3,
    lam_up: float = 10.0,
    lam_down: float = 3.0,
    lam_max: float = 1e14,
    x_scale=None,
) -> LMResult:
    """Minimize 0.5 * ||residual(x)||^2 starting from x0.

    ``jac(x)`` returns the residual Jacobian; omit it to fall back on
    forward differences with relative steps of sqrt(machine eps) against
    ``x_scale`` (defaults to max(|x0|, 1) per component). Trial steps that
    produce non-finite residuals are rejected like any cost increase.

    Raises ConvergenceError after ``max_iter`` iterations without meeting a
    convergence criterion; the error's ``best`` attribute carries the best
    LMResult found.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x_scale is None:
        x_scale = np.maximum(np.abs(x), 1.0)
    else:
        x_scale = np.asarray(x_scale, dtype=float)

    r = np.asarray(residual(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise ConvergenceError("residual is not finite at the starting point")
    cost = 0.5 * float(r @ r)

    lam = lam0
    grad_norm = np.inf
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        J = jac(x) if jac is not None else _numeric_jacobian(residual, x, r, x_scale)
        g = J.T @ r
        A = J.T @ J
        diag = np.diag(A).copy()
        grad_norm = _scaled_grad_norm(g, diag, cost) if cost > 0 else 0.0
        if grad_norm < gtol or cost == 0.0:
            return LMResult(x, cost, grad_norm, n_iter, True, "gradient tolerance reached")

        # Damp with the Marquardt diagonal; guard exactly-zero entries so a
        # momentarily insensitive parameter cannot make the system singular.
        diag_floor = np.maximum(diag, 1e-14 * max(diag.max(), _TINY))
        stepped = False
        while lam <= lam_max:
            M = A + lam * np.diag(diag_floor)
            try:
                dx = np.linalg.solve(M, -g)
            except np.linalg.LinAlgError:
                dx = np.linalg.lstsq(M, -g, rcond=None)[0]

            scaled_step = np.linalg.norm(np.sqrt(diag_floor) * dx)
            scaled_x = np.linalg.norm(np.sqrt(diag_floor) * x)
            if scaled_step <= xtol * (scaled_x + xtol):
                return LMResult(x, cost, grad_norm, n_iter, True, "step tolerance reached")

            r_new = np.asarray(residual(x + dx), dtype=float)
            if np.all(np.isfinite(r_new)):
                cost_new = 0.5 * float(r_new @ r_new)
                if cost_new < cost:
                    x = x + dx
                    r = r_new
                    cost = cost_new
                    lam = max(lam / lam_down, 1e-14)
                    stepped = True
                    break
            lam *= lam_up
        if not stepped:
            best = LMResult(x, cost, grad_norm, n_iter, False, "damping limit reached")
            raise ConvergenceError(
                f"no acceptable step found (damping exceeded {lam_max:g})", best=best
            )

    best = LMResult(x, cost, grad_norm, max_iter, False, "iteration cap reached")
    raise ConvergenceError(
        f"least-squares fit did not converge within {max_iter} iterations", best=best
    )
