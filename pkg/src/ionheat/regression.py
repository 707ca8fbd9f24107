"""Weighted straight-line least squares via the closed-form normal equations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError


@dataclass(frozen=True)
class LineFit:
    slope: float
    sigma_slope: float
    intercept: float
    sigma_intercept: float
    chi2: float
    chi2_reduced: float
    covariance: np.ndarray


def weighted_line_fit(x, y, sigma=None) -> LineFit:
    """Fit y = intercept + slope * x with weights 1/sigma^2.

    With ``sigma=None`` all weights are 1 and parameter errors are scaled by
    the residual variance (ordinary least squares); otherwise the errors are
    those of the weighted covariance, taking ``sigma`` as absolute.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 2 or np.ptp(x) == 0:
        raise DegeneracyError("straight-line fit needs at least two distinct abscissae")
    w = np.ones(n) if sigma is None else 1.0 / np.asarray(sigma, dtype=float) ** 2
    # centre x for numerical stability; transform back afterwards
    xm = np.sum(w * x) / np.sum(w)
    xc = x - xm
    S = np.sum(w)
    Sxx = np.sum(w * xc * xc)
    if Sxx <= 0:
        raise DegeneracyError("singular normal equations")
    slope = np.sum(w * xc * y) / Sxx
    ybar = np.sum(w * y) / S
    intercept = ybar - slope * xm
    resid = y - intercept - slope * x
    chi2 = float(np.sum(w * resid**2))
    dof = n - 2
    chi2_red = chi2 / dof if dof > 0 else math.nan
    var_slope = 1.0 / Sxx
    var_ybar = 1.0 / S
    var_int = var_ybar + xm * xm * var_slope
    cov_is = -xm * var_slope
    cov = np.array([[var_int, cov_is], [cov_is, var_slope]])
    if sigma is None:
        cov = cov * (chi2_red if dof > 0 else 0.0)
    return LineFit(float(slope), math.sqrt(cov[1, 1]), float(intercept), math.sqrt(cov[0, 0]),
                   chi2, chi2_red, cov)
