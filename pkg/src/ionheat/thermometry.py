"""Resolved-sideband thermometry of a thermal motional state.

Convention: a sideband of order k driven for time t flips the spin of level
pair (m, m+k) with probability sin^2(Omega_{m,m+k} t), so ``Omega`` here is
half the usual full Rabi frequency.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, EstimatorDomainError, NoSignalError

DEFAULT_TRUNCATION_EPS = 1e-12


@dataclass(frozen=True)
class ThermalDistribution:
    nbar: float
    truncation_eps: float = DEFAULT_TRUNCATION_EPS

    def __post_init__(self):
        if not self.nbar >= 0:
            raise DomainError(f"nbar must be non-negative, got {self.nbar}")
        if not 0 < self.truncation_eps < 1:
            raise DomainError("truncation_eps must lie in (0, 1)")

    @property
    def ratio(self) -> float:
        """Boltzmann factor nbar / (1 + nbar) between successive levels."""
        return self.nbar / (1.0 + self.nbar)

    def max_level(self) -> int:
        """Smallest M with sum_{m<=M} P_m >= 1 - truncation_eps."""
        r = self.ratio
        if r == 0.0:
            return 0
        # cumulative sum is 1 - r^(M+1)
        return max(0, math.ceil(math.log(self.truncation_eps) / math.log(r)) - 1)

    def probabilities(self, n_levels: int | None = None) -> np.ndarray:
        if n_levels is None:
            n_levels = self.max_level() + 1
        m = np.arange(n_levels)
        if self.nbar == 0.0:
            p = np.zeros(n_levels)
            p[0] = 1.0
            return p
        return np.exp(m * math.log(self.ratio) - math.log1p(self.nbar))


def thermal_prob(dist: ThermalDistribution, m: int) -> float:
    if m < 0:
        raise DomainError(f"level index must be non-negative, got {m}")
    if dist.nbar == 0.0:
        return 1.0 if m == 0 else 0.0
    return math.exp(m * math.log(dist.ratio) - math.log1p(dist.nbar))


@dataclass(frozen=True)
class RabiCoupling:
    base_rabi: float
    lamb_dicke_eta: float = 0.2

    def __post_init__(self):
        if not self.base_rabi > 0:
            raise DomainError(f"base Rabi frequency must be positive, got {self.base_rabi}")
        if not self.lamb_dicke_eta > 0:
            raise DomainError("Lamb-Dicke parameter must be positive")
        if self.lamb_dicke_eta >= 1:
            warnings.warn(f"Lamb-Dicke parameter {self.lamb_dicke_eta} is outside 0 < eta < 1",
                          stacklevel=3)


@dataclass(frozen=True)
class SidebandPair:
    order_k: int
    strength_rsb: float
    strength_bsb: float
    sigma_rsb: float = 0.0
    sigma_bsb: float = 0.0

    def __post_init__(self):
        if int(self.order_k) != self.order_k or self.order_k < 1:
            raise DomainError(f"sideband order must be a positive integer, got {self.order_k}")
        for name in ("strength_rsb", "strength_bsb"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must be a probability, got {v}")
        for name in ("sigma_rsb", "sigma_bsb"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be non-negative")


def laguerre(n: int, alpha: float, x: float) -> float:
    """Generalised Laguerre polynomial L_n^(alpha)(x) by upward recurrence."""
    if n < 0:
        raise DomainError("Laguerre degree must be non-negative")
    if n == 0:
        return 1.0
    l_prev, l_cur = 1.0, 1.0 + alpha - x
    for m in range(2, n + 1):
        l_prev, l_cur = l_cur, ((2 * m - 1 + alpha - x) * l_cur - (m - 1 + alpha) * l_prev) / m
    return l_cur


def laguerre_range(n_max: int, alpha: float, x: float) -> np.ndarray:
    """[L_0^(alpha)(x), ..., L_{n_max}^(alpha)(x)] in one recurrence pass."""
    out = np.empty(n_max + 1)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 1.0 + alpha - x
    for m in range(2, n_max + 1):
        out[m] = ((2 * m - 1 + alpha - x) * out[m - 1] - (m - 1 + alpha) * out[m - 2]) / m
    return out


def _rabi_prefactor(eta, n, k):
    # eta^k sqrt(n!/(n+k)!) e^{-eta^2/2} in the log domain
    n = np.asarray(n, dtype=float)
    return np.exp(k * math.log(eta) + 0.5 * (gammaln(n + 1) - gammaln(n + k + 1)) - 0.5 * eta * eta)


def rabi_frequency(coupling: RabiCoupling, n: int, k: int) -> float:
    """Omega_{n,n+k}: coupling of |n> and |n+k> (equal to Omega_{n+k,n})."""
    if n < 0 or k < 0:
        raise DomainError("level and order must be non-negative")
    eta = coupling.lamb_dicke_eta
    return float(coupling.base_rabi * _rabi_prefactor(eta, n, k) * laguerre(n, k, eta * eta))


def rabi_between(coupling: RabiCoupling, n1: int, n2: int) -> float:
    lo, hi = min(n1, n2), max(n1, n2)
    return rabi_frequency(coupling, lo, hi - lo)


def rabi_ladder(coupling: RabiCoupling, k: int, n_max: int) -> np.ndarray:
    """[Omega_{0,k}, Omega_{1,1+k}, ..., Omega_{n_max,n_max+k}]."""
    eta = coupling.lamb_dicke_eta
    n = np.arange(n_max + 1)
    return coupling.base_rabi * _rabi_prefactor(eta, n, k) * laguerre_range(n_max, k, eta * eta)


def sideband_weights(dist: ThermalDistribution, coupling: RabiCoupling, k: int, side: str):
    """Level populations and Rabi frequencies entering a sideband sum.

    Returns (P, Omega) arrays over the initial levels that can make the
    transition: m >= k for the red sideband (to m-k), m >= 0 for the blue one
    (to m+k), each truncated once its share of the populations is captured to
    within ``truncation_eps``.
    """
    if k < 0:
        raise DomainError("sideband order must be non-negative")
    M = dist.max_level()
    if side == "blue":
        return dist.probabilities(M + 1), rabi_ladder(coupling, k, M)
    if side == "red":
        if dist.nbar == 0.0 and k > 0:
            return np.zeros(0), np.zeros(0)
        # initial level m >= k couples to m-k: Omega_{m-k, m}. The populations
        # P_k, P_{k+1}, ... are a geometric series of their own, truncated by the
        # same relative rule, so levels k .. k+M are kept.
        return dist.probabilities(M + k + 1)[k:], rabi_ladder(coupling, k, M)
    raise DomainError(f"side must be 'red' or 'blue', got {side!r}")


def sideband_strength(dist: ThermalDistribution, coupling: RabiCoupling, k: int, t: float,
                      side: str) -> float:
    if not t >= 0:
        raise DomainError(f"probe time must be non-negative, got {t}")
    p, om = sideband_weights(dist, coupling, k, side)
    if p.size == 0:
        return 0.0
    return float(np.sum(p * np.sin(om * t) ** 2))


@dataclass(frozen=True)
class NbarEstimate:
    nbar: float
    sigma_nbar: float
    ratio: float
    sigma_ratio: float
    order_k: int


def nbar_from_ratio(pair: SidebandPair) -> NbarEstimate:
    """Mean occupation from the red/blue sideband strength ratio.

    sigma_nbar is first-order propagation of independent strength errors. For
    k > 1 the derivative diverges at R = 0, in which case sigma is infinite.
    """
    k = pair.order_k
    if pair.strength_bsb == 0.0:
        raise NoSignalError("blue-sideband strength is zero; no signal to form a ratio")
    R = pair.strength_rsb / pair.strength_bsb
    if R >= 1.0:
        raise EstimatorDomainError(
            f"sideband ratio R_{k} = {R:.4g} >= 1: nbar too large for order k = {k}; "
            f"use a higher sideband order (k closest to nbar maximises sensitivity)")
    sigma_R = math.hypot(pair.sigma_rsb, R * pair.sigma_bsb) / pair.strength_bsb
    r = R ** (1.0 / k)
    nbar = r / (1.0 - r)
    if R == 0.0:
        dn_dR = 1.0 if k == 1 else math.inf
    else:
        dn_dR = (1.0 / k) * R ** (1.0 / k - 1.0) / (1.0 - r) ** 2
    sigma = dn_dR * sigma_R if sigma_R > 0 else 0.0
    return NbarEstimate(nbar, sigma, R, sigma_R, k)
