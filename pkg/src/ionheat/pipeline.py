"""Monte Carlo model of the sideband heating-rate measurement and its analysis.

Forward model: at each Raman detuning the spin-flip probability is the
thermal average of detuned Rabi flopping on the chosen sideband; the observed
P_down is a binomial estimate from a finite number of shots. Analysis mirrors
the experiment: each scan is fitted with a Gaussian dip, the dip depths give
the sideband strengths, their ratio gives nbar, and nbar(t) is fitted with a
weighted straight line.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core import format_exact
from .errors import DegeneracyError, DomainError, FitError, NoSignalError
from .regression import LineFit, weighted_line_fit
from .thermometry import (NbarEstimate, RabiCoupling, SidebandPair, ThermalDistribution,
                          nbar_from_ratio, sideband_weights)

# dip half-width scale used to check that a grid spans the feature
LINEWIDTH_FACTOR = 2.0


def nominal_linewidth(probe_time: float) -> float:
    """Rough Gaussian width (rad/s) of a Fourier-limited sideband dip."""
    return LINEWIDTH_FACTOR / probe_time


def default_grid(probe_time: float, n_points: int = 41, half_span: float = 10.0) -> np.ndarray:
    """Symmetric detuning grid of +-half_span/probe_time (rad/s)."""
    return np.linspace(-half_span / probe_time, half_span / probe_time, n_points)


@dataclass(frozen=True)
class ScanConfig:
    detuning_grid: tuple
    probe_time_t: float
    shots_per_point: int = 200
    sideband_order_k: int = 1
    side: str = "blue"
    rng_seed: int = 0

    def __post_init__(self):
        grid = np.asarray(self.detuning_grid, dtype=float)
        object.__setattr__(self, "detuning_grid", tuple(float(x) for x in grid))
        if not self.probe_time_t > 0:
            raise DomainError("probe time must be positive")
        if int(self.shots_per_point) != self.shots_per_point or self.shots_per_point < 1:
            raise DomainError("shots_per_point must be a positive integer")
        if int(self.sideband_order_k) != self.sideband_order_k or self.sideband_order_k < 1:
            raise DomainError("sideband order must be a positive integer")
        if self.side not in ("red", "blue"):
            raise DomainError(f"side must be 'red' or 'blue', got {self.side!r}")
        if grid.size < 5:
            raise DomainError("detuning grid needs at least 5 points")
        need = 3 * nominal_linewidth(self.probe_time_t)
        if grid.min() > -need or grid.max() < need:
            raise DomainError(f"detuning grid must span +-{need:.4g} rad/s (3 linewidths)")

    def replace(self, **kw) -> "ScanConfig":
        d = dict(self.__dict__)
        d.update(kw)
        return ScanConfig(**d)


@dataclass(frozen=True)
class RamanScan:
    detuning: np.ndarray
    p_down: np.ndarray
    n_shots: np.ndarray
    exact: bool = False

    def __post_init__(self):
        for name in ("detuning", "p_down", "n_shots"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))
        if not (self.detuning.shape == self.p_down.shape == self.n_shots.shape):
            raise DomainError("scan arrays must have equal length")
        if np.any((self.p_down < 0) | (self.p_down > 1)):
            raise DomainError("P_down estimates must lie in [0, 1]")

    @property
    def points(self):
        return list(zip(self.detuning.tolist(), self.p_down.tolist(), self.n_shots.tolist()))

    def standard_errors(self) -> np.ndarray:
        """Binomial standard error sqrt(p(1-p)/N) of each point (0 for exact scans)."""
        if self.exact:
            return np.zeros_like(self.p_down, dtype=float)
        return np.sqrt(self.p_down * (1 - self.p_down) / self.n_shots)


def scan_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for scan number ``stream`` under a master seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))


def flip_probability(nbar: float, coupling: RabiCoupling, k: int, side: str,
                     probe_time: float, detuning) -> np.ndarray:
    """Thermally averaged detuned Rabi flopping on a sideband.

    With Omega the half-Rabi frequency of ``thermometry``, the full Rabi
    frequency is 2*Omega and each level contributes
    (2 Omega)^2 / ((2 Omega)^2 + D^2) * sin^2(sqrt((2 Omega)^2 + D^2) t / 2),
    which reduces to sin^2(Omega t) on resonance.
    """
    p, om = sideband_weights(ThermalDistribution(nbar), coupling, k, side)
    det = np.atleast_1d(np.asarray(detuning, dtype=float))
    if p.size == 0:
        return np.zeros_like(det)
    full2 = (2.0 * om[None, :]) ** 2
    gen2 = full2 + det[:, None] ** 2
    lorentz = np.divide(full2, gen2, out=np.zeros_like(gen2), where=gen2 > 0)
    flop = lorentz * np.sin(0.5 * np.sqrt(gen2) * probe_time) ** 2
    return flop @ p


def simulate_scan(true_nbar: float, coupling: RabiCoupling, cfg: ScanConfig,
                  exact: bool = False, rng: np.random.Generator | None = None) -> RamanScan:
    det = np.asarray(cfg.detuning_grid)
    p_flip = flip_probability(true_nbar, coupling, cfg.sideband_order_k, cfg.side,
                              cfg.probe_time_t, det)
    p_down = np.clip(1.0 - p_flip, 0.0, 1.0)
    n = np.full(det.shape, int(cfg.shots_per_point))
    if exact:
        return RamanScan(det, p_down, n, exact=True)
    if rng is None:
        rng = scan_rng(cfg.rng_seed)
    counts = rng.binomial(n, p_down)
    return RamanScan(det, counts / n, n)


@dataclass(frozen=True)
class DipFit:
    depth: float
    sigma_depth: float
    center: float
    sigma_center: float
    width: float
    sigma_width: float
    chi2: float
    dof: int
    covariance: np.ndarray = field(repr=False, default=None)


def gaussian_dip(det, depth, center, width):
    return 1.0 - depth * np.exp(-0.5 * ((np.asarray(det) - center) / width) ** 2)


def _dip_residuals(theta, x, y):
    return gaussian_dip(x, *theta) - y


def _dip_jacobian(theta, x, y):
    a, mu, s = theta
    u = (x - mu) / s
    g = np.exp(-0.5 * u * u)
    return np.column_stack([-g, -a * g * u / s, -a * g * u * u / s])


def _dip_hessians(theta, x):
    """Second derivatives of the model, shape (n, 3, 3)."""
    a, mu, s = theta
    u = (x - mu) / s
    g = np.exp(-0.5 * u * u)
    h = np.zeros((x.size, 3, 3))
    h[:, 0, 1] = h[:, 1, 0] = -g * u / s
    h[:, 0, 2] = h[:, 2, 0] = -g * u * u / s
    h[:, 1, 1] = -a * g * (u * u - 1.0) / s**2
    h[:, 1, 2] = h[:, 2, 1] = -a * g * (u**3 - 2.0 * u) / s**2
    h[:, 2, 2] = -a * g * (u**4 - 3.0 * u * u) / s**2
    return h


def fit_gaussian_dip(scan: RamanScan) -> DipFit:
    """Least-squares Gaussian dip fit, P_down = 1 - A exp(-(D - mu)^2 / 2 s^2).

    Points are fitted with equal weight; parameter errors come from the
    Jacobian (and model curvature) at the optimum. For sampled scans each
    point is taken as normal with binomial variance p(1-p)/N (p from the rule
    of succession, so that saturated points keep a finite variance) and the
    covariance is the corresponding sandwich estimate. Exact scans scale the
    inverse Hessian by the residual variance instead.
    """
    x_raw = np.asarray(scan.detuning, dtype=float)
    y = np.asarray(scan.p_down, dtype=float)
    # fit in detuning units of order one so that the Jacobian columns are balanced
    x_scale = float(np.max(np.abs(x_raw))) or 1.0
    x = x_raw / x_scale
    if x.size < 5:
        raise NoSignalError(f"scan has {x.size} points; at least 5 needed")
    i0 = int(np.argmin(y))
    a0 = 1.0 - y[i0]
    se = scan.standard_errors()
    if not a0 > max(2.0 * float(np.median(se)), 1e-12):
        raise NoSignalError(f"no visible dip: depth {a0:.3g} vs median standard error "
                            f"{np.median(se):.3g}", {"depth_estimate": a0})
    spacing = float(np.median(np.diff(np.sort(x))))
    span = float(x.max() - x.min())
    below = np.count_nonzero(y < 1.0 - 0.5 * a0)
    s0 = max(below * spacing / 2.355, spacing)

    best = None
    for scale in (1.0, 0.5, 2.0):
        try:
            res = optimize.least_squares(_dip_residuals, [a0, x[i0], s0 * scale],
                                         jac=_dip_jacobian, args=(x, y), method="lm",
                                         xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
        except ValueError:
            continue
        if res.status <= 0:
            continue
        rss = float(np.sum(res.fun**2))
        if best is None or rss < best[0]:
            best = (rss, res)
    if best is None:
        raise FitError("Gaussian dip fit did not converge",
                       {"residual_rms": float(np.std(y - np.mean(y))), "n_points": int(x.size)})
    rss, res = best
    theta = np.array(res.x, dtype=float)
    theta[2] = abs(theta[2])
    # Newton polish on the gradient: near the optimum the sum of squares is flat to
    # within rounding, so steps are accepted while the gradient norm shrinks
    r = _dip_residuals(theta, x, y)
    J = _dip_jacobian(theta, x, y)
    grad = J.T @ r
    for _ in range(4):
        H = J.T @ J + np.einsum("i,ijk->jk", r, _dip_hessians(theta, x))
        try:
            trial = theta - np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            break
        r_t = _dip_residuals(trial, x, y)
        J_t = _dip_jacobian(trial, x, y)
        g_t = J_t.T @ r_t
        if not np.linalg.norm(g_t) < np.linalg.norm(grad):
            break
        theta, r, J, grad = trial, r_t, J_t, g_t
    rss = float(np.sum(_dip_residuals(theta, x, y) ** 2))
    a, mu, s = theta
    s = abs(s)
    if s < spacing / 10 or s > 10 * span:
        raise FitError(f"degenerate dip width {s * x_scale:.3g} rad/s (grid spacing "
                       f"{spacing * x_scale:.3g}, span {span * x_scale:.3g})",
                       {"width": s * x_scale, "residual_rms": math.sqrt(rss / x.size)})

    theta = np.array([a, mu, s])
    J = _dip_jacobian(theta, x, y)
    resid = gaussian_dip(x, *theta) - y
    dof = x.size - 3
    # full Hessian of the sum of squares: the lineshape is not exactly Gaussian,
    # so residual-curvature terms are not negligible
    H = J.T @ J + np.einsum("i,ijk->jk", resid, _dip_hessians(theta, x))
    try:
        h_inv = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        raise FitError("singular Hessian at the optimum", {"residual_rms": math.sqrt(rss / x.size)})
    if np.any(np.linalg.eigvalsh(0.5 * (H + H.T)) <= 0):
        raise FitError("fit optimum is not a minimum", {"residual_rms": math.sqrt(rss / x.size)})
    if scan.exact:
        cov = h_inv * (rss / dof if dof > 0 else 0.0)
        chi2 = rss
    else:
        n = scan.n_shots
        pt = (y * n + 1.0) / (n + 2.0)
        var = pt * (1.0 - pt) / n
        cov = h_inv @ (J.T * var) @ J @ h_inv
        chi2 = float(np.sum(resid**2 / var))
    err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    if not (-3 * err[0] <= a <= 1.0 + 3 * err[0]):
        raise FitError(f"fitted depth {a:.4g} outside [0, 1]", {"depth": a, "sigma_depth": err[0]})
    a = min(max(a, 0.0), 1.0)
    D = np.array([1.0, x_scale, x_scale])
    cov = cov * np.outer(D, D)
    err = err * D
    return DipFit(float(a), float(err[0]), float(mu * x_scale), float(err[1]), float(s * x_scale),
                  float(err[2]), float(chi2), int(dof), cov)


def extract_nbar(rsb_scan: RamanScan, bsb_scan: RamanScan, k: int) -> NbarEstimate:
    red = fit_gaussian_dip(rsb_scan)
    blue = fit_gaussian_dip(bsb_scan)
    pair = SidebandPair(k, red.depth, blue.depth, red.sigma_depth, blue.sigma_depth)
    return nbar_from_ratio(pair)


@dataclass(frozen=True)
class HeatingDataset:
    delays: np.ndarray
    nbar: np.ndarray
    sigma_nbar: np.ndarray

    def __post_init__(self):
        for name in ("delays", "nbar", "sigma_nbar"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.delays.shape == self.nbar.shape == self.sigma_nbar.shape):
            raise DomainError("dataset arrays must have equal length")
        if np.any(self.delays < 0):
            raise DomainError("delays must be non-negative")
        if np.unique(self.delays).size != self.delays.size:
            raise DegeneracyError("dataset delays must be distinct")

    @property
    def points(self):
        return list(zip(self.delays.tolist(), self.nbar.tolist(), self.sigma_nbar.tolist()))


@dataclass(frozen=True)
class FitResult:
    ndot: float
    sigma_ndot: float
    nbar0: float
    sigma_nbar0: float
    chi2_reduced: float
    n_points: int
    covariance: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "ndot_per_s": self.ndot, "sigma_ndot_per_s": self.sigma_ndot,
            "ndot_per_ms": self.ndot * 1e-3, "sigma_ndot_per_ms": self.sigma_ndot * 1e-3,
            "nbar0": self.nbar0, "sigma_nbar0": self.sigma_nbar0,
            "chi2_reduced": self.chi2_reduced, "n_points": self.n_points,
        }


def fit_heating_rate(data: HeatingDataset) -> FitResult:
    """Weighted straight line nbar(t) = nbar0 + ndot t with weights 1/sigma^2."""
    if data.delays.size < 2:
        raise DegeneracyError(f"need at least 2 distinct delays, got {data.delays.size}")
    if not np.all(np.isfinite(data.sigma_nbar)) or np.any(data.sigma_nbar <= 0):
        raise DomainError("nbar uncertainties must be finite and positive")
    line: LineFit = weighted_line_fit(data.delays, data.nbar, data.sigma_nbar)
    return FitResult(line.slope, line.sigma_slope, line.intercept, line.sigma_intercept,
                     line.chi2_reduced, int(data.delays.size), line.covariance)


@dataclass(frozen=True)
class ClosedLoopResult:
    fit: FitResult
    dataset: HeatingDataset
    scans: list = field(repr=False, default_factory=list)


def simulate_delay_scans(true_nbar0: float, true_ndot: float, delays, coupling: RabiCoupling,
                         cfg: ScanConfig, exact: bool = False):
    """Red and blue scans at each delay; scan streams derive from (cfg.rng_seed, index)."""
    out = []
    for i, t in enumerate(delays):
        nb = true_nbar0 + true_ndot * float(t)
        rsb = simulate_scan(nb, coupling, cfg.replace(side="red"), exact,
                            None if exact else scan_rng(cfg.rng_seed, 2 * i))
        bsb = simulate_scan(nb, coupling, cfg.replace(side="blue"), exact,
                            None if exact else scan_rng(cfg.rng_seed, 2 * i + 1))
        out.append((float(t), rsb, bsb))
    return out


def analyze_scans(scans, k: int) -> HeatingDataset:
    d, n, s = [], [], []
    for t, rsb, bsb in scans:
        est = extract_nbar(rsb, bsb, k)
        d.append(t)
        n.append(est.nbar)
        s.append(est.sigma_nbar)
    return HeatingDataset(d, n, s)


def closed_loop(true_nbar0: float, true_ndot: float, delays, coupling: RabiCoupling,
                cfg: ScanConfig, exact: bool = False) -> ClosedLoopResult:
    scans = simulate_delay_scans(true_nbar0, true_ndot, delays, coupling, cfg, exact)
    data = analyze_scans(scans, cfg.sideband_order_k)
    return ClosedLoopResult(fit_heating_rate(data), data, scans)


@dataclass(frozen=True)
class CoverageSummary:
    n_runs: int
    n_failed: int
    mean_ndot: float
    relative_bias: float
    coverage_1sigma: float
    ndot: np.ndarray = field(repr=False, default=None)
    sigma_ndot: np.ndarray = field(repr=False, default=None)
    seeds: np.ndarray = field(repr=False, default=None)


def coverage_study(true_nbar0: float, true_ndot: float, delays, coupling: RabiCoupling,
                   cfg: ScanConfig, seeds) -> CoverageSummary:
    """Repeat :func:`closed_loop` over seeds; bias and 1-sigma coverage of ndot."""
    seeds = [int(s) for s in seeds]
    vals, errs, ok, failed = [], [], [], 0
    for seed in seeds:
        try:
            r = closed_loop(true_nbar0, true_ndot, delays, coupling, cfg.replace(rng_seed=int(seed)))
        except (FitError, DomainError, ArithmeticError):
            failed += 1
            continue
        vals.append(r.fit.ndot)
        errs.append(r.fit.sigma_ndot)
        ok.append(seed)
    vals, errs = np.array(vals), np.array(errs)
    mean = float(vals.mean()) if vals.size else math.nan
    cover = float(np.mean(np.abs(vals - true_ndot) <= errs)) if vals.size else math.nan
    return CoverageSummary(len(seeds), failed, mean, (mean - true_ndot) / true_ndot, cover,
                           vals, errs, np.array(ok, dtype=int))


# --- CSV I/O ---------------------------------------------------------------

SCAN_HEADER = ("detuning_rad_s", "P_down", "n_shots")
DATASET_HEADER = ("delay_ms", "nbar", "sigma_nbar")


def _s_to_ms(x):
    return x * 1e3


def _ms_to_s(x):
    return x * 1e-3


def write_scan_csv(scan: RamanScan, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCAN_HEADER)
        for d, p, n in scan.points:
            w.writerow([repr(d), repr(p), str(int(n))])


def _read_rows(path, header):
    from .errors import ParseError

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise ParseError("empty file", path, 1) from None
        if tuple(h.strip() for h in first) != header:
            raise ParseError(f"expected header {','.join(header)}", path, 1)
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, reader.line_num)
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ParseError(f"non-numeric field in {row}", path, reader.line_num) from None
    return rows


def read_scan_csv(path) -> RamanScan:
    rows = _read_rows(path, SCAN_HEADER)
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    try:
        return RamanScan(arr[:, 0], arr[:, 1], arr[:, 2].astype(int))
    except DomainError as exc:
        from .errors import SchemaError

        raise SchemaError(str(exc), path) from None


def write_dataset_csv(data: HeatingDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATASET_HEADER)
        for t, n, s in data.points:
            w.writerow([format_exact(t, _s_to_ms, _ms_to_s), repr(n), repr(s)])


def read_dataset_csv(path) -> HeatingDataset:
    rows = _read_rows(path, DATASET_HEADER)
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    return HeatingDataset(_ms_to_s(arr[:, 0]), arr[:, 1], arr[:, 2])
