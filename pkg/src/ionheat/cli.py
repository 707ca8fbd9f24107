"""``ionheat`` command line.

Each subcommand resolves its configuration block (file values overridden by
flags), converts units to SI, runs the library, writes CSV data files to
``--out-dir`` and a JSON report that embeds the resolved configuration and
seed. The report (``--format json``) or the main table (``--format csv``)
also goes to stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config_file, resolve_block
from .core import (NoiseSpectrum, get_species, hz_to_rad_s, load_bundled_traps, load_trap_table,
                   m_to_um, mhz_to_rad_s, per_ms_to_per_s, per_s_to_per_ms, spectrum_eval,
                   um_to_m)
from .errors import (ConfigError, DegeneracyError, DomainError, EstimatorDomainError, FitError,
                     IonHeatError)
from .heating import (JohnsonModel, PatchModel, heating_rate_from_spectrum, johnson_rate,
                      patch_rate)
from .pipeline import (HeatingDataset, ScanConfig, analyze_scans, coverage_study, default_grid,
                       extract_nbar, fit_heating_rate, read_dataset_csv, read_scan_csv,
                       simulate_delay_scans, write_dataset_csv, write_scan_csv)
from .scaling import (ScalingPair, cross_experiment_compare, load_experiments, load_scaling_pairs,
                      model_ratio, pair_from_traps, size_exponent)
from .thermal_field import (ConductorHalfSpace, FieldPoint, green_numeric, heating_vs_distance,
                            locate_knee, skin_depth, write_curve_csv)
from .thermometry import RabiCoupling, rabi_frequency


class _Context:
    def __init__(self, args):
        self.source = args.config or "<flags>"
        self.run = load_config_file(args.config) if args.config else RunConfig()
        self.base_dir = Path(args.config).resolve().parent if args.config else Path.cwd()
        self.seed = args.seed if args.seed is not None else self.run.seed
        self.out_dir = Path(args.out_dir)
        self.fmt = args.format
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def block(self, name, overrides):
        return resolve_block(self.run, name, overrides, self.source)

    def path(self, p):
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


def _table_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write_table(path, header, rows) -> None:
    Path(path).write_text(_table_text(header, rows))


def _finish(ctx: _Context, command: str, cfg, results: dict, table=None, files=()) -> dict:
    report = {
        "command": command,
        "version": __version__,
        "schema_version": ctx.run.schema_version,
        "seed": ctx.seed,
        "config": cfg.model_dump(mode="json"),
        "results": results,
        "files": [str(f) for f in files],
    }
    rpath = ctx.out_dir / f"{command.replace('-', '_')}_report.json"
    rpath.write_text(json.dumps(report, indent=2) + "\n")
    if ctx.fmt == "csv" and table is not None:
        sys.stdout.write(_table_text(*table))
    else:
        sys.stdout.write(json.dumps(report, indent=2) + "\n")
    return report


# --- predict ---------------------------------------------------------------

def _predict_one(cfg) -> float:
    ion = get_species(cfg.ion)
    omega = mhz_to_rad_s(cfg.secular_MHz)
    if cfg.model == "johnson":
        b = cfg.johnson
        return johnson_rate(ion, omega, JohnsonModel(b.resistance_ohm, b.temperature_K,
                                                     um_to_m(b.distance_um)))
    if cfg.model == "patch":
        b = cfg.patch
        return patch_rate(ion, omega, PatchModel(b.coverage, um_to_m(b.patch_radius_um),
                                                 b.SV_V2_per_Hz, um_to_m(b.distance_um)))
    b = cfg.spectrum
    spec = NoiseSpectrum(b.kind, b.amplitude, b.exponent, mhz_to_rad_s(b.ref_MHz))
    cross = None
    if cfg.cross_term is not None:
        cross = {"Omega_T": mhz_to_rad_s(cfg.cross_term.drive_MHz),
                 "SE_sidebands": cfg.cross_term.SE_sidebands}
    return heating_rate_from_spectrum(ion, omega, spectrum_eval(spec, omega), cross)


def _with_value(cfg, parameter, value):
    if parameter == "secular_MHz":
        return cfg.model_copy(update={"secular_MHz": value})
    sub = getattr(cfg, cfg.model)
    if parameter not in type(sub).model_fields:
        raise ConfigError(f"sweep parameter {parameter!r} does not apply to model {cfg.model!r}")
    # round-trip through validation so swept values obey the same bounds
    data = cfg.model_dump()
    data[cfg.model][parameter] = value
    return type(cfg).model_validate(data)


def cmd_predict(ctx: _Context, args) -> dict:
    over = {"model": args.model, "ion": args.ion, "secular_MHz": args.secular_mhz}
    if args.sweep:
        name, _, vals = args.sweep.partition("=")
        try:
            over["sweep"] = {"parameter": name.strip(),
                             "values": [float(v) for v in vals.split(",") if v.strip()]}
        except ValueError:
            raise ConfigError(f"--sweep expects NAME=v1,v2,...; got {args.sweep!r}") from None
    cfg = ctx.block("predict", over)
    if cfg.sweep is None:
        ndot = _predict_one(cfg)
        results = {"ndot_per_s": ndot, "ndot_per_ms": per_s_to_per_ms(ndot)}
        return _finish(ctx, "predict", cfg, results,
                       (("ndot_per_s", "ndot_per_ms"), [(repr(ndot), repr(per_s_to_per_ms(ndot)))]))
    rows = []
    for v in cfg.sweep.values:
        try:
            point = _with_value(cfg, cfg.sweep.parameter, v)
        except Exception as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"sweep value {cfg.sweep.parameter}={v}: {exc}") from None
        rows.append((v, _predict_one(point)))
    header = (cfg.sweep.parameter, "ndot_per_s", "ndot_per_ms")
    table_rows = [(repr(v), repr(n), repr(per_s_to_per_ms(n))) for v, n in rows]
    path = ctx.out_dir / "predict_sweep.csv"
    _write_table(path, header, table_rows)
    results = {"sweep": [{cfg.sweep.parameter: v, "ndot_per_s": n} for v, n in rows]}
    return _finish(ctx, "predict", cfg, results, (header, table_rows), [path])


# --- thermal-field -----------------------------------------------------------

def cmd_thermal_field(ctx: _Context, args) -> dict:
    over = {"ion": args.ion, "secular_MHz": args.secular_mhz,
            "conductivity_S_per_m": args.conductivity, "temperature_K": args.temperature_k,
            "z_um": args.z_um, "compare_numeric": True if args.compare_numeric else None}
    cfg = ctx.block("thermal_field", over)
    ion = get_species(cfg.ion)
    omega = mhz_to_rad_s(cfg.secular_MHz)
    cond = ConductorHalfSpace(cfg.conductivity_S_per_m, cfg.temperature_K)
    if cfg.z_um is not None:
        z = np.array([um_to_m(v) for v in cfg.z_um])
    else:
        if not cfg.z_max_um > cfg.z_min_um:
            raise ConfigError(f"{ctx.source}: thermal_field: z_max_um must exceed z_min_um")
        z = np.geomspace(um_to_m(cfg.z_min_um), um_to_m(cfg.z_max_um), cfg.n_points)
    # the closed form checks every height first, so bad grids fail before any quadrature
    curve = heating_vs_distance(ion, cond, omega, z)
    numeric = None
    if cfg.compare_numeric:
        numeric = [green_numeric(cond, FieldPoint(float(zi), omega), cfg.rtol) for zi in z]
    path = ctx.out_dir / "thermal_field.csv"
    write_curve_csv(curve, path, numeric)
    delta = skin_depth(cond, omega)
    results = {"skin_depth_um": m_to_um(delta), "n_points": len(curve)}
    try:
        knee = locate_knee(curve)
        results["knee_um"] = m_to_um(knee)
        results["knee_over_delta"] = knee / delta
    except ValueError:
        results["knee_um"] = None
    if numeric is not None:
        rz = [abs(g.S_Ez - p.S_Ez) / p.S_Ez for g, p in zip(numeric, curve)]
        rr = [abs(g.S_Erho - p.S_Erho) / p.S_Erho for g, p in zip(numeric, curve)]
        results["max_rel_diff_z"] = max(rz)
        results["max_rel_diff_rho"] = max(rr)
    text = path.read_text().splitlines()
    table = (text[0].split(","), [line.split(",") for line in text[1:]])
    return _finish(ctx, "thermal-field", cfg, results, table, [path])


# --- analyze -------------------------------------------------------------------

def _load_manifest(ctx, path):
    path = ctx.path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from None
    if not isinstance(data, dict) or "scans" not in data:
        raise ConfigError(f"{path}: manifest needs a 'scans' list")
    base = path.parent
    scans = []
    for s in data["scans"]:
        if not isinstance(s, dict):
            raise ConfigError(f"{path}: each scan entry must be an object")
        s = dict(s)
        for key in ("rsb", "bsb"):
            if key in s and not Path(s[key]).is_absolute():
                s[key] = str(base / s[key])
        scans.append(s)
    return scans


def cmd_analyze(ctx: _Context, args) -> dict:
    over = {"dataset": args.dataset}
    if args.manifest:
        over["scans"] = _load_manifest(ctx, args.manifest)
    run_block = dict(ctx.run.analyze or {})
    if args.dataset or args.manifest:
        run_block.pop("dataset", None)
        run_block.pop("scans", None)
    ctx.run = ctx.run.model_copy(update={"analyze": run_block})
    cfg = ctx.block("analyze", over)
    files, per_delay = [], []
    if cfg.dataset is not None:
        data = read_dataset_csv(ctx.path(cfg.dataset))
    else:
        d, n, s = [], [], []
        for ref in cfg.scans:
            rsb = read_scan_csv(ctx.path(ref.rsb))
            bsb = read_scan_csv(ctx.path(ref.bsb))
            entry = {"delay_ms": ref.delay_ms}
            try:
                est = extract_nbar(rsb, bsb, ref.k)
            except (FitError, EstimatorDomainError, DomainError) as exc:
                entry.update(status="failed", error=type(exc).__name__, message=str(exc))
                per_delay.append(entry)
                print(f"warning: delay {ref.delay_ms} ms skipped: {exc}", file=sys.stderr)
                continue
            entry.update(status="ok", nbar=est.nbar, sigma_nbar=est.sigma_nbar, ratio=est.ratio)
            per_delay.append(entry)
            d.append(ref.delay_ms * 1e-3)
            n.append(est.nbar)
            s.append(est.sigma_nbar)
        data = HeatingDataset(d, n, s)
        table_path = ctx.out_dir / "nbar_table.csv"
        write_dataset_csv(data, table_path)
        files.append(table_path)
    fit = fit_heating_rate(data)
    t = np.linspace(0.0, float(data.delays.max()), 50)
    line_rows = [(repr(ti * 1e3), repr(fit.nbar0 + fit.ndot * ti)) for ti in t]
    line_path = ctx.out_dir / "fit_line.csv"
    _write_table(line_path, ("delay_ms", "nbar_fit"), line_rows)
    files.append(line_path)
    results = {"fit": fit.to_dict(), "points": [
        {"delay_ms": ti * 1e3, "nbar": ni, "sigma_nbar": si} for ti, ni, si in data.points]}
    if per_delay:
        results["per_delay"] = per_delay
    header = ("ndot_per_ms", "sigma_ndot_per_ms", "nbar0", "sigma_nbar0", "chi2_reduced", "n_points")
    f = fit.to_dict()
    return _finish(ctx, "analyze", cfg, results,
                   (header, [tuple(repr(f[h]) for h in header)]), files)


# --- scaling -----------------------------------------------------------------

def _parse_pair(text: str) -> dict:
    try:
        rs, rl, ds, dl = (float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"--pair expects RATE_SMALL,RATE_LARGE,SIZE_SMALL,SIZE_LARGE "
                          f"(per ms, um); got {text!r}") from None
    return {"label": "cli-pair", "rate_small_per_ms": rs, "rate_large_per_ms": rl,
            "size_small_um": ds, "size_large_um": dl}


def cmd_scaling(ctx: _Context, args) -> dict:
    over = {"alphas": args.alpha, "trap_table": args.trap_table}
    if args.pair:
        base = list((ctx.run.scaling or {}).get("extra_pairs", []))
        over["extra_pairs"] = base + [_parse_pair(p) for p in args.pair]
        if args.only_pairs:
            over["include_bundled_pairs"] = False
    cfg = ctx.block("scaling", over)
    pairs = []
    if cfg.include_bundled_pairs:
        pairs += load_scaling_pairs(ctx.path(cfg.pairs) if cfg.pairs else None)
    for p in cfg.extra_pairs:
        try:
            pairs.append(ScalingPair(
                per_ms_to_per_s(p.rate_small_per_ms), per_ms_to_per_s(p.rate_large_per_ms),
                um_to_m(p.size_small_um), um_to_m(p.size_large_um),
                per_ms_to_per_s(p.sigma_small_per_ms), per_ms_to_per_s(p.sigma_large_per_ms),
                label=p.label))
        except DomainError as exc:
            raise ConfigError(f"{ctx.source}: scaling.extra_pairs[{p.label}]: {exc}") from None
    if cfg.trap_pairs:
        traps = load_trap_table(ctx.path(cfg.trap_table)) if cfg.trap_table else load_bundled_traps()
        by_id = {t.id: t for t in traps}
        for small_id, large_id in cfg.trap_pairs:
            missing = [i for i in (small_id, large_id) if i not in by_id]
            if missing:
                raise ConfigError(f"{ctx.source}: scaling.trap_pairs: unknown trap ids {missing}")
            pairs.append(pair_from_traps(by_id[small_id], by_id[large_id]))
    rows, pair_results = [], []
    for p in pairs:
        e = size_exponent(p)
        jr = model_ratio(p.d_small, p.d_large, "johnson")
        pr = model_ratio(p.d_small, p.d_large, "patch")
        measured = p.rate_small / p.rate_large
        pair_results.append({"label": p.label, "alpha": e.value, "sigma_alpha": e.sigma,
                             "measured_ratio": measured, "johnson_ratio": jr, "patch_ratio": pr,
                             "size_small_um": m_to_um(p.d_small), "size_large_um": m_to_um(p.d_large)})
        rows.append((p.label, repr(e.value), repr(e.sigma), repr(measured), repr(jr), repr(pr)))
    header = ("label", "alpha", "sigma_alpha", "measured_ratio", "johnson_ratio", "patch_ratio")
    files = [ctx.out_dir / "scaling_pairs.csv"]
    _write_table(files[0], header, rows)

    records = load_experiments(ctx.path(cfg.experiments) if cfg.experiments else None)
    cross, cross_rows = [], []
    if records:
        for alpha in cfg.alphas:
            c = cross_experiment_compare(records, alpha)
            cross.append({"alpha": alpha, "spread": c.spread,
                          "values": dict(zip(c.labels, c.values))})
            cross_rows += [(repr(alpha), lab, repr(v), repr(c.spread))
                           for lab, v in zip(c.labels, c.values)]
        files.append(ctx.out_dir / "cross_experiment.csv")
        _write_table(files[-1], ("alpha", "label", "normalized_value", "spread"), cross_rows)
    results = {"pairs": pair_results, "cross_experiment": cross}
    return _finish(ctx, "scaling", cfg, results, (header, rows), files)


# --- simulate ------------------------------------------------------------------

def _sim_setup(cfg):
    coupling = RabiCoupling(hz_to_rad_s(cfg.base_rabi_kHz * 1e3), cfg.eta)
    if cfg.probe_time_us is not None:
        t = cfg.probe_time_us * 1e-6
    else:
        # blue-sideband pi time of the ground state
        t = 0.5 * math.pi / rabi_frequency(coupling, 0, cfg.k)
    grid = default_grid(t, cfg.n_points, cfg.half_span)
    return coupling, t, grid


def cmd_simulate(ctx: _Context, args) -> dict:
    over = {"shots": args.shots, "batch": args.batch, "exact": True if args.exact else None,
            "true_ndot_per_ms": args.ndot_per_ms, "true_nbar0": args.nbar0}
    cfg = ctx.block("simulate", over)
    coupling, t, grid = _sim_setup(cfg)
    scfg = ScanConfig(tuple(grid), t, cfg.shots, cfg.k, "blue", ctx.seed)
    ndot = per_ms_to_per_s(cfg.true_ndot_per_ms)
    delays = [d * 1e-3 for d in cfg.delays_ms]
    if len(set(delays)) != len(delays):
        raise ConfigError(f"{ctx.source}: simulate.delays_ms must be distinct")
    files = []
    if cfg.batch:
        seeds = range(ctx.seed, ctx.seed + cfg.batch)
        cov = coverage_study(cfg.true_nbar0, ndot, delays, coupling, scfg, seeds)
        rows = [(str(s), repr(per_s_to_per_ms(v)), repr(per_s_to_per_ms(e)),
                 str(int(abs(v - ndot) <= e)))
                for s, v, e in zip(cov.seeds, cov.ndot, cov.sigma_ndot)]
        path = ctx.out_dir / "coverage.csv"
        header = ("seed", "ndot_per_ms", "sigma_ndot_per_ms", "within_1sigma")
        _write_table(path, header, rows)
        files.append(path)
        results = {"n_runs": cov.n_runs, "n_failed": cov.n_failed,
                   "mean_ndot_per_ms": per_s_to_per_ms(cov.mean_ndot),
                   "relative_bias": cov.relative_bias, "coverage_1sigma": cov.coverage_1sigma,
                   "mean_sigma_ndot_per_ms": per_s_to_per_ms(float(np.mean(cov.sigma_ndot)))
                   if cov.sigma_ndot.size else None,
                   "probe_time_us": t * 1e6}
        return _finish(ctx, "simulate", cfg, results, (header, rows), files)

    scans = simulate_delay_scans(cfg.true_nbar0, ndot, delays, coupling, scfg, cfg.exact)
    scan_dir = ctx.out_dir / "scans"
    scan_dir.mkdir(exist_ok=True)
    entries = []
    for i, (d, rsb, bsb) in enumerate(scans):
        names = (f"scans/delay{i:02d}_rsb.csv", f"scans/delay{i:02d}_bsb.csv")
        write_scan_csv(rsb, ctx.out_dir / names[0])
        write_scan_csv(bsb, ctx.out_dir / names[1])
        files += [ctx.out_dir / n for n in names]
        entries.append({"delay_ms": cfg.delays_ms[i], "rsb": names[0], "bsb": names[1], "k": cfg.k})
    manifest = {"seed": ctx.seed, "scans": entries}
    mpath = ctx.out_dir / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2) + "\n")
    files.append(mpath)
    results = {"probe_time_us": t * 1e6, "manifest": str(mpath)}
    # in-process analysis of the reloaded files, i.e. exactly what `analyze` sees
    try:
        reloaded = [(d, read_scan_csv(ctx.out_dir / e["rsb"]), read_scan_csv(ctx.out_dir / e["bsb"]))
                    for (d, _, _), e in zip(scans, entries)]
        results["fit"] = fit_heating_rate(analyze_scans(reloaded, cfg.k)).to_dict()
    except (FitError, EstimatorDomainError, DegeneracyError) as exc:
        results["fit_error"] = str(exc)
    header = ("delay_ms", "rsb", "bsb")
    rows = [(repr(e["delay_ms"]), e["rsb"], e["bsb"]) for e in entries]
    return _finish(ctx, "simulate", cfg, results, (header, rows), files)


# --- entry point -------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="JSON run configuration")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master RNG seed")
    p.add_argument("--out-dir", default=argparse.SUPPRESS, help="directory for output files")
    p.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS,
                   help="stdout format")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="ionheat", parents=[common],
                                     description="Trapped-ion heating-rate models and analysis.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", parents=[common], help="heating rate from a noise model")
    p.add_argument("--model", choices=("johnson", "patch", "spectrum"))
    p.add_argument("--ion")
    p.add_argument("--secular-mhz", type=float)
    p.add_argument("--sweep", help="NAME=v1,v2,... (e.g. distance_um=100,200,400)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("thermal-field", parents=[common], help="rate vs height above a conductor")
    p.add_argument("--ion")
    p.add_argument("--secular-mhz", type=float)
    p.add_argument("--conductivity", type=float, help="S/m")
    p.add_argument("--temperature-k", type=float)
    p.add_argument("--z-um", type=float, nargs="+")
    p.add_argument("--compare-numeric", action="store_true")
    p.set_defaults(func=cmd_thermal_field)

    p = sub.add_parser("analyze", parents=[common], help="nbar(t) and heating-rate fit")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--dataset", help="CSV of delay_ms,nbar,sigma_nbar")
    src.add_argument("--manifest", help="JSON scan manifest (as written by simulate)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("scaling", parents=[common], help="size exponents and cross-experiment check")
    p.add_argument("--pair", action="append",
                   help="RATE_SMALL,RATE_LARGE,SIZE_SMALL,SIZE_LARGE in 1/ms and um (repeatable)")
    p.add_argument("--only-pairs", action="store_true", help="skip the bundled pairs")
    p.add_argument("--alpha", type=float, nargs="+")
    p.add_argument("--trap-table")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo sideband scans")
    p.add_argument("--shots", type=int)
    p.add_argument("--batch", type=int, help="run a coverage study over this many seeds")
    p.add_argument("--exact", action="store_true", help="noiseless scans")
    p.add_argument("--ndot-per-ms", type=float)
    p.add_argument("--nbar0", type=float)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name, default in (("config", None), ("seed", None), ("out_dir", "."), ("format", "json")):
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        ctx = _Context(args)
        args.func(ctx, args)
    except IonHeatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
