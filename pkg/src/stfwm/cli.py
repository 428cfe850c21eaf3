"""Command-line surface: simulate -> count -> scan -> report.

Exit codes are fixed for shell harnesses: 0 ok, 2 config error, 3 I/O error,
4 file-format error, 5 numeric/fit failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import coinc, fitkit, tagsim, ttfio

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_NUMERIC = 5


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ttfio.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ttfio.FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except fitkit.FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stfwm",
        description="Seeded-FWM tag-stream simulator and fourfold coincidence analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a TT4F tag file from a run config")
    p.add_argument("config", help="run config file (key=value lines)")
    p.add_argument("--out", required=True, help="output TT4F path")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("count", help="fourfold histogram + CC/ACC ratio from a tag file")
    p.add_argument("tags", help="TT4F or CSV tag file")
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--gate", type=int, default=1280, help="gate half-width in ps")
    p.add_argument("--max-lag", type=int, default=5, help="maximum |lag| in periods")
    p.add_argument("--period", type=int, default=3125,
                   help="pulse period in ps (CSV input only; TT4F carries its own)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("scan", help="simulate+count once per seed-pump delay")
    p.add_argument("config", help="run config file")
    p.add_argument("--tau-list", required=True,
                   help="comma-separated delays in ps, e.g. '-19,0,21'")
    p.add_argument("--out", required=True, help="output scan CSV path")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("report", help="fit a scan CSV; emit R', fidelity and the band")
    p.add_argument("scan", help="scan CSV (tau_ps,cc,acc)")
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_report)
    return parser


def _load_config(args) -> ttfio.RunConfig:
    try:
        cfg = ttfio.load_run_config(args.config)
    except FileNotFoundError as exc:
        raise ttfio.ConfigError(str(exc)) from None
    if getattr(args, "seed", None) is not None:
        values = dict(cfg.raw)
        values["seed"] = args.seed
        cfg = ttfio.build_run_config(values)
    return cfg


def _file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()[:16]


def _write_meta(path, entries: dict) -> None:
    with open(path, "w") as fh:
        for k, v in entries.items():
            fh.write(f"{k}={v}\n")


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    streams = tagsim.simulate(cfg.pulse, cfg.source, cfg.detectors, cfg.seed)
    ttfio.write_tt4f(args.out, streams, cfg.pulse.period_ps)
    meta = dict(cfg.raw)
    meta.update(
        seed=cfg.seed,
        config_hash=cfg.config_hash,
        rng_block_size=cfg.pulse.n_pulses,  # single RNG block per run
        tags_per_channel=",".join(str(len(s)) for s in streams),
    )
    _write_meta(str(args.out) + ".meta", meta)
    return EXIT_OK


def _count_streams(streams, period, gate, max_lag, workers):
    config = coinc.CoincConfig(period_ps=period, gate_halfwidth_ps=gate, max_lag=max_lag)
    hist = coinc.count_fourfolds(streams, config, workers=workers)
    return config, hist, coinc.plane_slice(hist), coinc.extract_car(hist)


def cmd_count(args) -> int:
    streams, period = ttfio.read_tags(args.tags)
    if period is None:
        period = args.period
    try:
        config, hist, plane, car = _count_streams(
            streams, period, args.gate, args.max_lag, args.workers
        )
    except ValueError as exc:
        raise ttfio.ConfigError(str(exc)) from None

    prefix = str(args.out)
    with open(prefix + ".hist.csv", "w") as fh:
        fh.write("n14,n24,n34,count\n")
        for key in sorted(hist.counts):
            fh.write(f"{key[0]},{key[1]},{key[2]},{hist.counts[key]}\n")
    with open(prefix + ".plane.csv", "w") as fh:
        fh.write("n14,n24,count\n")
        for key in sorted(plane):
            fh.write(f"{key[0]},{key[1]},{plane[key]}\n")
    report = {
        "input": str(args.tags),
        "input_hash": _file_hash(args.tags),
        "period_ps": period,
        "gate_halfwidth_ps": config.gate_halfwidth_ps,
        "max_lag": config.max_lag,
        "gating": "peak-centered",
        "total_quadruples": hist.total_quadruples,
        "cc": car.cc,
        "cc_err": car.cc_err,
        "acc_bars": {str(k): v for k, v in car.acc_bars.items()},
        "acc_mean": car.acc_mean,
        "acc_err": car.acc_err,
        "ratio": car.ratio,
        "ratio_err": car.ratio_err,
        "ratio_defined": car.ratio is not None,
    }
    with open(prefix + ".car.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def _parse_tau_list(text: str) -> list[float]:
    try:
        taus = [float(s) for s in text.split(",") if s.strip() != ""]
    except ValueError:
        raise ttfio.ConfigError(f"bad --tau-list '{text}'") from None
    if not taus:
        raise ttfio.ConfigError("--tau-list is empty")
    return taus


def derived_seed(base_seed: int, index: int) -> int:
    """Per-point seed for scans, stable across runs and point order."""
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


def cmd_scan(args) -> int:
    cfg = _load_config(args)
    taus = _parse_tau_list(args.tau_list)
    rows = []
    seeds = []
    from dataclasses import replace

    for i, tau in enumerate(taus):
        seed_i = derived_seed(cfg.seed, i)
        seeds.append(seed_i)
        source = replace(cfg.source, tau_ps=tau)
        streams = tagsim.simulate(cfg.pulse, source, cfg.detectors, seed_i)
        _, _, _, car = _count_streams(
            streams,
            cfg.pulse.period_ps,
            cfg.coinc.gate_halfwidth_ps,
            cfg.coinc.max_lag,
            workers=1,
        )
        rows.append((tau, car.cc, car.acc_mean))

    with open(args.out, "w") as fh:
        fh.write("tau_ps,cc,acc\n")
        for tau, cc, acc in rows:
            fh.write(f"{tau},{cc},{acc}\n")
    meta = dict(cfg.raw)
    meta.update(
        seed=cfg.seed,
        config_hash=cfg.config_hash,
        tau_list=",".join(str(t) for t in taus),
        derived_seeds=",".join(str(s) for s in seeds),
    )
    _write_meta(str(args.out) + ".meta", meta)
    return EXIT_OK


def read_scan_csv(path) -> list[fitkit.DelayScanPoint]:
    points = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "tau_ps,cc,acc":
            raise ttfio.FormatError(f"{path}: expected header 'tau_ps,cc,acc'")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                points.append(
                    fitkit.DelayScanPoint(float(parts[0]), float(parts[1]), float(parts[2]))
                )
            except (ValueError, IndexError):
                raise ttfio.FormatError(f"{path}:{lineno}: malformed row '{line}'") from None
    return points


def cmd_report(args) -> int:
    points = read_scan_csv(args.scan)
    if len(points) < 6:
        raise ttfio.ConfigError(f"{args.scan}: need >= 6 scan rows, got {len(points)}")
    fit = fitkit.fit_delay_scan(points)
    if not fit.converged:
        raise fitkit.FitError(
            f"fit did not converge in {fit.n_iter} iterations; "
            f"last iterate A={fit.amplitude:.4g} tau0={fit.tau0_ps:.4g} "
            f"w={fit.width_ps:.4g} B={fit.baseline:.4g}"
        )
    base = fitkit.fit_baseline(points)
    try:
        rp, rp_err = fitkit.r_prime(fit)
    except ValueError as exc:
        raise fitkit.FitError(str(exc)) from None
    from .core import cloning_fidelity

    fidelity = cloning_fidelity(max(rp, 0.0))
    fid_err = rp_err / (2.0 * (rp + 1.0) ** 2)

    taus = np.array([p.tau_ps for p in points])
    grid = np.linspace(taus.min(), taus.max(), 201)
    lo, hi = fitkit.confidence_band(fit, grid)
    curve = fitkit._model(fit.params, grid)

    errs = fit.param_errors
    report = {
        "input": str(args.scan),
        "input_hash": _file_hash(args.scan),
        "n_points": len(points),
        "fit": {
            "amplitude": fit.amplitude,
            "amplitude_err": errs[0],
            "tau0_ps": fit.tau0_ps,
            "tau0_err": errs[1],
            "width_ps": fit.width_ps,
            "width_err": errs[2],
            "fwhm_ps": fit.fwhm_ps,
            "baseline": fit.baseline,
            "baseline_err": errs[3],
            "residual_sum": fit.residual_sum,
            "n_iter": fit.n_iter,
            "converged": fit.converged,
            "covariance": fit.covariance.tolist(),
        },
        "acc_baseline": {
            "value": base.value,
            "stderr": base.stderr,
            "slope": base.slope,
            "slope_stderr": base.slope_stderr,
            "slope_significance": base.slope_significance,
        },
        "r_prime": rp,
        "r_prime_err": rp_err,
        "fidelity": fidelity,
        "fidelity_err": fid_err,
    }
    prefix = str(args.out)
    with open(prefix + ".report.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    with open(prefix + ".curve.csv", "w") as fh:
        fh.write("tau_ps,fit,band_lo,band_hi\n")
        for t, c, a, b in zip(grid, curve, lo, hi):
            fh.write(f"{t},{c},{a},{b}\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
