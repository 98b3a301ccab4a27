"""``ris-stats`` command-line interface.

Subcommands::

    ris-stats pdf       evaluate a density on a grid (CSV or JSON)
    ris-stats simulate  Monte Carlo histogram of one projection
    ris-stats validate  analytic vs. Monte Carlo over a parameter grid

Exit codes: 0 success, 1 invalid input, 2 numeric non-convergence,
3 validation failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .channel import ChannelParams, InvalidParameterError, validate
from .montecarlo import (
    DEFAULT_MEMORY_BUDGET,
    PROJECTIONS,
    ResourceError,
    histogram,
    histogram_from_raw,
    sample_composite,
    stream_composite,
)
from .pdfs import curve
from .series import SeriesConfig
from .validation import (
    DEFAULT_THRESHOLD,
    LOW_POWER_COUNT,
    analytic_bin_masses,
    analytic_cdf,
    ks_critical,
    ks_statistic,
    sup_norm_report,
)

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGENCE, EXIT_VALIDATION = 0, 1, 2, 3
AUTO_POINTS = 500
PILOT_COUNT = 100_000
PHASE_EPS = 1e-9
DEFAULT_GRID_SPEC = [(n, m1, m2) for m1 in (1, 2) for m2 in (1, 2, 3) for n in (5, 10)]


class UsageError(ValueError):
    pass


def _number(text: str):
    """Parse a number, keeping integers integral so validation can name them."""
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    return int(v) if v.is_integer() and "." not in text and "e" not in text.lower() else v


def _threads(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be ≥ 1")
        return args.threads
    env = os.environ.get("RIS_STATS_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError("RIS_STATS_THREADS must be an integer") from None
        if n < 1:
            raise UsageError("RIS_STATS_THREADS must be ≥ 1")
        return n
    return os.cpu_count() or 1


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("channel parameters")
    g.add_argument("--params", help="JSON file with n_elements, m1, m2, omega1, omega2, sigma_h_sq")
    g.add_argument("--n", type=_number, help="number of RIS elements N (default 5)")
    g.add_argument("--m1", type=_number, help="Nakagami shape of the first hop (default 1)")
    g.add_argument("--m2", type=_number, help="Nakagami shape of the second hop (default 1)")
    g.add_argument("--omega1", type=_number, help="spread of the first hop (default 1)")
    g.add_argument("--omega2", type=_number, help="spread of the second hop (default 1)")
    g.add_argument("--sigma-h-sq", type=_number, help="direct-path variance (default 1)")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, help="worker count (default: $RIS_STATS_THREADS or all cores)")


def _add_series_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("series configuration")
    g.add_argument("--rel-tol", type=float, default=1e-6, help="target relative tail error (default 1e-6)")
    g.add_argument("--max-ell", type=int, default=200, help="cap on the outer series index")
    g.add_argument("--max-q", type=int, default=400, help="cap on the angular series index")
    g.add_argument("--precision", choices=("standard", "extended"), default="extended")
    g.add_argument("--method", choices=("auto", "series", "quadrature"), default="auto")
    g.add_argument("--law", choices=("paper", "exact"), default="paper",
                   help="cascade law: closed-form multi-index law or exact phase-aligned sum")
    g.add_argument("--gamma-reading", choices=("single", "per_element"), default="single")
    g.add_argument("--weight-reading", choices=("binomial", "printed"), default="binomial")
    g.add_argument("--envelope-reading", choices=("derived", "printed"), default="derived")
    g.add_argument("--phase-reading", choices=("corrected", "printed"), default="corrected")


def _params(args) -> ChannelParams:
    data = {"n_elements": 5, "m1": 1, "m2": 1, "omega1": 1.0, "omega2": 1.0, "sigma_h_sq": 1.0}
    if args.params:
        try:
            with open(args.params) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read --params: {exc}") from None
        data.update(ChannelParams.from_dict({**data, **loaded}).to_dict())
    for key, attr in (("n_elements", "n"), ("m1", "m1"), ("m2", "m2"), ("omega1", "omega1"),
                      ("omega2", "omega2"), ("sigma_h_sq", "sigma_h_sq")):
        val = getattr(args, attr)
        if val is not None:
            data[key] = val
    return validate(ChannelParams(**data))


def _config(args) -> SeriesConfig:
    return SeriesConfig(
        rel_tol=args.rel_tol,
        max_ell=args.max_ell,
        max_q=args.max_q,
        precision_mode=args.precision,
        method=args.method,
        law=args.law,
        gamma_reading=args.gamma_reading,
        weight_reading=args.weight_reading,
        envelope_reading=args.envelope_reading,
        phase_reading=args.phase_reading,
    )


def _parse_range(text: str) -> np.ndarray:
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise UsageError(f"grid must be 'min:max:points' or 'auto', got {text!r}") from None
    if n < 1 or (n > 1 and not hi > lo):
        raise UsageError("grid needs max > min and points ≥ 1")
    return np.linspace(lo, hi, n)


def _pilot(params: ChannelParams, seed: int, projection: str, threads: int) -> tuple[float, float]:
    batch = sample_composite(params, PILOT_COUNT, seed, workers=threads)
    x = batch.project(projection)
    return float(np.mean(x)), float(np.std(x))


def _grid(which: str, spec: str, params: ChannelParams, seed: int, threads: int) -> np.ndarray:
    if spec != "auto":
        return _parse_range(spec)
    if which == "phase":
        return np.linspace(-math.pi + PHASE_EPS, math.pi - PHASE_EPS, AUTO_POINTS)
    if which == "imag":
        s = math.sqrt(params.sigma_h_sq / 2.0)
        return np.linspace(-8 * s, 8 * s, AUTO_POINTS)
    proj = "real" if which == "real" else "magnitude"
    mu, sd = _pilot(params, seed, proj, threads)
    lo = -2.0 * sd if which == "real" else 0.0
    return np.linspace(lo, mu + 8.0 * sd, AUTO_POINTS)


def cmd_pdf(args) -> int:
    params = _params(args)
    config = _config(args)
    threads = _threads(args)
    which = args.which
    if which == "polar":
        r = _grid("envelope", args.grid, params, args.seed, threads)
        t = _grid("phase", args.theta_grid, params, args.seed, threads)
        rr, tt = np.meshgrid(r, t, indexing="ij")
        grid = np.column_stack([rr.ravel(), tt.ravel()])
    else:
        grid = _grid(which, args.grid, params, args.seed, threads)
    c = curve(which, grid, params, config)
    prov = {"seed": args.seed, "grid": args.grid}
    if args.format == "csv":
        text = c.to_csv()
        text = "".join(f"# {k}: {json.dumps(v)}\n" for k, v in prov.items()) + text
    else:
        text = json.dumps({**json.loads(c.to_json()), **prov})
    _write(args.out, text)
    if c.failed:
        n_bad = c.paths.count("failed")
        print(f"series did not converge at {n_bad} of {len(c.paths)} points", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _bins(text: str):
    if text == "fd" or text in ("auto", "sturges", "scott", "doane", "rice", "sqrt"):
        return text
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"--bins must be an integer or a numpy binning rule, got {text!r}") from None


def cmd_simulate(args) -> int:
    params = _params(args)
    threads = _threads(args)
    bins = _bins(args.bins)
    if args.count < 1:
        raise UsageError("--count must be ≥ 1")
    prov = {"version": __version__, "params": params.to_dict(), "seed": args.seed, "count": args.count,
            "workers": threads, "projection": args.projection}
    budget = args.memory_budget
    if args.count * 16 > budget:
        if not args.raw_out:
            raise ResourceError(
                f"--count {args.count} exceeds the {budget}-byte memory budget; pass --raw-out to stream"
            )
        stream_composite(params, args.count, args.seed, args.raw_out, workers=threads)
        emp = histogram_from_raw(args.raw_out, args.projection, bins, provenance=prov)
    else:
        batch = sample_composite(params, args.count, args.seed, workers=threads, memory_budget=budget)
        if args.raw_out:
            batch.write_raw(args.raw_out)
        emp = histogram(batch, args.projection, bins)
        emp = replace(emp, provenance={**prov, "rng": batch.rng})
    _write(args.out, emp.to_csv() if args.format == "csv" else emp.to_json())
    return EXIT_OK


def _parse_grid_spec(text: str | None) -> list[tuple[int, int, int]]:
    if text is None:
        return list(DEFAULT_GRID_SPEC)
    if os.path.exists(text):
        with open(text) as fh:
            return [tuple(int(v) for v in item) for item in json.load(fh)]
    try:
        return [tuple(int(v) for v in item.split(":")) for item in text.split(",")]
    except ValueError:
        raise UsageError("--grid-spec must be 'N:m1:m2,...' or a JSON file of [N, m1, m2] triples") from None


def run_validation(points, count: int, seed: int, config: SeriesConfig, threads: int,
                   threshold: float = DEFAULT_THRESHOLD) -> dict:
    """Sup-norm and KS checks of real, envelope and phase at each grid point."""
    results = []
    warnings = []
    if count < LOW_POWER_COUNT:
        warnings.append(f"--count {count} is small: standard-error envelopes are too wide for meaningful failure")
    for n, m1, m2 in points:
        params = validate(ChannelParams(n, m1, m2))
        batch = sample_composite(params, count, seed, workers=threads)
        entry = {"params": params.to_dict(), "checks": {}}
        for proj, which in (("real", "real"), ("magnitude", "envelope"), ("phase", "phase")):
            emp = histogram(batch, proj)
            masses = analytic_bin_masses(which, emp.bin_edges, params, config)
            rep = sup_norm_report(None, emp, bin_masses=masses, threshold=threshold)
            ks = ks_statistic(analytic_cdf(which, params, config), batch, proj)
            crit = ks_critical(count)
            entry["checks"][which] = {
                "sup_norm": rep.statistic,
                "sup_norm_threshold": threshold,
                "ks": ks,
                "ks_critical": crit,
                "passed": bool(rep.passed and ks <= crit),
            }
        entry["passed"] = all(c["passed"] for c in entry["checks"].values())
        results.append(entry)
    return {
        "version": __version__,
        "seed": seed,
        "count": count,
        "workers": threads,
        "config": config.to_dict(),
        "points": results,
        "failures": [r["params"] for r in results if not r["passed"]],
        "warnings": warnings,
        "passed": all(r["passed"] for r in results),
    }


def cmd_validate(args) -> int:
    config = _config(args)
    threads = _threads(args)
    points = _parse_grid_spec(args.grid_spec)
    report = run_validation(points, args.count, args.seed, config, threads)
    for w in report["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    _write(args.out, json.dumps(report, indent=2) + "\n")
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ris-stats", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pdf", help="evaluate a density on a grid")
    p.add_argument("--which", choices=("real", "imag", "envelope", "phase", "polar"), required=True)
    _add_param_flags(p)
    p.add_argument("--grid", default="auto", help="'min:max:points' or 'auto' (radius grid for polar)")
    p.add_argument("--theta-grid", default="auto", help="angle grid for --which polar")
    p.add_argument("--seed", type=int, default=0, help="seed of the pilot run sizing the auto grid")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_series_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_pdf)

    p = sub.add_parser("simulate", help="Monte Carlo histogram of one projection")
    _add_param_flags(p)
    p.add_argument("--count", type=int, default=10_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--projection", choices=PROJECTIONS, default="real")
    p.add_argument("--bins", default="fd", help="bin count or a numpy rule such as 'fd' (default)")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--raw-out", help="also stream raw samples to this RISMC1 binary file")
    p.add_argument("--memory-budget", type=int, default=DEFAULT_MEMORY_BUDGET, help="bytes of sample memory")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="analytic vs. Monte Carlo over a parameter grid")
    p.add_argument("--grid-spec", help="'N:m1:m2,...' or JSON file (default: 12-point reference grid)")
    p.add_argument("--count", type=int, default=10_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON report path (default stdout)")
    _add_series_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def _join_negative_values(argv: list[str]) -> list[str]:
    # argparse takes '-4:4:9' for an option; glue such values to their flag
    out: list[str] = []
    i = 0
    while i < len(argv):
        a = argv[i]
        if a in ("--grid", "--theta-grid") and i + 1 < len(argv) and argv[i + 1].startswith("-") and ":" in argv[i + 1]:
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (InvalidParameterError, UsageError, ResourceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
