"""Command-line front end: ``simcf run`` and ``simcf sweep``.

Examples::

    simcf run --config scenario.json --schemes aga-ao,aga-rp-ep --trials 10 --out results
    simcf sweep --schemes aga-ao,nua-ao --sweep L=2,4,6 --trials 5 --out sweep_L
    simcf sweep --schemes aga-ao --sweep L=2,3,4,6 --fixed-n-total 300 --out fig4

Exit status: 0 on success, 2 for bad arguments or configuration, 1 for
failures while running.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .driver import SCHEME_TOKENS, MonteCarloResult, SchemeId, monte_carlo
from .scenario import InvalidConfig, ScenarioConfig, config_from_dict, config_to_dict

log = logging.getLogger("simcf")

COLUMNS = [
    "scheme", "trial", "L", "U", "K", "M", "N", "sum_rate_bpshz", "rate_ue_min", "rate_ue_max",
    "outer_iters", "wall_time_s", "seed",
]
AGGREGATE_COLUMNS = ["sum_rate_mean", "sum_rate_std"]
SWEEP_COLUMNS = ["sweep_param", "sweep_value"]
TRACE_COLUMNS = ["scheme", "trial", "stage", "outer_iter", "inner_iter", "sum_rate_bpshz"]
SWEEP_PARAMS = ("L", "U", "K", "M", "N", "N_total", "P_max")


class UsageError(Exception):
    pass


def load_config(path) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from None
    try:
        return config_from_dict(data)
    except InvalidConfig as exc:
        raise UsageError(f"{path}: {exc}") from None
    except TypeError as exc:
        raise UsageError(f"{path}: {exc}") from None


def parse_schemes(text: str) -> list:
    try:
        schemes = [SchemeId.parse(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not schemes:
        raise UsageError("no schemes given")
    return schemes


def square_factors(N: int):
    """Most-square (Nx, Ny) with Nx * Ny == N and Nx <= Ny."""
    if N < 1:
        raise UsageError(f"N must be >= 1, got {N}")
    best = (1, N)
    for nx in range(1, math.isqrt(N) + 1):
        if N % nx == 0:
            best = (nx, N // nx)
    if best[0] == 1 and N > 3:
        log.warning("N=%d is prime; laying the metasurface out as a 1 x %d line", N, N)
    return best


def parse_sweep(text: str):
    name, sep, values = text.partition("=")
    name = name.strip()
    if not sep or name not in SWEEP_PARAMS:
        raise UsageError(f"--sweep expects PARAM=v1,v2,... with PARAM one of {', '.join(SWEEP_PARAMS)}")
    cast = float if name == "P_max" else int
    try:
        vals = [cast(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--sweep {name}: values must be {'numbers' if cast is float else 'integers'}") from None
    if not vals or any(v <= 0 for v in vals):
        raise UsageError(f"--sweep {name}: values must be positive")
    return name, vals


def point_config(base: ScenarioConfig, name: str, value, n_total=None) -> ScenarioConfig:
    changes = {}
    if name == "N":
        changes["Nx"], changes["Ny"] = square_factors(value)
    elif name == "N_total":
        n_total = value
    elif name == "P_max":
        changes["P_max"] = float(value)
    else:
        changes[name] = int(value)
    cfg = base.replace(**changes)
    if n_total is not None:
        per_layer = n_total / cfg.L
        N = max(1, round(per_layer))
        if N != per_layer:
            log.warning("N_total=%d is not divisible by L=%d; using N=%d per SIM layer", n_total, cfg.L, N)
        nx, ny = square_factors(N)
        cfg = cfg.replace(Nx=nx, Ny=ny)
    if cfg.L * cfg.U < cfg.K:
        raise UsageError(f"{name}={value}: {cfg.L * cfg.U} antennas cannot cover K={cfg.K} UEs")
    return cfg


def _fmt(x) -> str:
    return repr(float(x))


def result_rows(result: MonteCarloResult, config: ScenarioConfig, timing: bool) -> list:
    rows = []
    base = {"L": config.L, "U": config.U, "K": config.K, "M": config.M, "N": config.N, "seed": config.seed}
    for scheme in result.schemes:
        reports = result.for_scheme(scheme)
        for r in reports:
            rows.append(dict(
                base,
                scheme=scheme.token,
                trial=r.trial,
                sum_rate_bpshz=_fmt(r.sum_rate),
                rate_ue_min=_fmt(r.rate_report.rate.min()),
                rate_ue_max=_fmt(r.rate_report.rate.max()),
                outer_iters=r.iterations["outer"],
                wall_time_s=f"{r.wall_time:.6f}" if timing else "",
            ))
        mean, std = result.mean(scheme), result.std(scheme)
        rows.append(dict(
            base,
            scheme=scheme.token,
            trial=-1,
            sum_rate_bpshz=_fmt(mean),
            rate_ue_min=_fmt(min(r.rate_report.rate.min() for r in reports)),
            rate_ue_max=_fmt(max(r.rate_report.rate.max() for r in reports)),
            outer_iters=_fmt(np.mean([r.iterations["outer"] for r in reports])),
            wall_time_s=f"{sum(r.wall_time for r in reports):.6f}" if timing else "",
            sum_rate_mean=_fmt(mean),
            sum_rate_std=_fmt(std),
        ))
    return rows


def trace_rows(result: MonteCarloResult) -> list:
    rows = []
    for r in result.reports:
        for stage, outer, inner, value in r.trace_rows:
            rows.append(dict(scheme=r.scheme.token, trial=r.trial, stage=stage, outer_iter=outer,
                             inner_iter=inner, sum_rate_bpshz=_fmt(value)))
    return rows


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n", restval="")
        writer.writeheader()
        writer.writerows(rows)


def print_summary(result: MonteCarloResult, header: str = "") -> None:
    if header:
        print(header)
    print(f"{'scheme':<12} {'mean':>10} {'std':>10} {'trials':>7}")
    for s in result.schemes:
        print(f"{s.token:<12} {result.mean(s):>10.4f} {result.std(s):>10.4f} {len(result.for_scheme(s)):>7d}")


def _sidecar(config: ScenarioConfig, args, extra=None) -> dict:
    meta = {
        "config": config_to_dict(config),
        "schemes": args.schemes,
        "trials": args.trials,
        "first_trial": args.first_trial,
    }
    if extra:
        meta.update(extra)
    return meta


def _prepare(args):
    config = load_config(args.config)
    if args.seed is not None:
        try:
            config = config.replace(seed=args.seed)
        except InvalidConfig as exc:
            raise UsageError(str(exc)) from None
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    schemes = parse_schemes(args.schemes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return config, schemes, out


def cmd_run(args) -> int:
    config, schemes, out = _prepare(args)
    if config.L * config.U < config.K:
        raise UsageError(f"{config.L * config.U} antennas cannot cover K={config.K} UEs")
    started = time.perf_counter()
    result = monte_carlo(config, schemes, args.trials, first_trial=args.first_trial)
    write_csv(out / "results.csv", COLUMNS + AGGREGATE_COLUMNS, result_rows(result, config, args.timing))
    if args.trace:
        write_csv(out / "trace.csv", TRACE_COLUMNS, trace_rows(result))
    meta = _sidecar(config, args)
    if args.timing:
        meta["wall_time_s"] = time.perf_counter() - started
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print_summary(result)
    return 0


def cmd_sweep(args) -> int:
    config, schemes, out = _prepare(args)
    name, values = parse_sweep(args.sweep)
    if args.fixed_n_total is not None and args.fixed_n_total < 1:
        raise UsageError("--fixed-n-total must be positive")
    points = [(v, point_config(config, name, v, args.fixed_n_total)) for v in values]
    rows, traces, means = [], [], {s.token: [] for s in schemes}
    started = time.perf_counter()
    for value, cfg in points:
        result = monte_carlo(cfg, schemes, args.trials, first_trial=args.first_trial)
        for row in result_rows(result, cfg, args.timing):
            row.update(sweep_param=name, sweep_value=value)
            rows.append(row)
        if args.trace:
            for row in trace_rows(result):
                row.update(sweep_param=name, sweep_value=value)
                traces.append(row)
        for s in schemes:
            means[s.token].append(result.mean(s))
        print_summary(result, header=f"\n{name}={value} (N per layer={cfg.N})")
    write_csv(out / "results.csv", COLUMNS + AGGREGATE_COLUMNS + SWEEP_COLUMNS, rows)
    if args.trace:
        write_csv(out / "trace.csv", TRACE_COLUMNS + SWEEP_COLUMNS, traces)
    argmax = {tok: values[int(np.argmax(m))] for tok, m in means.items()}
    summary = {"param": name, "values": values, "mean_sum_rate": means, "argmax": argmax}
    meta = _sidecar(config, args, {"sweep": summary, "fixed_n_total": args.fixed_n_total,
                                   "points": [config_to_dict(c) for _, c in points]})
    if args.timing:
        meta["wall_time_s"] = time.perf_counter() - started
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"\nargmax over {name}: " + ", ".join(f"{k}={v}" for k, v in argmax.items()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simcf", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="scenario JSON file (defaults built in)")
    common.add_argument("--schemes", default="aga-ao", metavar="LIST",
                        help="comma-separated tokens: " + ",".join(SCHEME_TOKENS))
    common.add_argument("--trials", type=int, default=1, metavar="N")
    common.add_argument("--first-trial", type=int, default=0, metavar="N", help="index of the first trial")
    common.add_argument("--seed", type=int, metavar="N", help="override the config seed")
    common.add_argument("--out", default="results", metavar="DIR")
    common.add_argument("--trace", action="store_true", help="write per-iteration traces to trace.csv")
    common.add_argument("--timing", action="store_true",
                        help="fill wall_time_s (makes results.csv differ between runs)")
    common.add_argument("-v", "--verbose", action="store_true")

    sub.add_parser("run", parents=[common], help="Monte-Carlo run of one scenario")
    sweep = sub.add_parser("sweep", parents=[common], help="sweep one parameter")
    sweep.add_argument("--sweep", required=True, metavar="PARAM=v1,v2,...")
    sweep.add_argument("--fixed-n-total", type=int, metavar="N",
                       help="hold the total meta-atom count fixed: N per layer = N_total / L")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    handler = cmd_run if args.command == "run" else cmd_sweep
    try:
        return handler(args)
    except UsageError as exc:
        print(f"simcf: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("run failed", exc_info=True)
        print(f"simcf: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
