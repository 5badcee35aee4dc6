"""Command-line front end: analytic queries, Monte Carlo sweeps, config checks.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
Output files are plain UTF-8 CSV with a single header row, plus one
``summary.json`` per sweep; identical inputs (including the master seed)
produce byte-identical files, regardless of ``--parallel``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import analytics
from .engine import SimConfig, monte_carlo

SWEEPABLE = ("delay_threshold_ms", "density", "detect_prob_inside", "memory_bits")

USAGE_ERROR = 1
RUNTIME_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _fmt(value: float, unit: str = "") -> str:
    text = f"{value:g}"
    return f"{text} {unit}".strip()


def _analytics_dispatch(args) -> str:
    name = args.formula
    if name == "min-period":
        return _fmt(analytics.min_period(args.n, args.p_f), "slots")
    if name == "periodic-success":
        return _fmt(analytics.periodic_success_prob(args.p_c, args.n_p))
    if name == "critical-success":
        return _fmt(analytics.critical_success_prob(args.p_c, args.n_a))
    if name == "contention-delay":
        slots = analytics.contention_delay(args.p_c, args.n_a)
        return _fmt(slots * args.slot_ms, "ms") if args.slot_ms else _fmt(slots, "slots")
    if name == "contention-free-delay":
        slots = analytics.contention_free_delay(args.t_min)
        return _fmt(slots * args.slot_ms, "ms") if args.slot_ms else _fmt(slots, "slots")
    if name == "post-learning-delay":
        split = analytics.PreambleSplit(args.p_c + args.p_f, args.p_c, args.p_f)
        slots = analytics.post_learning_delay(split, args.beta, args.n, args.n_a)
        return _fmt(slots * args.slot_ms, "ms") if args.slot_ms else _fmt(slots, "slots")
    if name == "realloc":
        d_th_slots = args.d_th_ms / args.slot_ms
        return _fmt(analytics.reallocation_count(args.p_c, args.n_a, d_th_slots), "preambles")
    if name == "run-probability":
        return _fmt(analytics.run_probability(args.n_e, args.alpha, args.p))
    if name == "expected-return-time":
        return _fmt(analytics.expected_return_time(args.alpha, args.p), "observations")
    if name == "revert-probability":
        return _fmt(analytics.revert_probability(args.n_e, args.pivot, args.scale))
    if name == "detection-radius":
        return _fmt(analytics.effective_detection_radius(args.r_d, args.m, args.r_c), "m")
    if name == "learned-count":
        return _fmt(
            analytics.learned_count(args.t_slots, args.r_c, args.r_d_eff, args.p_f, args.area),
            "devices",
        )
    if name == "realloc-pmf":
        return _fmt(analytics.realloc_pmf(args.n_t, args.p_f, args.beta, args.b))
    if name == "expected-realloc":
        return _fmt(analytics.expected_realloc(args.n_t, args.p_f, args.beta), "preambles")
    if name == "lowest-delay":
        slots = analytics.lowest_expected_delay(args.p_c, args.e_beta, args.n_a)
        return _fmt(slots * args.slot_ms, "ms") if args.slot_ms else _fmt(slots, "slots")
    raise ValueError(f"unknown formula: {name}")


def _add_analytics_parser(sub) -> None:
    p = sub.add_parser("analytics", help="evaluate one closed-form quantity")
    fsub = p.add_subparsers(dest="formula", required=True, metavar="FORMULA")

    def f(name, **flags):
        fp = fsub.add_parser(name)
        for flag, (ftype, required, default) in flags.items():
            fp.add_argument(flag, type=ftype, required=required, default=default)
        return fp

    f("min-period", **{"--n": (int, True, None), "--p-f": (int, True, None)})
    f("periodic-success", **{"--p-c": (int, True, None), "--n-p": (float, True, None)})
    f("critical-success", **{"--p-c": (int, True, None), "--n-a": (int, True, None)})
    f(
        "contention-delay",
        **{"--p-c": (int, True, None), "--n-a": (int, True, None), "--slot-ms": (float, False, None)},
    )
    f("contention-free-delay", **{"--t-min": (int, True, None), "--slot-ms": (float, False, None)})
    f(
        "post-learning-delay",
        **{
            "--p-c": (int, True, None),
            "--p-f": (int, True, None),
            "--beta": (int, True, None),
            "--n": (int, True, None),
            "--n-a": (int, True, None),
            "--slot-ms": (float, False, None),
        },
    )
    f(
        "realloc",
        **{
            "--p-c": (int, True, None),
            "--n-a": (int, True, None),
            "--d-th-ms": (float, True, None),
            "--slot-ms": (float, False, 0.25),
        },
    )
    f(
        "run-probability",
        **{"--n-e": (int, True, None), "--alpha": (int, True, None), "--p": (float, True, None)},
    )
    f("expected-return-time", **{"--alpha": (int, True, None), "--p": (float, True, None)})
    f(
        "revert-probability",
        **{"--n-e": (float, True, None), "--pivot": (float, True, None), "--scale": (float, False, 0.5)},
    )
    f(
        "detection-radius",
        **{"--r-d": (float, True, None), "--m": (int, True, None), "--r-c": (float, True, None)},
    )
    f(
        "learned-count",
        **{
            "--t-slots": (float, True, None),
            "--r-c": (float, True, None),
            "--r-d-eff": (float, True, None),
            "--p-f": (int, True, None),
            "--area": (float, True, None),
        },
    )
    f(
        "realloc-pmf",
        **{
            "--n-t": (int, True, None),
            "--p-f": (int, True, None),
            "--beta": (int, True, None),
            "--b": (int, True, None),
        },
    )
    f(
        "expected-realloc",
        **{"--n-t": (int, True, None), "--p-f": (int, True, None), "--beta": (int, True, None)},
    )
    f(
        "lowest-delay",
        **{
            "--p-c": (int, True, None),
            "--e-beta": (float, True, None),
            "--n-a": (int, True, None),
            "--slot-ms": (float, False, None),
        },
    )


def _float_repr(x: float) -> str:
    return repr(float(x))


def _write_cdf(path: Path, agg) -> None:
    values, cum = agg.cdf()
    lines = ["delay_ms,cumulative_probability"]
    for v, c in zip(values, cum):
        lines.append(f"{_float_repr(v)},{_float_repr(c)}")
    if agg.censored > 0 or len(values) == 0:
        # censored mass closes the file at 1.0 on the horizon; the fraction
        # itself is reported in summary.json
        lines.append(f"{_float_repr(agg.horizon_ms)},{_float_repr(1.0)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_curve(path: Path, agg) -> None:
    lines = ["time_ms,mean_fraction_correct"]
    for i, frac in enumerate(agg.mean_curve):
        lines.append(f"{_float_repr((i + 1) * agg.slot_ms)},{_float_repr(frac)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cmd_simulate(args) -> int:
    config = SimConfig.from_json(args.config) if args.config else SimConfig()
    if args.seed is not None:
        config.master_seed = args.seed
    if args.runs is not None:
        config.runs = args.runs

    if args.sweep is not None:
        if args.sweep not in SWEEPABLE:
            print(
                f"error: sweep parameter must be one of {', '.join(SWEEPABLE)}",
                file=sys.stderr,
            )
            return USAGE_ERROR
        if not args.values:
            print("error: --sweep requires --values", file=sys.stderr)
            return USAGE_ERROR
        caster = int if args.sweep == "memory_bits" else float
        try:
            values = [caster(v) for v in args.values.split(",")]
        except ValueError as exc:
            print(f"error: bad sweep value: {exc}", file=sys.stderr)
            return USAGE_ERROR
        param = args.sweep
    else:
        if args.values:
            print("error: --values requires --sweep", file=sys.stderr)
            return USAGE_ERROR
        param, values = "single", [None]

    points = []
    for value in values:
        cfg = replace(config, **{param: value}) if value is not None else config
        bad = [f"{name} ({detail})" for name, ok, detail in cfg.validate() if not ok]
        if bad:
            print(
                f"error: sweep value {value!r} violates: {'; '.join(bad)}",
                file=sys.stderr,
            )
            return USAGE_ERROR
        points.append((value, cfg))

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory not writable: {exc}", file=sys.stderr)
        return RUNTIME_ERROR

    summary = {
        "sweep_parameter": param,
        "master_seed": config.master_seed,
        "runs_per_point": config.runs,
        "points": [],
    }
    for value, cfg in points:
        tag = "base" if value is None else f"{value:g}"
        agg = monte_carlo(cfg, parallel=args.parallel)
        _write_cdf(out / f"delay_cdf_{param}_{tag}.csv", agg)
        _write_curve(out / f"learned_frac_{param}_{tag}.csv", agg)
        summary["points"].append(
            {
                "value": value,
                "mean_delay_ms": None if math.isnan(agg.mean_delay_ms) else agg.mean_delay_ms,
                "threshold_satisfaction": agg.satisfaction,
                "peak_learned_correct_pct": agg.peak_learned_pct,
                "censored_fraction": agg.censored_fraction,
                "pooled_delays": agg.pooled_total,
                "runs": agg.runs,
            }
        )
        print(
            f"{param}={tag}: satisfaction={agg.satisfaction:.4f} "
            f"mean_delay={agg.mean_delay_ms:.4f} ms peak_correct={agg.peak_learned_pct:.2f}%"
        )
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return 0


def _cmd_validate(args) -> int:
    try:
        config = SimConfig.from_json(args.config)
    except json.JSONDecodeError as exc:
        print(f"error: malformed config: line {exc.lineno}, column {exc.colno}: {exc.msg}")
        return USAGE_ERROR
    except (OSError, TypeError, ValueError) as exc:
        print(f"error: {exc}")
        return USAGE_ERROR
    ok_all = True
    for name, ok, detail in config.validate():
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        ok_all = ok_all and ok
    return 0 if ok_all else USAGE_ERROR


def build_parser() -> _Parser:
    parser = _Parser(prog="rachlearn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    _add_analytics_parser(sub)

    sim = sub.add_parser("simulate", help="run a Monte Carlo experiment and write data files")
    sim.add_argument("--config", type=str, default=None, help="SimConfig JSON (defaults used if omitted)")
    sim.add_argument("--out", type=str, required=True, help="output directory")
    sim.add_argument("--seed", type=int, default=None, help="master seed override")
    sim.add_argument("--runs", type=int, default=None, help="runs per sweep point")
    sim.add_argument("--parallel", type=int, default=1, help="max worker processes")
    sim.add_argument("--sweep", type=str, default=None, help=f"one of {', '.join(SWEEPABLE)}")
    sim.add_argument("--values", type=str, default=None, help="comma-separated sweep values")

    val = sub.add_parser("validate", help="check a config file against every rule")
    val.add_argument("--config", type=str, required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    try:
        if args.command == "analytics":
            print(_analytics_dispatch(args))
            return 0
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "validate":
            return _cmd_validate(args)
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:  # noqa: BLE001 - boundary: report and exit nonzero
        print(f"runtime failure: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    return USAGE_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
