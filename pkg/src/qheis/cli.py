"""Command line front end: load a configuration, run suites, emit reports.

Configuration comes from an optional JSON file plus flags, flags winning.
``run`` executes the configured suites and returns the assembled report;
``convergence_study`` re-runs one suite and returns its refinement table
as CSV text.  The process exits 0 exactly when every record passes and
every trend is monotone over its final two levels.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .core import QuadratureSpec, TruncationBox
from .report import (
    VerificationReport,
    sort_records,
    sort_trends,
    trend_csv_text,
    write_trend_csv,
)
from .suites import (
    SINGLE_LAMBDA_SUITES,
    SUITE_ORDER,
    SuiteConfig,
    execute,
    run_suite,
)

_CONFIG_KEYS = {
    "lambdas",
    "n",
    "box",
    "quad",
    "seed",
    "suites",
    "tolerances",
    "levels",
    "report_path",
    "csv_path",
    "threads",
}


def config_from_dict(data: dict) -> SuiteConfig:
    unknown = sorted(set(data) - _CONFIG_KEYS)
    if unknown:
        raise ValueError(f"unknown configuration keys: {unknown}")
    kwargs: dict = {}
    if "lambdas" in data:
        kwargs["lambdas"] = tuple(float(v) for v in data["lambdas"])
    if "n" in data:
        kwargs["n"] = int(data["n"])
    if "box" in data:
        kwargs["box"] = TruncationBox(**data["box"])
    if "quad" in data:
        kwargs["quad"] = QuadratureSpec(**data["quad"])
    if "suites" in data:
        kwargs["suites"] = tuple(data["suites"])
    if "tolerances" in data:
        kwargs["tolerances"] = {
            str(k): float(v) for k, v in data["tolerances"].items()
        }
    for key in ("seed", "levels", "threads"):
        if key in data and data[key] is not None:
            kwargs[key] = int(data[key])
    for key in ("report_path", "csv_path"):
        if key in data and data[key] is not None:
            kwargs[key] = str(data[key])
    return SuiteConfig(**kwargs)


def load_config(path: str) -> SuiteConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def _parse_tolerances(pairs: list[str]) -> dict:
    out: dict = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep:
            raise ValueError(f"expected NAME=VALUE, got {pair!r}")
        if name not in SUITE_ORDER:
            raise ValueError(f"unknown suite in tolerance override: {name!r}")
        out[name] = float(value)
    return out


def _scaled_quad(base: QuadratureSpec, order: int) -> QuadratureSpec:
    # One knob scales both axes, keeping the default r-to-xy node ratio.
    default = QuadratureSpec()
    ratio = default.nodes_r / default.nodes_xy
    return replace(base, nodes_xy=order, nodes_r=max(8, round(order * ratio)))


def apply_flags(cfg: SuiteConfig, args: argparse.Namespace) -> SuiteConfig:
    updates: dict = {}
    if args.lambdas:
        updates["lambdas"] = tuple(args.lambdas)
    if args.n is not None:
        updates["n"] = args.n
    if args.quad_order is not None:
        updates["quad"] = _scaled_quad(cfg.quad, args.quad_order)
    if args.levels is not None:
        updates["levels"] = args.levels
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.suites:
        updates["suites"] = tuple(args.suites)
    if args.tolerances:
        merged = dict(cfg.tolerances)
        merged.update(_parse_tolerances(args.tolerances))
        updates["tolerances"] = merged
    if args.report is not None:
        updates["report_path"] = args.report
    if args.csv is not None:
        updates["csv_path"] = args.csv
    return replace(cfg, **updates) if updates else cfg


def run(config: SuiteConfig) -> VerificationReport:
    """Execute the configured suites and assemble the report.

    Writes the JSON report and the trend CSV when the configuration names
    output paths.  The report body is deterministic for a fixed
    configuration and seed, apart from the runtime fields.
    """
    records, trends, tables, skipped = execute(config)
    report = VerificationReport(
        config=config.echo(),
        records=sort_records(records),
        trends=sort_trends(trends),
        tables=tables,
        skipped=skipped,
    )
    if config.report_path:
        report.write_json(config.report_path)
    if config.csv_path:
        write_trend_csv(report.trends, config.csv_path)
    return report


def convergence_study(config: SuiteConfig, suite: str) -> str:
    """Refinement table for one suite as CSV text.

    Runs the suite at every configured deformation value and returns one
    row per (identity, lambda, level).  A suite without refinement trends
    yields just the header line.
    """
    if suite not in SUITE_ORDER:
        raise ValueError(f"unknown suite {suite!r}")
    if suite in SINGLE_LAMBDA_SUITES:
        cells = [(0.0, 0)]
    else:
        cells = [(lam, i) for i, lam in enumerate(config.lambdas)]
    trends = []
    for lam, i in cells:
        _, trds, _ = run_suite(config, suite, lam, i)
        trends.extend(trds)
    return trend_csv_text(sort_trends(trends))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qheis",
        description="Numerical verification suites for the deformed "
        "Heisenberg convolution algebras.",
    )
    parser.add_argument("--config", metavar="PATH", help="JSON configuration file")
    parser.add_argument(
        "--lambda",
        dest="lambdas",
        metavar="F",
        type=float,
        action="append",
        help="deformation value, repeatable; replaces the configured list",
    )
    parser.add_argument("--n", type=int, metavar="INT", help="spatial degree")
    parser.add_argument(
        "--quad-order",
        type=int,
        metavar="INT",
        help="transverse quadrature nodes; the axis node count scales with it",
    )
    parser.add_argument(
        "--levels", type=int, metavar="INT", help="refinement ladder length"
    )
    parser.add_argument("--seed", type=int, metavar="INT", help="master seed")
    parser.add_argument(
        "--suite",
        dest="suites",
        metavar="NAME",
        action="append",
        choices=SUITE_ORDER,
        help="suite to run, repeatable; default runs all",
    )
    parser.add_argument(
        "--tolerance",
        dest="tolerances",
        metavar="NAME=F",
        action="append",
        help="per-suite tolerance override, repeatable",
    )
    parser.add_argument("--report", metavar="PATH", help="write JSON report here")
    parser.add_argument("--csv", metavar="PATH", help="write trend CSV here")
    return parser


def _print_report(report: VerificationReport, stream) -> None:
    for r in report.records:
        flag = "PASS" if r.passed else "FAIL"
        print(
            f"[{flag}] {r.suite} / {r.identity} lam={r.lam:g} "
            f"residual={r.residual:.3e} tol={r.tolerance:g}",
            file=stream,
        )
    for t in report.trends:
        if not t.monotone_tail:
            chain = " -> ".join(f"{v:.3e}" for v in t.residuals)
            print(
                f"[FAIL] {t.suite} / {t.identity} lam={t.lam:g} "
                f"trend not monotone: {chain}",
                file=stream,
            )
    s = report.summary()
    verdict = "PASS" if s["pass"] else "FAIL"
    line = (
        f"{verdict}: {s['checks']} checks ({s['failed']} failed), "
        f"{s['trends']} trends ({s['non_monotone']} non-monotone)"
    )
    if s["skipped_suites"]:
        line += f", skipped: {', '.join(s['skipped_suites'])}"
    print(line, file=stream)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else SuiteConfig()
        cfg = apply_flags(cfg, args)
    except (OSError, ValueError, TypeError, json.JSONDecodeError) as exc:
        parser.error(str(exc))
    report = run(cfg)
    _print_report(report, sys.stdout)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
