"""Command-line experiment runner.

::

    perturbed-riemann validate CONFIG
    perturbed-riemann run CONFIG [--out DIR] [--threads N]
    perturbed-riemann compare CONFIG [--out DIR] [--threads N]
    perturbed-riemann report DIR

Exit status: 0 when every check passes, 1 when a check fails, 2 for usage or
validation errors, 3 when a study raises.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from perturbed_riemann.config import ConfigError, ExperimentConfig, load_config
from perturbed_riemann.studies import StudyResult, Table, compare_oracles, run_study

__all__ = ["main", "compare_oracles"]

logger = logging.getLogger("perturbed_riemann")

OUT_ENV = "PERTURBED_RIEMANN_OUT"
DEFAULT_OUT = "perturbed_riemann_out"

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class StudyError(RuntimeError):
    pass


# {{{ output


def format_float(x: float) -> str:
    return "%.17g" % x


def table_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([format_float(v) for v in row])
    return buf.getvalue()


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def summary_record(cfg: ExperimentConfig, results: Sequence[StudyResult]) -> dict[str, Any]:
    return _jsonable({
        "passed": all(r.passed for r in results),
        "config": cfg.resolved(),
        "source": cfg.source,
        "folded_profile_means": cfg.folded_means,
        "studies": {
            r.name: {
                "passed": r.passed,
                "checks": [c.as_dict() for c in r.checks],
                "info": r.info,
                "tables": sorted(f"{k}.csv" for k in r.tables),
            }
            for r in results
        },
    })


def write_outputs(outdir: Path, cfg: ExperimentConfig, results: Sequence[StudyResult]) -> None:
    """Single collector: all files are rendered in memory, then written."""
    files: dict[str, str] = {}
    for r in results:
        for name, table in r.tables.items():
            files[f"{name}.csv"] = table_csv(table)
    files["summary.json"] = json.dumps(summary_record(cfg, results), indent=2, sort_keys=True) + "\n"

    outdir.mkdir(parents=True, exist_ok=True)
    for name in sorted(files):
        (outdir / name).write_text(files[name])


def output_dir(args: argparse.Namespace, cfg: ExperimentConfig) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.output:
        return Path(cfg.output)
    return Path(os.environ.get(OUT_ENV) or DEFAULT_OUT)


# }}}


# {{{ commands


def execute(cfg: ExperimentConfig, studies: Sequence[str], threads: int) -> list[StudyResult]:
    def one(kind: str, executor: ThreadPoolExecutor | None) -> StudyResult:
        try:
            return run_study(kind, cfg, executor)
        except Exception as exc:
            raise StudyError(f"study '{kind}' failed: {type(exc).__name__}: {exc}") from exc

    if threads <= 1:
        return [one(k, None) for k in studies]
    # studies fan out over one pool; each study keeps its own time order
    with ThreadPoolExecutor(max_workers=threads) as inner, ThreadPoolExecutor(max_workers=len(studies)) as outer:
        futures = [outer.submit(one, k, inner) for k in studies]
        return [f.result() for f in futures]


def report_results(results: Sequence[StudyResult], out: Path) -> None:
    for r in results:
        for c in r.checks:
            status = "PASS" if c.passed else "FAIL"
            thr = "" if c.threshold is None else f" {c.op} {c.threshold}"
            print(f"[{status}] {r.name}.{c.name} = {c.value:.6g}{thr}")
    print(f"outputs written to {out}")


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    json.dump(_jsonable(cfg.resolved()), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def _run(args: argparse.Namespace, studies: Sequence[str] | None) -> int:
    cfg = load_config(args.config)
    out = output_dir(args, cfg)
    kinds = list(cfg.studies) if studies is None else list(studies)
    try:
        results = execute(cfg, kinds, args.threads)
    except StudyError as exc:
        logger.error("%s", exc)
        return EXIT_RUNTIME
    write_outputs(out, cfg, results)
    report_results(results, out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_run(args: argparse.Namespace) -> int:
    return _run(args, None)


def cmd_compare(args: argparse.Namespace) -> int:
    return _run(args, ["compare"])


def cmd_report(args: argparse.Namespace) -> int:
    from perturbed_riemann.plotting import render_report

    try:
        paths = render_report(args.outdir)
    except FileNotFoundError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    for p in paths:
        print(p)
    return EXIT_OK


# }}}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perturbed-riemann",
        description="Large-time studies of periodically perturbed Riemann problems.",
    )
    parser.add_argument("--seed", dest="global_seed", help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    def runner(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("config", help="YAML experiment config")
        p.add_argument("--out", help=f"output directory (default: config 'output', ${OUT_ENV}, ./{DEFAULT_OUT})")
        p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
        p.add_argument("--seed", help=argparse.SUPPRESS)
        return p

    runner("run", "run the studies listed in the config").set_defaults(func=cmd_run)
    runner("compare", "compare the variational solver with the Godunov oracle").set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="validate a config and print it with defaults filled in")
    p.add_argument("config")
    p.add_argument("--seed", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="render PNG figures from the CSVs of a finished run")
    p.add_argument("outdir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.global_seed is not None or getattr(args, "seed", None) is not None:
        parser.error("--seed is not supported: runs are deterministic and use no randomness")
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")

    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
