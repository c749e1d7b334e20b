"""Command line: ``mmdn run | bench | stats | check``.

Results go to ``<out>/records.jsonl`` (one JSON record per line, appended)
and ``<out>/summary.csv`` (rebuilt from every record in the file).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, fields
from pathlib import Path

from .checks import run_checks
from .hybrid import MODES, RunConfig, RunRecord, run_hybrid, run_pair, summarize, win_loss
from .problems import PROBLEMS

log = logging.getLogger("mmdn")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2
SUMMARY_COLUMNS = ("problem", "mode", "seed_count", "median_d2", "q10_d2", "q90_d2", "median_budget")
CONFIG_KEYS = {f.name for f in fields(RunConfig)}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def load_config_file(path) -> list:
    """JSON file holding one config object or {"runs": [...]}; returns a list of dicts."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from None
    runs = data.get("runs", [data]) if isinstance(data, dict) else None
    if not isinstance(runs, list) or not all(isinstance(r, dict) for r in runs):
        raise ConfigError("config must be an object or {\"runs\": [objects]}")
    for r in runs:
        unknown = set(r) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return runs


def make_config(d: dict) -> RunConfig:
    if "problem" not in d:
        raise ConfigError("config needs a 'problem'")
    if str(d["problem"]).lower() not in PROBLEMS:
        raise ConfigError(f"unknown problem {d['problem']!r}; available: {', '.join(PROBLEMS)}")
    try:
        return RunConfig(**d)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from None


def _parse_seeds(text: str) -> list:
    """'0,1,2' or '0-9' (inclusive) or a mix of both."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            seeds.extend(range(int(a), int(b) + 1))
        elif part:
            seeds.append(int(part))
    return seeds


def _cli_overrides(args) -> dict:
    d = {}
    for key in ("problem", "mode", "mu", "n1", "n2", "kernel", "theta", "out"):
        v = getattr(args, key, None)
        if v is not None:
            d[key] = v
    if getattr(args, "seeds", None) is not None:
        d["seeds"] = _parse_seeds(args.seeds)
    return d


# ---------------------------------------------------------------------------
# execution


def _execute(cfg: RunConfig, seed: int, baseline: bool) -> list:
    if cfg.mode == "hybrid" and baseline:
        return [r.to_json() for r in run_pair(cfg, seed)]
    return [run_hybrid(cfg, seed).to_json()]


def _worker(cfg_dict: dict, seed: int, baseline: bool):
    logging.basicConfig(level=logging.WARNING)
    return _execute(RunConfig(**cfg_dict), seed, baseline)


def read_records(path) -> list:
    path = Path(path)
    if not path.exists():
        return []
    with path.open() as fh:
        return [RunRecord.from_json(line) for line in fh if line.strip()]


def write_summary(records, path) -> list:
    rows = summarize(records)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            d = asdict(r)
            w.writerow([d[c] if isinstance(d[c], (str, int)) else repr(d[c]) for c in SUMMARY_COLUMNS])
    return rows


def _print_rows(rows):
    print(f"{'problem':<10} {'mode':<13} {'seeds':>5} {'median':>10} {'q10':>10} {'q90':>10} {'budget':>10}")
    for r in rows:
        print(f"{r.problem:<10} {r.mode:<13} {r.seed_count:>5} {r.median_d2:>10.5f} {r.q10_d2:>10.5f} "
              f"{r.q90_d2:>10.5f} {r.median_budget:>10.1f}")
    wl = win_loss(rows)
    if wl:
        print("hybrid vs baseline (median):", ", ".join(f"{p} {v}" for p, v in sorted(wl.items())))


def _append(out_dir: Path, lines) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "records.jsonl").open("a") as fh:
        for line in lines:
            fh.write(line + "\n")


def _plots(records, out_dir: Path) -> None:
    from .plotting import plot_record, plot_summary  # matplotlib only when asked for

    for r in records:
        plot_record(r, out_dir / f"{r.problem}_{r.mode}_seed{r.seed}.png")
    plot_summary(records, out_dir / "summary.png")


def _finish(out_dir: Path, plot: bool = False) -> None:
    records = read_records(out_dir / "records.jsonl")
    _print_rows(write_summary(records, out_dir / "summary.csv"))
    if plot:
        _plots(records, out_dir)


def cmd_run(args) -> int:
    d = load_config_file(args.config)[0] if args.config else {}
    d.update(_cli_overrides(args))
    cfg = make_config(d)
    out_dir = Path(cfg.out or "results")
    failed = 0
    for seed in cfg.seeds:
        try:
            lines = _execute(cfg, seed, not args.no_baseline)
        except Exception as err:
            log.error("seed %s failed: %s", seed, err)
            failed += 1
            continue
        _append(out_dir, lines)
        rec = RunRecord.from_json(lines[0])
        print(f"seed {seed}: {rec.mode} delta2={rec.delta2:.6g} status={rec.status}")
    _finish(out_dir, args.plot)
    return EXIT_FAILED if failed else EXIT_OK


def cmd_bench(args) -> int:
    runs = load_config_file(args.config) if args.config else [{}]
    overrides = _cli_overrides(args)
    cfgs = [make_config({**r, **overrides}) for r in runs]
    out_dir = Path(args.out or cfgs[0].out or "results")
    jobs = [(asdict(c), s) for c in cfgs for s in c.seeds]
    workers = max(1, min(args.workers or os.cpu_count() or 1, len(jobs)))
    results, failures = {}, []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futs = {pool.submit(_worker, c, s, not args.no_baseline): i for i, (c, s) in enumerate(jobs)}
        for fut in as_completed(futs):
            i = futs[fut]
            problem, seed = jobs[i][0]["problem"], jobs[i][1]
            try:
                results[i] = fut.result()
                print(f"{problem} seed {seed}: done")
            except Exception as err:
                failures.append(i)
                print(f"{problem} seed {seed}: FAILED ({err})", file=sys.stderr)
    # appended in job order so the file does not depend on completion order
    _append(out_dir, [line for i in sorted(results) for line in results[i]])
    _finish(out_dir, args.plot)
    return EXIT_FAILED if failures else EXIT_OK


def cmd_stats(args) -> int:
    path = Path(args.records)
    if path.is_dir():
        path = path / "records.jsonl"
    try:
        records = read_records(path)
    except (json.JSONDecodeError, TypeError) as err:
        raise ConfigError(f"malformed records file {path}: {err}") from None
    if not records:
        raise ConfigError(f"no records in {path}")
    rows = write_summary(records, args.summary or path.with_name("summary.csv"))
    _print_rows(rows)
    if args.plot:
        _plots(records, path.parent)
    return EXIT_OK


def cmd_check(args) -> int:
    results = run_checks()
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.ok for r in results) else EXIT_FAILED


# ---------------------------------------------------------------------------


def _add_run_flags(p):
    p.add_argument("--problem", help=f"one of: {', '.join(PROBLEMS)}")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--mu", type=int, help="population size (default 40 for k=2, 91 for k=3)")
    p.add_argument("--n1", type=int, help="NSGA-II generations (default 300)")
    p.add_argument("--n2", type=int, help="Newton iterations (default 5)")
    p.add_argument("--kernel", choices=("preset", "auto", "gaussian", "laplace"),
                   help="preset: per-problem table (default); auto: condition-number grid search")
    p.add_argument("--theta", type=float, help="length-scale for an explicit kernel family")
    p.add_argument("--seeds", help="e.g. 0,1,2 or 0-9")
    p.add_argument("--out", help="output directory (default: results)")
    p.add_argument("--config", help="JSON config file; command-line flags override it")
    p.add_argument("--no-baseline", action="store_true",
                   help="hybrid mode: skip the budget-matched NSGA-II record")
    p.add_argument("--plot", action="store_true", help="also write PNG figures to the output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmdn", description="NSGA-II + MMD-Newton hybrid runs")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("run", help="run one configuration over its seeds"))
    bench = sub.add_parser("bench", help="run every config of a file over its seeds in parallel")
    _add_run_flags(bench)
    bench.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    stats = sub.add_parser("stats", help="aggregate records into median and 10/90% quantiles")
    stats.add_argument("records", help="records.jsonl or the directory holding it")
    stats.add_argument("--summary", help="summary CSV path (default: next to the records)")
    stats.add_argument("--plot", action="store_true", help="write PNG figures next to the records")
    sub.add_parser("check", help="run the built-in oracle checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"run": cmd_run, "bench": cmd_bench, "stats": cmd_stats, "check": cmd_check}[args.command]
    try:
        return handler(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
