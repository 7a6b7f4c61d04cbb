"""Command-line entry point: ``hpmc run | analyze | selftest``.

Diagnostics go to stderr; data goes to files. ``run`` and ``analyze`` also
print a short summary to stdout unless ``--quiet`` is given.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .analysis import aggregate, emit_plot_data, summary_report, write_records
from .config import ConfigError, config_from_flat, load_config, parse_overrides
from .experiment import (
    SampleFileError,
    read_samples,
    records_from_samples,
    run_experiment,
    write_manifest,
    write_samples,
)
from .selftest import run_selftest

log = logging.getLogger("hpmc")

SAMPLES_FILE = "samples.csv"
RECORDS_FILE = "records.csv"
MANIFEST_FILE = "manifest.json"
REPORT_FILE = "report.txt"

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hpmc", description="Harmonic passive motor control clock experiment")
    p.add_argument("--quiet", action="store_true", help="suppress the summary and progress messages")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate the clock experiment")
    run.add_argument("--config", type=Path, help="INI-style config file")
    run.add_argument("--out", type=Path, default=Path("hpmc-out"), help="output directory")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a config value, e.g. planner.a_max=2.0 (repeatable)")
    run.add_argument("--cycles", type=int, help="shortcut for experiment.cycles_per_target")

    an = sub.add_parser("analyze", help="recompute metrics and figure data from a sample file")
    an.add_argument("samples", type=Path, help="sample file written by 'run'")
    an.add_argument("--out", type=Path, help="output directory (default: next to the samples)")
    an.add_argument("--config", type=Path, help="config file (default: the run's manifest)")
    an.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")

    sub.add_parser("selftest", help="run the fast invariant checks")
    for sp in (run, an):
        sp.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    return p


def _say(args, text: str) -> None:
    if not args.quiet:
        sys.stdout.write(text)
        sys.stdout.flush()


def _load(args, manifest_dir: Path | None = None):
    overrides = parse_overrides(args.set)
    if getattr(args, "cycles", None) is not None:
        overrides["experiment.cycles_per_target"] = str(args.cycles)
    if args.config is not None:
        return load_config(args.config, overrides)
    if manifest_dir is not None and (manifest_dir / MANIFEST_FILE).is_file():
        values = json.loads((manifest_dir / MANIFEST_FILE).read_text())["config"]
        values.update(overrides)
        return config_from_flat(values)
    return load_config(None, overrides)


def cmd_run(args) -> int:
    cfg = _load(args)
    out = args.out
    log.info("running %d movements (%d targets x %d cycles)", cfg.n_movements, cfg.n_targets,
             cfg.cycles_per_target)
    result = run_experiment(cfg)
    out.mkdir(parents=True, exist_ok=True)
    files = [
        write_samples(result.samples, out / SAMPLES_FILE),
        write_records(result.records, out / RECORDS_FILE),
    ]
    report = summary_report(result.records, r_threshold=cfg.r_threshold)
    (out / REPORT_FILE).write_text(report)
    files.append(out / REPORT_FILE)
    write_manifest(cfg, files, out / MANIFEST_FILE)
    _say(args, report)
    n_bad = sum(not r.complete for r in result.records)
    if n_bad:
        log.warning("%d movement(s) aborted or incomplete", n_bad)
    return EXIT_OK


def cmd_analyze(args) -> int:
    path = args.samples
    cfg = _load(args, manifest_dir=path.parent)
    samples = read_samples(path)
    if len(samples["t"]) == 0:
        log.error("%s: no movements in sample file", path)
        return EXIT_FAIL
    records = records_from_samples(samples, cfg)
    for r in records:
        if not r.complete:
            log.warning("movement %d is truncated or degenerate; excluded from aggregates", r.movement_id)
    out = args.out or path.parent / "analysis"
    out.mkdir(parents=True, exist_ok=True)
    write_records(records, out / RECORDS_FILE)
    stats = aggregate(records)
    report = summary_report(records, stats, cfg.r_threshold)
    (out / REPORT_FILE).write_text(report)
    emit_plot_data(records, samples, out, cfg)
    _say(args, report)
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = run_selftest()
    for r in results:
        print(r.line(), file=sys.stderr if not r.passed else sys.stdout)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="hpmc: %(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    handlers = {"run": cmd_run, "analyze": cmd_analyze, "selftest": cmd_selftest}
    try:
        return handlers[args.command](args)
    except FileNotFoundError as e:
        log.error("%s", e)
        return EXIT_USAGE
    except ConfigError as e:
        log.error("config: %s", e)
        return EXIT_USAGE
    except (SampleFileError, OSError, ValueError, RuntimeError) as e:
        log.error("%s", e)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
