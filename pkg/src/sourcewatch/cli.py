"""Command line entry points.

    sourcewatch serve ...            run the HTTP service
    sourcewatch simulate run ...     replay a crisis script, print the trace
    sourcewatch simulate assert ...  replay and check expectations (CI-able)
    sourcewatch registry validate    parse a registry file and report
    sourcewatch matrix show ...      print an assessment matrix as a table
    sourcewatch matrix export ...    write per-attribute scores as CSV
    sourcewatch store export ...     dump a scenario store to CSV
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from . import __version__
from .errors import SourcewatchError
from .registry import load_registry_file
from .service import ServiceConfig, serve as run_service
from .similarity import build_assessment_matrix, matrix_csv_rows, matrix_rows
from .simulator import (
    assert_trace,
    bundled_script_path,
    expectation_outcomes,
    load_script,
    run_script,
)
from .store import ScenarioStore


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
@click.version_option(version=__version__, prog_name="sourcewatch")
def main():
    """Data-source failover manager for digital-twin ingress."""


# -- service -----------------------------------------------------------------------

@main.command()
@click.option("--registry", "registry_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Registry file to serve.")
@click.option("--store", "store_dir", required=True, type=click.Path(),
              help="Scenario store directory (created if missing).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8787, show_default=True, type=int)
@click.option("--grace-multiplier", default=3.0, show_default=True,
              type=float, help="Staleness horizon multiplier on the "
                               "delivery period.")
@click.option("--margin-s", default=1.0, show_default=True, type=float,
              help="Extra seconds on top of the delivery delay.")
@click.option("--hysteresis", default=0.0, show_default=True, type=float,
              help="Rank advantage a challenger needs before a switch.")
@click.option("--buffer-size", default=256, show_default=True, type=int,
              help="Event stream replay buffer length.")
@click.option("--sweep-interval", "sweep_interval_s", default=1.0,
              show_default=True, type=float,
              help="Seconds between staleness sweeps.")
@click.option("--token", default=None,
              help="Bearer token for mutating requests (falls back to "
                   "the SOURCEWATCH_TOKEN environment variable).")
def serve(**kwargs):
    """Run the HTTP service until interrupted."""
    try:
        config = ServiceConfig(**kwargs)
    except SourcewatchError as exc:
        _fail(str(exc))
    run_service(config)


# -- registry ----------------------------------------------------------------------

@main.group()
def registry():
    """Registry file utilities."""


@registry.command("validate")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
def registry_validate(path):
    """Parse PATH and report what it declares."""
    try:
        loaded = load_registry_file(path)
    except SourcewatchError as exc:
        _fail(str(exc))
    click.echo(f"ok: version {loaded.version}")
    for data_type in loaded.data_types():
        ids = loaded.sources_of(data_type)
        standard = loaded.standard_source(data_type) or "-"
        click.echo(f"  {data_type}: {len(ids)} sources, "
                   f"standard {standard}")


# -- matrices -----------------------------------------------------------------------

def _build_matrix(registry_path, data_type):
    loaded = load_registry_file(registry_path)
    return build_assessment_matrix(loaded, data_type)


@main.group()
def matrix():
    """Assessment matrix utilities."""


@matrix.command("show")
@click.option("--registry", "registry_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--data-type", required=True)
def matrix_show(registry_path, data_type):
    """Print the pairwise score table for one data type."""
    try:
        built = _build_matrix(registry_path, data_type)
    except SourcewatchError as exc:
        _fail(str(exc))
    rows = matrix_rows(built)
    widths = [max(len(str(row[i])) for row in rows)
              for i in range(len(rows[0]))]
    for row in rows:
        line = "  ".join(str(cell).ljust(widths[i])
                         for i, cell in enumerate(row))
        click.echo(line.rstrip())
    click.echo(f"\ndigest: {built.digest}")


@matrix.command("export")
@click.option("--registry", "registry_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--data-type", required=True)
@click.option("--out", required=True, type=click.Path(writable=True))
def matrix_export(registry_path, data_type, out):
    """Write per-attribute pair scores to a CSV file."""
    try:
        built = _build_matrix(registry_path, data_type)
    except SourcewatchError as exc:
        _fail(str(exc))
    fields = ["source-a", "source-b", "category", "attribute", "score",
              "weight"]
    with open(out, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=fields)
        writer.writeheader()
        count = 0
        for row in matrix_csv_rows(built):
            writer.writerow(row)
            count += 1
    click.echo(f"wrote {count} rows to {out}")


# -- scenario store -------------------------------------------------------------------

@main.group()
def store():
    """Scenario store utilities."""


@store.command("export")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(writable=True))
@click.option("--kind", default=None,
              type=click.Choice(["observation", "transition", "decision",
                                 "operator-action"]))
@click.option("--data-type", default=None)
@click.option("--t0", default=None, type=float)
@click.option("--t1", default=None, type=float)
def store_export(directory, out, kind, data_type, t0, t1):
    """Export stored records (optionally filtered) to a CSV file."""
    bounds = {}
    if t0 is not None:
        bounds["t0"] = t0
    if t1 is not None:
        bounds["t1"] = t1
    try:
        opened = ScenarioStore(directory)
        records = opened.replay(kind=kind, data_type=data_type, **bounds)
        opened.close()
    except SourcewatchError as exc:
        _fail(str(exc))
    with open(out, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["seq", "at", "kind", "data-type", "body"])
        for record in records:
            writer.writerow([
                record.seq, record.at, record.kind,
                record.body.get("data-type", ""),
                json.dumps(record.body, sort_keys=True),
            ])
    click.echo(f"wrote {len(records)} records to {out}")


# -- simulator ------------------------------------------------------------------------

def _load_script_arg(script):
    path = Path(script)
    if not path.exists():
        bundled = bundled_script_path(path.stem)
        if bundled.exists():
            path = bundled
        else:
            _fail(f"no such script: {script}")
    try:
        return load_script(path)
    except SourcewatchError as exc:
        _fail(str(exc))


def _print_trace(report):
    click.echo(f"script {report.name}: seed {report.seed}, "
               f"{report.duration_ms} ms, "
               f"{report.observation_count} observations")
    for transition in report.transitions:
        click.echo(f"  {transition['at']:>10.1f}s  "
                   f"{transition['source-id']}: "
                   f"{transition['from'] or 'untracked'} -> "
                   f"{transition['to']} ({transition['reason']})")
    for decision in report.decisions:
        chosen = decision["chosen"] or "-"
        click.echo(f"  {decision['decided-at']:>10.1f}s  DECISION "
                   f"{decision['action']} -> {chosen}: "
                   f"{decision['rationale']}")
    for data_type, info in sorted(report.final.items()):
        state = info["state"] or "-"
        click.echo(f"final {data_type}: {info['source-id'] or 'NONE'} "
                   f"({state}){' ALARM' if info['alarm'] else ''}")


@main.group()
def simulate():
    """Crisis rehearsal scripts."""


@simulate.command("run")
@click.argument("script")
@click.option("--seed", default=None, type=int,
              help="Override the script's seed.")
@click.option("--export-trace", "export_trace", default=None,
              type=click.Path(writable=True),
              help="Also write the full trace as JSON.")
def simulate_run(script, seed, export_trace):
    """Replay SCRIPT (a path or a bundled name such as 'flood')."""
    loaded = _load_script_arg(script)
    report = run_script(loaded, seed=seed)
    _print_trace(report)
    if export_trace:
        with open(export_trace, "w", encoding="utf-8") as handle:
            json.dump(report.to_doc(), handle, indent=2, sort_keys=True)
        click.echo(f"trace written to {export_trace}")


@simulate.command("assert")
@click.argument("script")
@click.option("--seed", default=None, type=int,
              help="Override the script's seed.")
def simulate_assert(script, seed):
    """Replay SCRIPT and fail (exit 1) unless its expectations hold."""
    loaded = _load_script_arg(script)
    report, failures = assert_trace(loaded, seed=seed)
    outcomes = expectation_outcomes(report.decisions, loaded.expectations)
    for index, (expectation, met) in enumerate(
            zip(loaded.expectations, outcomes)):
        click.echo(f"{'PASS' if met else 'FAIL'} expectation {index + 1}: "
                   f"{json.dumps(expectation, sort_keys=True)}")
    click.echo(f"{sum(outcomes)}/{len(loaded.expectations)} expectations "
               f"met, {len(report.decisions)} decisions")
    if failures:
        for failure in failures:
            click.echo(f"error: {failure}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
