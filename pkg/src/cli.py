"""
Command-line front end.

    bellsim run CONFIG            simulate, write events.csv, report.json, manifest.json
    bellsim analyze EVENTS CONFIG recompute the CHSH report from an event table
    bellsim scan CONFIG           sweep one setting (or all of them) and write scan.csv
    bellsim diagnose CONFIG       MI / freedom / CF diagnostics, regularity check
    bellsim table EVENTS          print an event table in the recorded-data layout

Exit codes: 0 success, 1 input or config error, 2 model or runtime error.
"""
from __future__ import annotations

import csv
import functools
import logging
import shlex
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np
from pydantic import BaseModel

from . import __version__
from .JsonFile import JsonFile
from .config import SettingAngles, load_config
from .core import ConditioningContext, SettingPair
from .enums import ConditioningKind, ExitCode, ScanParameter
from .errors import BellSimError, InsufficientDataError
from .estimators import ChshReport, chsh_statistic, counterfactual_average, regularity_check
from .events import emit_event_table, read_event_csv, render_text_table, write_event_csv
from .models import CATALOG
from .quadrature import (
    bound_chain,
    cf_freedom_report,
    freedom_diagnostic,
    mi_survey,
    model_chsh,
    pair_context,
)
from .sampling import rng_metadata, run_experiment
from .settings import (
    DEFAULT_OUTPUT_DIR,
    EVENTS_FILE,
    MANIFEST_FILE,
    OUTPUT_DIR_ENV,
    REPORT_FILE,
    SCAN_FILE,
    TOOL_NAME,
    WORKERS_ENV,
)
from .support import file_digest

logger = logging.getLogger(__name__)

SCAN_HEADER = ("parameter_value", "S_analytic", "S_empirical", "std_error")


class RunManifest(BaseModel):
    """
    Everything needed to reproduce a run bit-exactly, plus what it produced.
    """
    tool: str
    version: str
    command: str
    config: dict
    rng: dict
    workers: int
    debug_lambda: bool
    outputs: dict[str, str]
    digests: dict[str, str]
    duration_seconds: float
    created_at: str

    def to_json(self) -> dict:
        return self.dict()


def handles_errors(command):
    """
    Turn package errors into a message on standard error and the matching exit code.
    """
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except BellSimError as error:
            logger.debug("command failed", exc_info=True)
            click.echo(f"Error: {error}", err=True)
            click.get_current_context().exit(int(error.exit_code))

    return wrapper


def _echo_report(report: ChshReport) -> None:
    click.echo(f"{'pair':<6}{'E':>12}{'std err':>12}{'count':>10}")
    for estimate in report.correlations:
        click.echo(f"{estimate.pair:<6}{estimate.mean:>12.6f}{estimate.std_error:>12.6f}{estimate.count:>10d}")
    verdict = click.style("violates |S| <= 2", fg="red") if report.violates_bound else "within |S| <= 2"
    click.echo(f"S = {report.s_value:.6f} ± {report.s_std_error:.6f}  (|S| = {abs(report.s_value):.6f}, {verdict})")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", count=True, help="-v for progress, -vv for debug output.")
@click.version_option(__version__, prog_name=TOOL_NAME)
def bellsim(verbose: int) -> None:
    """
    Simulate and analyze CHSH Bell tests over local hidden-variable models.
    """
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger().setLevel(level)


@bellsim.command("run")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("-o", "--output-dir", envvar=OUTPUT_DIR_ENV, default=DEFAULT_OUTPUT_DIR, show_default=True,
              type=click.Path(file_okay=False), help="Where to write the run's files.")
@click.option("-w", "--workers", envvar=WORKERS_ENV, default=1, show_default=True, type=click.IntRange(min=1),
              help="Worker processes; the output does not depend on it.")
@click.option("--debug-lambda", is_flag=True, help="Write hidden-variable values instead of 'unknown'.")
@click.option("--degrees", is_flag=True, help="Settings in the config file are in degrees.")
@handles_errors
def cmd_run(config_path: str, output_dir: str, workers: int, debug_lambda: bool, degrees: bool) -> None:
    """
    Run the experiment in CONFIG_PATH and record its events.
    """
    config = load_config(config_path, degrees=degrees)
    started = time.perf_counter()

    stream = run_experiment(config, workers=workers, retain_lambda=debug_lambda)
    report = chsh_statistic(stream, config)

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    events_path = write_event_csv(stream, out / EVENTS_FILE, include_lambda=debug_lambda)
    report_path = JsonFile(out / REPORT_FILE).write(report.to_json())

    outputs = {"events": str(events_path), "report": str(report_path)}
    manifest = RunManifest(
        tool=TOOL_NAME,
        version=__version__,
        command=shlex.join(sys.argv) if sys.argv else TOOL_NAME,
        config=config.to_json(),
        rng=rng_metadata(),
        workers=workers,
        debug_lambda=debug_lambda,
        outputs=outputs,
        digests={name: file_digest(path) for name, path in outputs.items()},
        duration_seconds=time.perf_counter() - started,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    manifest_path = JsonFile(out / MANIFEST_FILE).write(manifest.to_json())

    _echo_report(report)
    click.echo(f"wrote {events_path}, {report_path}, {manifest_path}")


@bellsim.command("analyze")
@click.argument("events_path", type=click.Path(dir_okay=False))
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("-o", "--output", type=click.Path(dir_okay=False),
              help="Report file; defaults to report.json next to EVENTS_PATH.")
@click.option("--degrees", is_flag=True, help="Settings in the config file are in degrees.")
@handles_errors
def cmd_analyze(events_path: str, config_path: str, output: str | None, degrees: bool) -> None:
    """
    Recompute correlations and S from a recorded event table.
    """
    config = load_config(config_path, degrees=degrees)
    stream = read_event_csv(events_path)
    if len(stream) == 0:
        raise InsufficientDataError(f"event table {events_path} holds no events")
    report = chsh_statistic(stream, config)
    report_path = JsonFile(Path(output) if output else Path(events_path).with_name(REPORT_FILE)).write(
        report.to_json()
    )
    _echo_report(report)
    click.echo(f"wrote {report_path}")


def scan_settings(settings: SettingAngles, parameter: ScanParameter, value: float) -> SettingAngles:
    """
    :return: ``settings`` with one setting replaced by ``value``, or all four rotated by it
    """
    values = settings.dict()
    if parameter is ScanParameter.ROTATION:
        values = {key: angle + value for key, angle in values.items()}
    else:
        values[parameter.value] = value
    return SettingAngles(**values)


@bellsim.command("scan")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("-p", "--parameter", type=click.Choice([p.value for p in ScanParameter]), default="rotation",
              show_default=True, help="Setting to sweep, or a rotation of all four.")
@click.option("--start", type=float, default=0.0, show_default=True)
@click.option("--stop", type=float, default=float(np.pi), show_default="π")
@click.option("--steps", type=click.IntRange(min=1), default=33, show_default=True)
@click.option("--trials", type=click.IntRange(min=1), help="Trials per point; defaults to the config's.")
@click.option("--no-empirical", is_flag=True, help="Only compute the analytic curve.")
@click.option("-o", "--output-dir", envvar=OUTPUT_DIR_ENV, default=DEFAULT_OUTPUT_DIR, show_default=True,
              type=click.Path(file_okay=False))
@click.option("-w", "--workers", envvar=WORKERS_ENV, default=1, type=click.IntRange(min=1))
@click.option("--degrees", is_flag=True, help="Config settings and the range are in degrees.")
@handles_errors
def cmd_scan(config_path: str, parameter: str, start: float, stop: float, steps: int, trials: int | None,
             no_empirical: bool, output_dir: str, workers: int, degrees: bool) -> None:
    """
    Sweep a setting and write S against it to scan.csv.
    """
    config = load_config(config_path, degrees=degrees)
    model = CATALOG.get_model(config.model)
    parameter = ScanParameter(parameter)
    if degrees:
        start, stop = np.radians(start), np.radians(stop)
    empirical = model.is_sampleable and not no_empirical

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    scan_path = out / SCAN_FILE
    with open(scan_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SCAN_HEADER)
        for value in np.linspace(start, stop, steps):
            settings = scan_settings(config.settings, parameter, float(value))
            analytic = model_chsh(model, settings, config.conditioning_side)
            row = [repr(float(value)), repr(analytic), "", ""]
            if empirical:
                point = config.replace(settings=settings.dict(), trials=trials or config.trials)
                report = chsh_statistic(run_experiment(point, workers=workers, retain_lambda=False), point)
                row[2:] = [repr(report.s_value), repr(report.s_std_error)]
            logger.info("scan %s=%.6f S=%.6f", parameter.value, value, analytic)
            writer.writerow(row)
    click.echo(f"wrote {scan_path} ({steps} rows)")


def _status(ok: bool, good: str, bad: str) -> str:
    return click.style(good, fg="green") if ok else click.style(bad, fg="red")


@bellsim.command("diagnose")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--debug-lambda", is_flag=True, help="Also run the experiment and check λ regularity.")
@click.option("--trials", type=click.IntRange(min=1), help="Trials for the regularity run.")
@click.option("-w", "--workers", envvar=WORKERS_ENV, default=1, type=click.IntRange(min=1))
@click.option("--json", "json_path", type=click.Path(dir_okay=False), help="Also write diagnostics as JSON.")
@click.option("--degrees", is_flag=True, help="Settings in the config file are in degrees.")
@handles_errors
def cmd_diagnose(config_path: str, debug_lambda: bool, trials: int | None, workers: int,
                 json_path: str | None, degrees: bool) -> None:
    """
    Measurement-independence, freedom and counterfactual-freedom diagnostics.
    """
    config = load_config(config_path, degrees=degrees)
    model = CATALOG.get_model(config.model)
    results: dict = {"model": model.name}

    if model.lambda_density is None:
        click.echo(f"model {model.name!r} is oracle-only")
        click.echo("MI diagnostic: not applicable")
        click.echo("freedom diagnostic: not applicable")
        click.echo("CF freedom: not applicable")
        results.update(mi="not applicable", freedom="not applicable", cf="not applicable")
        if json_path:
            JsonFile(json_path).write(results)
        return

    survey = mi_survey(model, config)
    mi_respected = all(entry.mi_respected for entry in survey)
    click.echo("measurement independence (TV distance between λ densities):")
    for entry in survey:
        first, second = entry.context_pair
        click.echo(f"  {first.kind}({first.setting}) vs {second.kind}({second.setting}): {entry.tv_distance:.9f}")
    click.echo(_status(mi_respected, "MI respected", "MI violated"))
    results["mi"] = {"respected": mi_respected, "entries": [entry.dict() for entry in survey]}

    freedom = freedom_diagnostic(model, config)
    click.echo("freedom, p(a,b|λ) = p(a,b), under the run's λ mixture:")
    for entry in freedom.pairs:
        click.echo(f"  {entry.pair}: max |p(a,b|λ) - p(a,b)| = {entry.max_deviation:.6g}")
    click.echo(_status(freedom.freedom_respected, "F respected", "F violated"))
    results["freedom"] = freedom.dict()

    cf = cf_freedom_report(model, config, config.conditioning_side)
    click.echo("counterfactual freedom (zero-sets of p(λ|a_i,b_k)):")
    for entry in cf.pairs:
        points = ", ".join(f"{x:.6f}" for x in entry.zero_set) or "none"
        click.echo(f"  {entry.pair}: {{{points}}}")
    click.echo(_status(bool(cf.cf_respected), cf.status, cf.status))
    results["cf"] = cf.dict()

    if ConditioningKind.UNCONDITIONED in model.contexts:
        chain = bound_chain(model, config)
        click.echo(f"S = ∫pC = {chain.s_value:.9f} <= ∫p|C| = {chain.abs_integral:.9f} <= {chain.bound:.9f}")
        results["bound_chain"] = chain.dict()
        ensemble = ConditioningContext.unconditioned()
    else:
        ensemble = pair_context(model, config.settings.as_tuple(), SettingPair(1, 1), config.conditioning_side)
    average = counterfactual_average(model, config, config.trials, ensemble)
    click.echo(
        f"simulator-only counterfactual ⟨s⟩ over {average.ensemble}: "
        f"{average.mean:.6f} ± {average.std_error:.6f}"
    )
    results["counterfactual_average"] = average.dict()

    if debug_lambda:
        point = config.replace(trials=trials) if trials else config
        regularity = regularity_check(run_experiment(point, workers=workers, retain_lambda=True))
        click.echo("λ regularity across setting pairs (two-sample KS sup-distance):")
        for entry in regularity.entries:
            mark = "pass" if entry.passed else "FAIL"
            click.echo(f"  {entry.first} vs {entry.second}: {entry.statistic:.6f} (threshold {entry.threshold:.6f}) {mark}")
        click.echo(_status(regularity.passed, "λ regular across settings", "λ not regular across settings"))
        results["regularity"] = regularity.to_json()

    if json_path:
        JsonFile(json_path).write(results)


@bellsim.command("table")
@click.argument("events_path", type=click.Path(dir_okay=False))
@click.option("-n", "--limit", type=click.IntRange(min=1), help="Show at most this many events.")
@handles_errors
def cmd_table(events_path: str, limit: int | None) -> None:
    """
    Print an events.csv as an aligned table.
    """
    stream = read_event_csv(events_path)
    click.echo(render_text_table(emit_event_table(stream, include_lambda=True), limit=limit))


def main(argv: list[str] | None = None) -> int:
    """
    Run the command line

    :return: The exit code
    """
    try:
        bellsim.main(args=argv, prog_name=TOOL_NAME)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    return int(ExitCode.OK)
