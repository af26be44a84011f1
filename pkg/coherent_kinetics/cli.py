"""
Command-line runner for reaction-graph scenarios.

Subcommands:

    simulate  propagate one or more scenario configs and write their outputs
    rates     print the S-T dephasing rate of every reaction operator
    validate  check scenario configs without running them

Usage examples:
    python run_kinetics.py simulate \
        --config configs/standard_rp_coherence.json \
        --output-dir outputs \
        --jobs 2

    python run_kinetics.py rates --ks 1 --kt 0 --measured 0.7

    python run_kinetics.py validate --config configs/standard_rp_coherence.json

Exit codes: 0 on success, 2 for config errors, 3 for numerical or diagnostic
failures. Errors are also written to stderr as one JSON object per line.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from . import __version__
from .config import ScenarioConfig, load_config
from .errors import (
    ConfigSyntaxError,
    DiagnosticFailure,
    KineticsError,
    SchemaError,
    UnitError,
)
from .generators import propagate_exact_series, propagate_stepwise
from .network import step_map, total_generator
from .radical_pair import ConsistencyReport, compare_catalogue
from .timeseries import TimeSeries, write_csv_atomic

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_CONFIG_ERRORS = (ConfigSyntaxError, SchemaError, UnitError)


# ---------------------------------------------------------------------------
# Logging
# ---------------------------------------------------------------------------

def setup_logging(log_file: Optional[str], verbose: bool = False) -> logging.Logger:
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
        handlers=handlers,
        force=True,
    )
    return logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def compare_operators(
    kS: float,
    kT: float,
    q_extra: float = 0.0,
    measured_rate: Optional[float] = None,
) -> pd.DataFrame:
    """Operator name, trace behaviour, S-T dephasing rate and, given a measured rate, the verdict."""
    frame = compare_catalogue(kS, kT, q_extra, measured_rate).to_frame()
    if measured_rate is None:
        frame = frame.drop(columns=["consistent"])
    return frame


def format_report(report: ConsistencyReport) -> str:
    frame = report.to_frame()
    if report.measured_rate is None:
        frame = frame.drop(columns=["consistent"])
    lines = [f"S-T dephasing rates for kS={report.kS:g} 1/s, kT={report.kT:g} 1/s, q={report.q_extra:g} 1/s"]
    if report.measured_rate is not None:
        flagged = report.inconsistent()
        lines.append(f"measured rate: {report.measured_rate:g} 1/s")
        lines.append(f"inconsistent: {', '.join(flagged) if flagged else 'none'}")
    lines.append(frame.to_string(index=False, float_format=lambda v: f"{v:.12g}"))
    return "\n".join(lines) + "\n"


def _write_text_atomic(text: str, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)
    return path


def write_json_atomic(payload: Dict[str, Any], path: Path) -> Path:
    return _write_text_atomic(json.dumps(payload, indent=2, sort_keys=True) + "\n", path)


def write_report(report: ConsistencyReport, stem: Path) -> List[Path]:
    """Write <stem>.txt and <stem>.json side by side."""
    text_path = _write_text_atomic(format_report(report), stem.with_suffix(".txt"))
    json_path = write_json_atomic(report.to_dict(), stem.with_suffix(".json"))
    logger.info("Wrote %s and %s", text_path, json_path)
    return [text_path, json_path]


# ---------------------------------------------------------------------------
# Scenario runs
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    name: str
    timeseries: TimeSeries
    rates_report: Optional[ConsistencyReport] = None
    consistency_report: Optional[ConsistencyReport] = None
    paths: List[Path] = field(default_factory=list)


def propagate(config: ScenarioConfig, progress: bool = False) -> TimeSeries:
    plan = config.integration
    generator = total_generator(config.graph)
    if plan.method == "exact":
        times = np.linspace(0.0, plan.t_final, plan.samples)
        return propagate_exact_series(generator, config.initial, times)
    builder = partial(step_map, config.graph, step_guard=plan.step_guard)
    return propagate_stepwise(
        builder,
        config.initial,
        plan.t_final,
        plan.dt,
        samples=plan.samples,
        rate_scale=generator.rate_scale,
        step_guard=plan.step_guard,
        progress=progress,
    )


def run(config: ScenarioConfig, output_dir: Optional[Path] = None, progress: bool = False) -> RunResult:
    """Propagate a scenario and build the reports it asks for.

    With an output directory, files go to <output_dir>/<name>/.
    """
    logger.info("Running scenario %s (%s, t_final=%g s)", config.name, config.integration.method,
                config.integration.t_final)
    series = propagate(config, progress=progress)
    result = RunResult(config.name, series)

    if "rates-report" in config.outputs or "consistency-report" in config.outputs:
        kS, kT, q = config.rates["kS"], config.rates["kT"], config.rates.get("q", 0.0)
        if "rates-report" in config.outputs:
            result.rates_report = compare_catalogue(kS, kT, q)
        if "consistency-report" in config.outputs:
            result.consistency_report = compare_catalogue(kS, kT, q, config.measured_rate)

    if output_dir is not None:
        target = Path(output_dir) / config.name
        if "timeseries" in config.outputs:
            result.paths.append(write_csv_atomic(series.to_frame(), target / "timeseries.csv"))
        if result.rates_report is not None:
            result.paths.extend(write_report(result.rates_report, target / "rates_report"))
        if result.consistency_report is not None:
            result.paths.extend(write_report(result.consistency_report, target / "consistency_report"))
    logger.info("Finished scenario %s with %d samples", config.name, len(series))
    return result


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

def exit_code_for(exc: Exception) -> int:
    return EXIT_CONFIG if isinstance(exc, _CONFIG_ERRORS) else EXIT_NUMERIC


def error_payload(exc: Exception, source: Optional[str] = None) -> Dict[str, Any]:
    payload: Dict[str, Any] = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, SchemaError):
        payload["violations"] = [{"path": p, "reason": r} for p, r in exc.violations]
    if isinstance(exc, DiagnosticFailure):
        payload["sample_index"] = exc.sample_index
    if source is not None:
        payload["source"] = source
    return payload


def report_error(exc: Exception, source: Optional[str] = None) -> int:
    logger.error("%s%s: %s", f"{source}: " if source else "", type(exc).__name__, exc)
    print(json.dumps(error_payload(exc, source), sort_keys=True), file=sys.stderr)
    return exit_code_for(exc)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        description=(
            "Simulate chemical kinetics as quantum walks on reaction graphs and "
            "compare radical-pair reaction operators."
        ),
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument(
        "--log-file",
        default=None,
        dest="log_file",
        help="Optional path for a log file (written in addition to stderr).",
    )
    p.add_argument(
        "--verbose",
        action="store_true",
        help="Log at DEBUG level, including per-step probabilities.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser(
        "simulate",
        help="Propagate scenario configs and write CSV time series and reports.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sim.add_argument(
        "--config",
        action="append",
        required=True,
        dest="configs",
        metavar="FILE",
        help="Scenario config (JSON). Repeat to run several scenarios.",
    )
    sim.add_argument(
        "--output-dir",
        default="outputs",
        dest="output_dir",
        help="Each scenario writes into <output-dir>/<scenario name>/.",
    )
    sim.add_argument(
        "--jobs",
        type=int,
        default=1,
        help="Number of scenarios to run in parallel.",
    )
    sim.add_argument(
        "--progress",
        action="store_true",
        help="Show a progress bar over stepwise propagation.",
    )

    rates = sub.add_parser(
        "rates",
        help="Print the S-T dephasing rate predicted by every reaction operator.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    rates.add_argument("--ks", type=float, required=True, help="Singlet recombination rate kS (1/s).")
    rates.add_argument("--kt", type=float, required=True, help="Triplet recombination rate kT (1/s).")
    rates.add_argument("--q", type=float, default=0.0, help="Extra S-T dephasing rate q (1/s).")
    rates.add_argument(
        "--measured",
        type=float,
        default=None,
        help="Measured S-T dephasing rate (1/s); operators predicting more are flagged.",
    )
    rates.add_argument(
        "--output-json",
        default=None,
        dest="output_json",
        help="Also write the report as JSON to this path.",
    )

    val = sub.add_parser(
        "validate",
        help="Check scenario configs and list every schema violation.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    val.add_argument("--config", action="append", required=True, dest="configs", metavar="FILE",
                     help="Scenario config (JSON). Repeat to check several.")
    return p


def _validate_args(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    if args.command == "simulate" and args.jobs < 1:
        parser.error("--jobs must be >= 1")
    if args.command == "rates":
        for flag, value in (("--ks", args.ks), ("--kt", args.kt), ("--q", args.q)):
            if not math.isfinite(value) or value < 0:
                parser.error(f"{flag} must be a finite number >= 0")
        if args.measured is not None and (math.isnan(args.measured) or args.measured < 0):
            parser.error("--measured must be >= 0")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _load_all(paths: Sequence[str]) -> Tuple[List[ScenarioConfig], int]:
    """Load every config, reporting each failure; returns the configs and an exit code."""
    configs: List[ScenarioConfig] = []
    code = EXIT_OK
    for path in paths:
        try:
            configs.append(load_config(path))
        except KineticsError as exc:
            code = max(code, report_error(exc, source=path))
    names = [c.name for c in configs]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        exc = SchemaError([("name", f"scenario names must be unique, repeated: {', '.join(duplicates)}")])
        code = max(code, report_error(exc))
    return configs, code


def cmd_simulate(args: argparse.Namespace) -> int:
    configs, code = _load_all(args.configs)
    if code != EXIT_OK:
        return code

    output_dir = Path(args.output_dir)
    codes: List[int] = []
    if args.jobs == 1 or len(configs) == 1:
        for config in configs:
            try:
                run(config, output_dir, progress=args.progress)
                codes.append(EXIT_OK)
            except (KineticsError, OSError) as exc:
                codes.append(report_error(exc, source=config.name))
        return max(codes)

    logger.info("Dispatching %d scenario(s) across %d worker(s) ...", len(configs), args.jobs)
    with ThreadPoolExecutor(max_workers=args.jobs) as executor:
        futures = {executor.submit(run, config, output_dir): config for config in configs}
        for future in tqdm(as_completed(futures), total=len(futures), desc="Scenarios"):
            config = futures[future]
            try:
                future.result()
                codes.append(EXIT_OK)
            except (KineticsError, OSError) as exc:
                codes.append(report_error(exc, source=config.name))
    return max(codes)


def cmd_rates(args: argparse.Namespace) -> int:
    report = compare_catalogue(args.ks, args.kt, args.q, args.measured)
    sys.stdout.write(format_report(report))
    if args.output_json:
        try:
            path = write_json_atomic(report.to_dict(), Path(args.output_json))
        except OSError as exc:
            return report_error(exc, source=args.output_json)
        logger.info("Wrote %s", path)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    codes = []
    for path in args.configs:
        try:
            config = load_config(path)
        except KineticsError as exc:
            if isinstance(exc, SchemaError):
                for where, reason in exc.violations:
                    print(f"{path}: {where}: {reason}")
            else:
                print(f"{path}: {exc}")
            codes.append(report_error(exc, source=path))
            continue
        print(f"{path}: OK ({config.name}, {config.graph.n_sites} sites, {len(config.graph.edges)} edges)")
        codes.append(EXIT_OK)
    return max(codes)


_COMMANDS = {"simulate": cmd_simulate, "rates": cmd_rates, "validate": cmd_validate}


# ---------------------------------------------------------------------------
# Main
# ---------------------------------------------------------------------------

def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    _validate_args(args, parser)

    setup_logging(args.log_file, args.verbose)
    try:
        return _COMMANDS[args.command](args)
    except (KineticsError, OSError) as exc:
        return report_error(exc)
