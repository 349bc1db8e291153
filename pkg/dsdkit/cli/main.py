"""
Command-line interface
dsdkit <command> --input PATH [options]; exit 0 ok, 1 input error, 2 usage error, 3 numeric failure
"""
import argparse
import hashlib
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd
import structlog
from pydantic import ValidationError

from dsdkit.cli.writers import FORMATS, json_value, long_format, write_document, write_table
from dsdkit.config import Settings, get_settings
from dsdkit.core.enduses import END_USES, EndUse, get_end_use
from dsdkit.core.exceptions import DSDException, InputError, PreconditionError
from dsdkit.core.monitoring import configure_logging, measure_latency
from dsdkit.models.dataset import Dataset
from dsdkit.models.results import (
    DRIVERS,
    DecompositionResult,
    IntegrationSettings,
    RunManifest,
    SlackScheme,
)
from dsdkit.services.dataset import factor_table, interpolate_years, load_dataset, load_units
from dsdkit.services.decomposition import (
    aggregate_stages,
    chain_yearly,
    contribution_rates,
    decompose_interval,
    enduse_breakdown,
    enduse_rates,
    intensity_series,
    stage_breaks_for,
)
from dsdkit.services.engine import counterfactual_share_shift
from dsdkit.services.fixtures import FIXTURE_PREFIX, fixture_csv, is_fixture_reference
from dsdkit.services.metrics import NEGATIVE_DRIVER_SETS, SCALES, scale_series
from dsdkit.services.oracle import crosscheck

logger = structlog.get_logger(__name__)

# argparse exits with 2 on usage errors; bad DSD_* settings share it
USAGE_EXIT_CODE = 2

MANIFEST_KEYS = (
    "segments",
    "slack",
    "mode",
    "from_year",
    "to_year",
    "breaks",
    "scales",
    "negative_drivers",
    "year",
    "shift",
    "reference_segments",
)


@dataclass
class CommandOutput:
    """Tables produced by one command, plus an optional summary document"""
    tables: Dict[str, pd.DataFrame]
    summary: Optional[dict] = None


# Argument types

def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _year_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated years, got {text!r}")


def _name_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _shift(text: str) -> Tuple[EndUse, float]:
    label, sep, delta = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected USE=DELTA, got {text!r}")
    try:
        use = get_end_use(label)
    except KeyError as e:
        raise argparse.ArgumentTypeError(str(e.args[0]))
    try:
        value = float(delta)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse share delta {delta!r}")
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"share delta must be finite, got {delta!r}")
    return use, value


def build_parser(config: Optional[Settings] = None) -> argparse.ArgumentParser:
    """Argument parser with one subcommand per operation; defaults come from settings"""
    config = config or get_settings()

    parser = argparse.ArgumentParser(
        prog="dsdkit",
        description="Decompose residential carbon intensity (kgCO2/household) over 16 drivers",
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {config.toolkit_version}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    io_args = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    io_args.add_argument("--input", required=True, help=f"dataset CSV, or {FIXTURE_PREFIX}NAME")
    io_args.add_argument("--units", default=None, help="JSON unit declaration (base units when omitted)")
    io_args.add_argument("--format", dest="output_format", choices=FORMATS, default=config.output_format)
    io_args.add_argument("--out", default=None, help="output directory (stdout when omitted)")

    year_args = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    year_args.add_argument("--from", dest="from_year", type=int, default=None, help="first year")
    year_args.add_argument("--to", dest="to_year", type=int, default=None, help="last year")

    engine_args = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    engine_args.add_argument("--segments", type=_positive_int, default=config.segments)
    engine_args.add_argument("--slack", choices=[s.value for s in SlackScheme], default=config.slack)

    mode_args = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    mode_args.add_argument("--mode", choices=["chain", "endpoint"], default=config.mode)

    break_args = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    break_args.add_argument("--breaks", type=_year_list, default=None, help="stage boundaries Y1,Y2,...")

    metric_args = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    metric_args.add_argument("--negative-drivers", choices=sorted(NEGATIVE_DRIVER_SETS), default=None)

    def add(name: str, help_text: str, parents: list) -> argparse.ArgumentParser:
        return subparsers.add_parser(name, help=help_text, parents=parents, allow_abbrev=False)

    add("validate", "check a dataset and report per-year totals", [io_args])
    add("factors", "factor states per year", [io_args, year_args])
    add("decompose", "driver contributions over an interval", [io_args, year_args, engine_args, mode_args])
    add("chain", "yearly driver contributions", [io_args, year_args, engine_args])
    add("stages", "stage aggregates of the yearly chain", [io_args, year_args, engine_args, break_args])
    add("enduse", "per-end-use emission factor and structure effects", [io_args, year_args, engine_args, mode_args])

    report_parents = [io_args, year_args, engine_args, metric_args, break_args]
    metrics = add("metrics", "decarbonization totals, efficiency and scales", report_parents)
    metrics.add_argument("--scales", type=_name_list, default=None, help=f"subset of {','.join(SCALES)}")

    scenario = add("scenario", "pure share-shift counterfactual from one year", [io_args, engine_args])
    scenario.add_argument("--year", type=int, required=True)
    scenario.add_argument("--shift", type=_shift, action="append", required=True, help="USE=±DELTA (repeatable)")

    check = add("crosscheck", "engine vs fine-step reference vs LMDI", [io_args, year_args, engine_args])
    check.add_argument("--reference-segments", type=_positive_int, default=None)

    add("report", "full output bundle with plot-ready tables", report_parents)
    return parser


# Input

def _read_input(args: argparse.Namespace, config: Settings) -> Tuple[Dataset, bytes]:
    if is_fixture_reference(args.input):
        data = fixture_csv(args.input, enabled=config.seed_fixtures)
        country = args.input[len(FIXTURE_PREFIX):]
    else:
        try:
            data = Path(args.input).read_bytes()
        except OSError as e:
            raise InputError(f"{args.input}: cannot read input: {e.strerror}")
        country = None
    units = load_units(args.units, country)
    return load_dataset(data, units, country=country, source_name=args.input), data


def _interval(args: argparse.Namespace, ds: Dataset) -> Tuple[int, int]:
    from_year = args.from_year if args.from_year is not None else ds.years[0]
    to_year = args.to_year if args.to_year is not None else ds.years[-1]
    return from_year, to_year


def _integration(args: argparse.Namespace, config: Settings) -> IntegrationSettings:
    return IntegrationSettings(
        segments=args.segments,
        slack=SlackScheme(args.slack),
        chunk_segments=config.chunk_segments,
    )


def _filled(ds: Dataset) -> Dataset:
    return interpolate_years(ds) if len(ds.records) > 1 else ds


def _manifest(args: argparse.Namespace, data: bytes, config: Settings) -> RunManifest:
    recorded = {}
    for key in MANIFEST_KEYS:
        value = getattr(args, key, None)
        if value is None:
            continue
        if key == "shift":
            value = [f"{use.value}={delta!r}" for use, delta in value]
        recorded[key] = value
    return RunManifest(
        command=args.command,
        input_path=args.input,
        settings=recorded,
        toolkit_version=config.toolkit_version,
        input_digest=hashlib.sha256(data).hexdigest(),
    )


# Tables

def _driver_table(result: DecompositionResult) -> pd.DataFrame:
    rates = contribution_rates(result)
    rows = []
    for driver, value in zip(DRIVERS, result.contributions):
        rows.append({"driver": driver.label, "contribution": value, "rate_percent": rates.rate(driver)})
    rows.append({
        "driver": "delta_c",
        "contribution": result.delta_c,
        "rate_percent": None if rates.absolute_only else 100.0,
    })
    return pd.DataFrame(rows, columns=["driver", "contribution", "rate_percent"])


def _wide_table(results: Sequence[DecompositionResult]) -> pd.DataFrame:
    rows = []
    for result in results:
        row = {"from_year": result.interval[0], "to_year": result.interval[1], "delta_c": result.delta_c}
        row.update(result.as_dict())
        row["euler_residual"] = result.euler_residual
        rows.append(row)
    return pd.DataFrame(rows)


def _period(result: DecompositionResult) -> str:
    return f"{result.interval[0]}-{result.interval[1]}"


def _enduse_table(results: Sequence[DecompositionResult], labels: Sequence[str]) -> pd.DataFrame:
    rows = []
    for label, result in zip(labels, results):
        breakdown = enduse_breakdown(result)
        rates = enduse_rates(breakdown, result.delta_c)
        for use in END_USES:
            i = use.position
            rows.append({
                "period": label,
                "end_use": use.value,
                "active": use in result.active_uses,
                "dk": breakdown.dk[i],
                "dw": breakdown.dw[i],
                "dk_rate_percent": rates["dk"][i] if rates else None,
                "dw_rate_percent": rates["dw"][i] if rates else None,
            })
    return pd.DataFrame(rows)


def _rates_table(results: Sequence[DecompositionResult], labels: Sequence[str]) -> pd.DataFrame:
    frame = pd.DataFrame({"driver": [driver.label for driver in DRIVERS]})
    for label, result in zip(labels, results):
        rates = contribution_rates(result)
        frame[label] = [rates.rate(driver) for driver in DRIVERS]
    return frame


def _scales_table(series, scales: Optional[Sequence[str]] = None) -> pd.DataFrame:
    keep = {"decarbonization_mt", "emissions_mt", "efficiency", "cumulative_mt", *(scales or SCALES)}
    columns = {name: values for name, values in series.columns().items() if name in keep}
    return pd.DataFrame({"year": list(series.years), **{k: list(v) for k, v in columns.items()}})


def _summary_table(series) -> pd.DataFrame:
    rows = []
    for name, summary in series.summaries.items():
        row = {"series": name, "mean": summary.mean, "annual_growth": summary.annual_growth}
        row.update({f"share_{stage}": share for stage, share in summary.stage_shares.items()})
        rows.append(row)
    return pd.DataFrame(rows)


# Commands

def _cmd_validate(args: argparse.Namespace, ds: Dataset, config: Settings) -> CommandOutput:
    filled = _filled(ds)
    observed = set(ds.years)
    rows = []
    for year in filled.years:
        record = filled.record(year)
        state = filled.factor_state(year)
        rows.append({
            "year": year,
            "interpolated": year not in observed,
            "households": record.households,
            "energy_pj": record.total_energy,
            "emissions_kt": record.total_emissions,
            "c": state.c,
            "active_uses": len(filled.active_uses),
        })
    return CommandOutput(tables={"validate": pd.DataFrame(rows)})


def _cmd_factors(args: argparse.Namespace, ds: Dataset, config: Settings) -> CommandOutput:
    frame = factor_table(_filled(ds))
    if args.from_year is not None:
        frame = frame[frame["year"] >= args.from_year]
    if args.to_year is not None:
        frame = frame[frame["year"] <= args.to_year]
    return CommandOutput(tables={"factors": frame.reset_index(drop=True)})


def _cmd_decompose(args: argparse.Namespace, ds: Dataset, config: Settings) -> CommandOutput:
    from_year, to_year = _interval(args, ds)
    result = decompose_interval(
        ds, from_year, to_year, _integration(args, config), mode=args.mode, workers=config.chain_workers
    )
    return CommandOutput(tables={"decompose": _driver_table(result)})


def _cmd_chain(args: argparse.Namespace, ds: Dataset, config: Settings) -> CommandOutput:
    from_year, to_year = _interval(args, ds)
    chain = chain_yearly(ds, from_year, to_year, _integration(args, config), config.chain_workers)
    return CommandOutput(tables={"chain": _wide_table(chain)})


def _cmd_stages(args: argparse.Namespace, ds: Dataset, config: Settings) -> CommandOutput:
    from_year, to_year = _interval(args, ds)
    breaks = args.breaks or stage_breaks_for(from_year, to_year, config.stage_breaks)
    chain = chain_yearly(ds, breaks[0], breaks[-1], _integration(args, config), config.chain_workers)
    return CommandOutput(tables={"stages": _wide_table(aggregate_stages(chain, breaks))})


def _cmd_enduse(args: argparse.Namespace, ds: Dataset, config: Settings) -> CommandOutput:
    from_year, to_year = _interval(args, ds)
    result = decompose_interval(
        ds, from_year, to_year, _integration(args, config), mode=args.mode, workers=config.chain_workers
    )
    return CommandOutput(tables={"enduse": _enduse_table([result], [_period(result)])})


def _cmd_metrics(args: argparse.Namespace, ds: Dataset, config: Settings) -> CommandOutput:
    from_year, to_year = _interval(args, ds)
    breaks = args.breaks or stage_breaks_for(from_year, to_year, config.stage_breaks)
    negative = args.negative_drivers or config.negative_drivers
    chain = chain_yearly(ds, from_year, to_year, _integration(args, config), config.chain_workers)
    series = scale_series(chain, ds, args.scales, negative, breaks)
    return CommandOutput(tables={"metrics": _scales_table(series, args.scales)})


def _cmd_scenario(args: argparse.Namespace, ds: Dataset, config: Settings) -> CommandOutput:
    filled = _filled(ds)
    if args.year not in filled.years:
        raise PreconditionError(f"year {args.year} not in dataset coverage {filled.years[0]}-{filled.years[-1]}")
    shifts: Dict[EndUse, float] = {}
    for use, delta in args.shift:
        shifts[use] = shifts.get(use, 0.0) + delta
    result = counterfactual_share_shift(filled.factor_state(args.year), shifts, _integration(args, config))

    rates = contribution_rates(result)
    rows = [
        {"item": driver.label, "value": value, "rate_percent": rates.rate(driver)}
        for driver, value in zip(DRIVERS, result.contributions)
    ]
    rows.append({"item": "delta_c", "value": result.delta_c, "rate_percent": None if rates.absolute_only else 100.0})
    rows.append({"item": "start_c", "value": result.start_c, "rate_percent": None})
    rows.append({"item": "end_c", "value": result.end_c, "rate_percent": None})
    rows.append({"item": "slack_total", "value": result.slack_total, "rate_percent": None})
    for use, share in zip(END_USES, result.final_shares):
        rows.append({"item": f"final_share:{use.value}", "value": share, "rate_percent": None})
    return CommandOutput(tables={"scenario": pd.DataFrame(rows, columns=["item", "value", "rate_percent"])})


def _cmd_crosscheck(args: argparse.Namespace, ds: Dataset, config: Settings) -> CommandOutput:
    from_year, to_year = _interval(args, ds)
    if from_year >= to_year:
        raise PreconditionError(f"--from ({from_year}) must precede --to ({to_year})")
    filled = _filled(ds)
    settings = _integration(args, config)
    reference = args.reference_segments or config.reference_multiplier * settings.segments
    table = crosscheck(filled.factor_state(from_year), filled.factor_state(to_year), settings, reference)
    return CommandOutput(tables={"crosscheck": table})


@measure_latency
def _cmd_report(args: argparse.Namespace, ds: Dataset, config: Settings) -> CommandOutput:
    from_year, to_year = _interval(args, ds)
    settings = _integration(args, config)
    breaks = args.breaks or stage_breaks_for(from_year, to_year, config.stage_breaks)
    negative = args.negative_drivers or config.negative_drivers

    chain = chain_yearly(ds, from_year, to_year, settings, config.chain_workers)
    stages = aggregate_stages(chain, breaks)
    total = DecompositionResult.combine(chain, (from_year, to_year))
    periods = [*stages, total]
    labels = [_period(stage) for stage in stages] + ["total"]

    series = scale_series(chain, ds, None, negative, breaks)
    intensity, cagr = intensity_series(ds, from_year, to_year)

    chain_table = _wide_table(chain)
    enduse_table = _enduse_table(periods, labels)
    scales_table = _scales_table(series)
    driver_columns = [driver.label for driver in DRIVERS]

    enduse_plot = enduse_table.melt(
        id_vars=["period", "end_use"], value_vars=["dk", "dw"], var_name="effect", value_name="value"
    )
    enduse_plot = pd.DataFrame({
        "period": enduse_plot["period"],
        "series": enduse_plot["effect"] + ":" + enduse_plot["end_use"],
        "value": enduse_plot["value"],
    })

    tables = {
        "chain": chain_table,
        "stages": _wide_table(stages),
        "rates": _rates_table(periods, labels),
        "enduse": enduse_table,
        "scales": scales_table,
        "scales_summary": _summary_table(series),
        "intensity": intensity,
        "plot_intensity": long_format(intensity, "year", ["intensity"]),
        "plot_drivers": long_format(chain_table.rename(columns={"to_year": "year"}), "year", driver_columns),
        "plot_enduse": enduse_plot,
        "plot_decarbonization": long_format(
            scales_table, "year", ["decarbonization_mt", "efficiency", "cumulative_mt"]
        ),
        "plot_scales": long_format(
            scales_table, "year", [name for name in SCALES if name in scales_table.columns]
        ),
    }
    digits = config.significant_digits
    summary = {
        "interval": [from_year, to_year],
        "delta_c": json_value(total.delta_c, digits),
        "intensity_start": json_value(total.start_c, digits),
        "intensity_end": json_value(total.end_c, digits),
        "intensity_annual_growth": json_value(cagr, digits),
        "cumulative_decarbonization_mt": json_value(series.total_mt, digits),
        "overall_efficiency": json_value(series.overall_efficiency, digits),
        "decarbonization_stage_shares": {k: json_value(v, digits) for k, v in series.stage_shares.items()},
        "negative_drivers": series.negative_drivers,
        "definition": series.definition,
        "breaks": list(breaks),
    }
    return CommandOutput(tables=tables, summary=summary)


COMMANDS: Dict[str, Callable[[argparse.Namespace, Dataset, Settings], CommandOutput]] = {
    "validate": _cmd_validate,
    "factors": _cmd_factors,
    "decompose": _cmd_decompose,
    "chain": _cmd_chain,
    "stages": _cmd_stages,
    "enduse": _cmd_enduse,
    "metrics": _cmd_metrics,
    "scenario": _cmd_scenario,
    "crosscheck": _cmd_crosscheck,
    "report": _cmd_report,
}


def _run(args: argparse.Namespace, config: Settings) -> List[Path]:
    ds, data = _read_input(args, config)
    manifest = _manifest(args, data, config)
    output = COMMANDS[args.command](args, ds, config)

    written = []
    for name, frame in output.tables.items():
        path = write_table(
            frame, name, manifest, args.output_format, args.out, config.significant_digits
        )
        if path is not None:
            written.append(path)
    if output.summary is not None and args.out is not None:
        document = {
            "manifest": manifest.model_dump(mode="json"),
            "summary": output.summary,
            "files": sorted(path.name for path in written),
        }
        written.append(write_document(document, Path(args.out) / "manifest.json"))
    return written


def execute(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one CLI command

    Args:
        argv: Arguments without the program name (sys.argv[1:] when omitted)

    Returns:
        Exit code: 0 ok, 1 input error, 2 usage error, 3 numeric failure
    """
    try:
        config = get_settings()
    except ValidationError as e:
        fields = ", ".join(".".join(str(part) for part in error["loc"]) for error in e.errors())
        sys.stderr.write(f"❌ error: invalid DSD_* settings ({fields}): {e}\n")
        return USAGE_EXIT_CODE
    configure_logging(config.log_level, config.log_json)
    parser = build_parser(config)
    try:
        args = parser.parse_args(argv)
        if args.command == "report" and args.out is None:
            parser.error("report requires --out DIR")
    except SystemExit as e:
        return 0 if e.code is None else int(e.code)

    try:
        written = _run(args, config)
    except DSDException as e:
        logger.error("command_failed", command=args.command, exit_code=e.exit_code, detail=e.detail)
        sys.stderr.write(f"❌ error: {e.detail}\n")
        return e.exit_code
    except OSError as e:
        sys.stderr.write(f"❌ error: cannot write output: {e}\n")
        return InputError.exit_code

    for path in written:
        sys.stdout.write(f"{path}\n")
    logger.info("command_completed", command=args.command, files=len(written))
    return 0


def main() -> None:
    sys.exit(execute(sys.argv[1:]))
