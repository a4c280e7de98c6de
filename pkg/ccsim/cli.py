"""
ccsim command line

Subcommands:
    simulate        build, verify and measure one delivery schedule
    verify          re-check a schedule written by ``simulate --output``
    worst-rate      closed-form worst-case rate for a set of loads
    bounds          every rate and bound for one profile
    sweep           Monte-Carlo sweep to CSV
    dump-placement  list every cached packet

Exit codes: 0 success, 2 usage, 3 invalid input, 4 scheduler defect, 5 I/O.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import TextIO

import structlog  # type: ignore[import-untyped]
from pydantic import ValidationError

from . import __version__
from .config import configure_logging, get_settings
from .core.entities import RequestProfile, SystemParams
from .core.exceptions import (
    CCSimException,
    InvalidParametersException,
    InvalidProfileException,
    SchedulerDefectException,
)
from .models import (
    ScheduleDocument,
    SweepConfig,
    format_decimal,
    format_ratio,
    parse_profile,
    parse_schedule,
)
from .monitoring import get_metrics
from .services.analysis_service import (
    build_rate_report,
    worst_rate_breakdown,
    worst_rate_uniform,
)
from .services.delivery_service import DeliveryService, classify_packets
from .services.placement_service import place
from .services.sweep_service import render_csv, run_sweep, write_csv
from .services.verification_service import verify_all

logger = structlog.get_logger()

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID = 3
EXIT_DEFECT = 4
EXIT_IO = 5


class UsageError(Exception):
    """Arguments are individually valid but do not fit together"""


# ========== Argument Parsing ==========


def parse_requests(text: str) -> list[list[int]]:
    """``"1,2;2;1,2"`` -> [[1, 2], [2], [1, 2]]"""
    try:
        return [[int(n) for n in group.split(",")] for group in text.split(";")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"expected groups like '1,2;2;1,2', got {text!r}"
        ) from exc


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected integers like '6,12,18', got {text!r}") from exc


def _add_network_args(parser: argparse.ArgumentParser, with_requests: bool = True) -> None:
    parser.add_argument("--N", dest="n_files", type=int, help="number of files")
    parser.add_argument("--M", dest="n_groups", type=int, help="number of user-groups")
    parser.add_argument("--alpha", type=int, help="files coded per cached packet")
    if with_requests:
        parser.add_argument(
            "--requests", type=parse_requests, help="per-group requests, e.g. '1,2;2;1,2'"
        )
        parser.add_argument("--input", type=Path, help="profile document (JSON)")


def _add_format_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--format",
        choices=("human", "structured"),
        default="human",
        help="human-readable tables or JSON",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccsim", description="Coded caching delivery simulator for shared caches"
    )
    parser.add_argument("--version", action="version", version=f"ccsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="build, verify and measure one schedule")
    _add_network_args(simulate)
    simulate.add_argument("--output", type=Path, help="write the schedule document here")
    _add_format_arg(simulate)

    verify = sub.add_parser("verify", help="re-check a serialized schedule")
    verify.add_argument("--input", type=Path, required=True, help="schedule document (JSON)")
    _add_format_arg(verify)

    worst = sub.add_parser("worst-rate", help="closed-form worst-case rate")
    _add_network_args(worst, with_requests=False)
    loads = worst.add_mutually_exclusive_group(required=True)
    loads.add_argument("--uniform-L", dest="uniform_load", type=int, help="requests per group")
    loads.add_argument("--loads", type=parse_int_list, help="per-group request counts")
    _add_format_arg(worst)

    bounds = sub.add_parser("bounds", help="rates and bounds for one profile")
    _add_network_args(bounds)
    _add_format_arg(bounds)

    sweep = sub.add_parser("sweep", help="Monte-Carlo sweep to CSV")
    sweep.add_argument("--config", type=Path, help="sweep config document (JSON)")
    sweep.add_argument("--kind", choices=("load", "memory"), default="load")
    sweep.add_argument("--N", dest="n_files", type=int)
    sweep.add_argument("--M", dest="group_counts", type=parse_int_list, help="one or more M")
    sweep.add_argument("--alpha", dest="alphas", type=parse_int_list, help="alpha points")
    sweep.add_argument("--loads", type=parse_int_list, help="total request counts D")
    sweep.add_argument("--uniform-L", dest="uniform_loads", type=parse_int_list)
    sweep.add_argument("--samples", type=int)
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--output", type=Path, help="CSV path; stdout when unset")
    sweep.add_argument("--metrics-file", type=Path, help="Prometheus text file")

    dump = sub.add_parser("dump-placement", help="list every cached packet")
    _add_network_args(dump, with_requests=False)
    _add_format_arg(dump)

    return parser


def _network(args: argparse.Namespace) -> SystemParams:
    flags = (("--N", args.n_files), ("--M", args.n_groups), ("--alpha", args.alpha))
    missing = [flag for flag, value in flags if value is None]
    if missing:
        raise UsageError(f"missing {', '.join(missing)}")
    return SystemParams(n_files=args.n_files, n_groups=args.n_groups, alpha=args.alpha)


def _profile(args: argparse.Namespace) -> tuple[SystemParams, RequestProfile]:
    if args.input is not None:
        if args.requests is not None:
            raise UsageError("give either --input or --requests, not both")
        return parse_profile(args.input.read_text(encoding="utf-8"))
    if args.requests is None:
        raise UsageError("a profile needs --input or --requests")
    params = _network(args)
    profile = RequestProfile.of(params.n_files, args.requests)
    profile.validate_against(params)
    return params, profile


def _emit(out: TextIO, data: dict) -> None:
    out.write(json.dumps(data, indent=2) + "\n")


# ========== Subcommands ==========


def cmd_simulate(args: argparse.Namespace, out: TextIO) -> int:
    params, profile = _profile(args)
    placement = place(params)
    schedule, stats = DeliveryService().build_schedule(placement, profile)
    report = build_rate_report(stats, params, profile)
    verdict = verify_all(profile, placement, schedule)
    census = classify_packets(placement, profile).census()

    document = ScheduleDocument.build(
        params, profile, schedule, stats, report.achieved_rate, report.theorem_rate
    )
    if args.output is not None:
        args.output.write_text(
            document.model_dump_json(indent=2, by_alias=True), encoding="utf-8"
        )

    if args.format == "structured":
        _emit(
            out,
            {
                **document.model_dump(mode="json", by_alias=True),
                "census": census,
                "report": report.to_dict(),
                "verified": verdict.passed,
            },
        )
    else:
        out.write(f"N={params.n_files} M={params.n_groups} alpha={params.alpha} ")
        out.write(f"C={format_ratio(params.cache_size)}\n")
        for m, files in enumerate(profile.requests, start=1):
            out.write(f"  D_{m} = {{{','.join(map(str, files))}}}\n")
        out.write("\npacket classes\n")
        header = list(census[0]) if census else []
        out.write("  cache  " + "  ".join(f"{h:>8}" for h in header) + "\n")
        for m, counts in enumerate(census, start=1):
            out.write(f"  {m:>5}  " + "  ".join(f"{counts[h]:>8}" for h in header) + "\n")
        out.write("\ntransmissions\n")
        for transmission in schedule:
            out.write(f"  [{transmission.stage.value:>9}] {transmission}\n")
        out.write("\nstats\n")
        for key, value in stats.to_dict().items():
            out.write(f"  {key:<22} {value}\n")
        out.write("\n")
        for name, ratio, decimal in report.rows():
            out.write(f"  {name:<14} {ratio:>10}  {decimal}\n")
        out.write(f"\nverification: {'pass' if verdict.passed else 'FAIL'}\n")

    return EXIT_OK if verdict.passed else EXIT_DEFECT


def cmd_verify(args: argparse.Namespace, out: TextIO) -> int:
    document = parse_schedule(args.input.read_bytes())
    params, profile = document.profile.to_entities()
    placement = place(params)
    schedule = document.to_schedule()
    for transmission in schedule:
        for fragment in transmission.payload:
            if fragment not in placement.fragment_home:
                raise InvalidProfileException(f"{fragment} is not a fragment of this placement")

    verdict = verify_all(profile, placement, schedule)
    if args.format == "structured":
        _emit(out, verdict.to_dict())
    else:
        for group in verdict.groups:
            status = "pass" if group.passed else f"missing {len(group.missing)}"
            out.write(f"  group {group.group}: {group.checked} fragments checked, {status}\n")
            for fragment in group.missing:
                out.write(f"    {fragment}\n")
        out.write(f"verification: {'pass' if verdict.passed else 'FAIL'}\n")
    return EXIT_OK if verdict.passed else EXIT_DEFECT


def cmd_worst_rate(args: argparse.Namespace, out: TextIO) -> int:
    params = _network(args)
    if args.uniform_load is not None:
        rate = worst_rate_uniform(params, args.uniform_load)
        detail: dict = {"L": args.uniform_load}
    else:
        breakdown = worst_rate_breakdown(params, args.loads)
        rate = breakdown.rate
        detail = {"loads": list(breakdown.sorted_loads)}
        if breakdown.g is not None:
            detail.update(G=format_ratio(breakdown.g), I=breakdown.threshold)

    if args.format == "structured":
        _emit(out, {**params.to_dict(), **detail, "worst_rate": format_ratio(rate)})
    else:
        out.write(f"  {'worst_rate':<14} {format_ratio(rate):>10}  {format_decimal(rate)}\n")
    return EXIT_OK


def cmd_bounds(args: argparse.Namespace, out: TextIO) -> int:
    params, profile = _profile(args)
    _, stats = DeliveryService().build_schedule(place(params), profile)
    report = build_rate_report(stats, params, profile)
    if args.format == "structured":
        _emit(out, {**params.to_dict(), **report.to_dict()})
    else:
        for name, ratio, decimal in report.rows():
            out.write(f"  {name:<14} {ratio:>10}  {decimal}\n")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, out: TextIO) -> int:
    settings = get_settings()
    if args.config is not None:
        config = SweepConfig.model_validate_json(args.config.read_bytes())
    else:
        if args.n_files is None or args.group_counts is None:
            raise UsageError("sweep needs --config or --N and --M")
        config = SweepConfig(
            kind=args.kind,
            n_files=args.n_files,
            group_counts=args.group_counts,
            alphas=args.alphas,
            loads=args.loads,
            uniform_loads=args.uniform_loads,
            samples=args.samples if args.samples is not None else settings.default_samples,
            seed=args.seed if args.seed is not None else settings.default_seed,
            output=str(args.output) if args.output is not None else None,
        )

    rows = run_sweep(config, settings)
    if config.output:
        write_csv(rows, config.output)
    else:
        out.write(render_csv(rows))

    metrics_path = args.metrics_file or settings.metrics_path
    if metrics_path:
        get_metrics().write_textfile(metrics_path)
    return EXIT_OK


def cmd_dump_placement(args: argparse.Namespace, out: TextIO) -> int:
    placement = place(_network(args))
    if args.format == "structured":
        _emit(
            out,
            {
                **placement.params.to_dict(),
                "packets": [
                    [[list(p.combo), [f.to_triple() for f in p.fragments]] for p in packets]
                    for packets in placement.packets
                ],
            },
        )
    else:
        for line in placement.render():
            out.write(line + "\n")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "worst-rate": cmd_worst_rate,
    "bounds": cmd_bounds,
    "sweep": cmd_sweep,
    "dump-placement": cmd_dump_placement,
}


def main(argv: list[str] | None = None, out: TextIO | None = None) -> int:
    """Run one subcommand; returns the exit code"""
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    configure_logging()
    try:
        return COMMANDS[args.command](args, out)
    except (UsageError, InvalidParametersException) as exc:
        sys.stderr.write(f"ccsim {args.command}: usage error: {exc}\n")
        return EXIT_USAGE
    except SchedulerDefectException as exc:
        logger.error("scheduler_defect", command=args.command, error=str(exc))
        sys.stderr.write(f"ccsim {args.command}: defect: {exc}\n")
        return EXIT_DEFECT
    except (CCSimException, ValidationError) as exc:
        sys.stderr.write(f"ccsim {args.command}: invalid input: {exc}\n")
        return EXIT_INVALID
    except OSError as exc:
        sys.stderr.write(f"ccsim {args.command}: I/O error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
