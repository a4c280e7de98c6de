"""Sweep Service

Monte-Carlo sweeps of the delivery rate over the total request load or over
the cache size, written as CSV.

Per point, ``samples`` profiles are drawn, scheduled, verified and measured.
A row reports the mean and the maximum sampled rate, the worst-case formula,
the minimum sampled cut-set bound and, for alpha = 1 with uniform loads, the
uncoded reference rate. Samples run on up to ``CCSIM_THREADS`` workers and
are aggregated in sample-index order, so the output does not depend on the
worker count.

Profiles are keyed by (N, M, load, sample index) and not by alpha, so every
memory point of a sweep sees the same profiles.
"""

import csv
import io
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import structlog  # type: ignore[import-untyped]

from ..config import Settings, get_settings
from ..core.entities import PlacementState, RequestProfile, SystemParams
from ..core.exceptions import OutOfRegimeException
from ..infrastructure.sampling import sample_requests, sample_uniform_requests
from ..models import SweepConfig, format_decimal, format_ratio
from ..monitoring import get_metrics
from .analysis_service import (
    cutset_bound,
    rate_of_schedule,
    uncoded_reference_rate,
    worst_rate,
    worst_rate_uniform,
)
from .delivery_service import DeliveryService
from .placement_service import place

logger = structlog.get_logger()

CSV_COLUMNS = (
    "N",
    "M",
    "alpha",
    "C",
    "C_exact",
    "D",
    "L",
    "samples",
    "seed",
    "avg_rate",
    "avg_rate_exact",
    "max_rate",
    "max_rate_exact",
    "worst_formula",
    "worst_formula_exact",
    "cutset_min",
    "cutset_min_exact",
    "uncoded_ref",
    "uncoded_ref_exact",
)


@dataclass(frozen=True)
class SampleOutcome:
    """Measurements of one sampled profile"""

    rate: Fraction
    cutset: Fraction
    worst: Fraction | None
    fallback: bool
    dominance_violated: bool


@dataclass(frozen=True)
class SweepRow:
    """One aggregated sweep point"""

    n_files: int
    n_groups: int
    alpha: int
    cache_size: Fraction
    total_load: int
    uniform_load: int | None
    samples: int
    seed: int
    avg_rate: Fraction
    max_rate: Fraction
    worst_formula: Fraction | None
    cutset_min: Fraction
    uncoded_ref: Fraction | None
    fallbacks: int = 0
    dominance_violations: int = 0

    def to_csv_row(self) -> list[str]:
        def pair(value: Fraction | None) -> list[str]:
            if value is None:
                return ["-", "-"]
            return [format_decimal(value), format_ratio(value)]

        return [
            str(self.n_files),
            str(self.n_groups),
            str(self.alpha),
            *pair(self.cache_size),
            str(self.total_load),
            "-" if self.uniform_load is None else str(self.uniform_load),
            str(self.samples),
            str(self.seed),
            *pair(self.avg_rate),
            *pair(self.max_rate),
            *pair(self.worst_formula),
            *pair(self.cutset_min),
            *pair(self.uncoded_ref),
        ]


def _measure(
    service: DeliveryService,
    params: SystemParams,
    placement: PlacementState,
    profile: RequestProfile,
) -> SampleOutcome:
    _, stats = service.build_schedule(placement, profile)
    rate, _ = rate_of_schedule(stats, params, profile)
    try:
        worst: Fraction | None = worst_rate(params, profile.loads)
    except OutOfRegimeException:
        worst = None

    violated = (
        worst is not None and profile.n_requested == params.n_files and rate > worst
    )
    if violated:
        service.metrics.dominance_violations.inc()
        logger.warning(
            "worst_rate_exceeded",
            rate=format_ratio(rate),
            worst_rate=format_ratio(worst),
            requests=[list(r) for r in profile.requests],
            alpha=params.alpha,
        )

    return SampleOutcome(
        rate=rate,
        cutset=cutset_bound(profile, params.cache_size),
        worst=worst,
        fallback=stats.fallback_fired,
        dominance_violated=violated,
    )


def run_point(
    params: SystemParams,
    draw: Callable[[int], RequestProfile],
    samples: int,
    settings: Settings | None = None,
) -> list[SampleOutcome]:
    """
    Schedule and measure ``samples`` profiles on one network.

    Args:
        params: Network parameters
        draw: Sample index -> profile
        samples: Number of profiles
        settings: Supplies the worker cap

    Returns:
        Outcomes in sample-index order
    """
    settings = settings or get_settings()
    placement = place(params)
    service = DeliveryService(metrics=get_metrics())

    def work(index: int) -> SampleOutcome:
        return _measure(service, params, placement, draw(index))

    if settings.threads == 1:
        return [work(i) for i in range(samples)]
    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        return list(pool.map(work, range(samples)))


def _sweep_point(
    config: SweepConfig,
    params: SystemParams,
    load: int,
    uniform: bool,
    settings: Settings,
) -> SweepRow:
    n, m = params.n_files, params.n_groups
    if uniform:
        outcomes = run_point(
            params,
            lambda i: sample_uniform_requests(n, m, load, config.seed, i),
            config.samples,
            settings,
        )
        try:
            formula: Fraction | None = worst_rate_uniform(params, load)
        except OutOfRegimeException:
            formula = None
        uncoded = uncoded_reference_rate(n, m, load) if params.alpha == 1 else None
        total = load * m
    else:
        outcomes = run_point(
            params,
            lambda i: sample_requests(n, m, load, config.seed, i),
            config.samples,
            settings,
        )
        worsts = [o.worst for o in outcomes if o.worst is not None]
        formula = max(worsts) if worsts else None
        uncoded = None
        total = load

    rates = [o.rate for o in outcomes]
    row = SweepRow(
        n_files=n,
        n_groups=m,
        alpha=params.alpha,
        cache_size=params.cache_size,
        total_load=total,
        uniform_load=load if uniform else None,
        samples=config.samples,
        seed=config.seed,
        avg_rate=sum(rates, Fraction(0)) / len(rates),
        max_rate=max(rates),
        worst_formula=formula,
        cutset_min=min(o.cutset for o in outcomes),
        uncoded_ref=uncoded,
        fallbacks=sum(o.fallback for o in outcomes),
        dominance_violations=sum(o.dominance_violated for o in outcomes),
    )
    logger.info(
        "sweep_point_done",
        N=n,
        M=m,
        alpha=params.alpha,
        D=total,
        avg_rate=format_decimal(row.avg_rate),
        fallbacks=row.fallbacks,
    )
    return row


def _load_points(config: SweepConfig) -> tuple[list[int], bool]:
    if config.uniform_loads:
        return list(config.uniform_loads), True
    return list(config.loads or []), False


def sweep_rate_vs_load(config: SweepConfig, settings: Settings | None = None) -> list[SweepRow]:
    """
    Rate against the request load: for every M and alpha, one row per D (or L).

    Raises:
        InfeasibleLoadException: If a load point does not fit some M
    """
    settings = settings or get_settings()
    points, uniform = _load_points(config)
    rows = []
    for m in config.group_counts:
        for alpha in config.alpha_points:
            params = SystemParams(n_files=config.n_files, n_groups=m, alpha=alpha)
            for load in points:
                rows.append(_sweep_point(config, params, load, uniform, settings))
    _summarize("load", rows)
    return rows


def sweep_rate_vs_memory(config: SweepConfig, settings: Settings | None = None) -> list[SweepRow]:
    """
    Rate against the cache size: for every M and load, one row per alpha.

    Memory points are C = N/(M*alpha), alpha running N, N-1, ..., 1 unless
    the config lists its own.
    """
    settings = settings or get_settings()
    points, uniform = _load_points(config)
    rows = []
    for m in config.group_counts:
        for load in points:
            for alpha in config.alpha_points:
                params = SystemParams(n_files=config.n_files, n_groups=m, alpha=alpha)
                rows.append(_sweep_point(config, params, load, uniform, settings))
    _summarize("memory", rows)
    return rows


def run_sweep(config: SweepConfig, settings: Settings | None = None) -> list[SweepRow]:
    if config.kind == "memory":
        return sweep_rate_vs_memory(config, settings)
    return sweep_rate_vs_load(config, settings)


def _summarize(kind: str, rows: list[SweepRow]) -> None:
    violations = sum(r.dominance_violations for r in rows)
    log = logger.warning if violations else logger.info
    log(
        "sweep_finished",
        kind=kind,
        rows=len(rows),
        fallbacks=sum(r.fallbacks for r in rows),
        dominance_violations=violations,
    )


def render_csv(rows: list[SweepRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.to_csv_row())
    return buffer.getvalue()


def write_csv(rows: list[SweepRow], path: str | Path) -> None:
    Path(path).write_text(render_csv(rows), encoding="utf-8")
