"""Analysis Service

Closed-form delivery rates and bounds, all in exact rational arithmetic, and
the consistency check between a counted schedule and its closed form.

Rates are in file units; one fragment is 1/(M*binom(N-1, alpha-1)) of a file.
"""

from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import ceil

import structlog  # type: ignore[import-untyped]

from ..core.combinatorics import binom
from ..core.entities import DeliveryStats, RequestProfile, SystemParams
from ..core.exceptions import OutOfRegimeException, RateIdentityException
from ..models import format_decimal, format_ratio

logger = structlog.get_logger()


@dataclass(frozen=True)
class StageIdentity:
    """One counted quantity next to its closed form, in fragments"""

    name: str
    counted: int
    expected: int

    @property
    def holds(self) -> bool:
        return self.counted == self.expected


@dataclass(frozen=True)
class WorstRateBreakdown:
    """
    Ingredients of the worst-case rate for a multiset of request counts.

    ``threshold`` is the largest I with D_1 + ... + D_I <= N over the loads
    sorted in descending order; ``type2_ceilings[i]`` is binom(N - D_i, alpha-1)
    for the i-th sorted load, the most local fragments of one file a cache with
    that load can hold. ``g`` is None on the single-request path.
    """

    sorted_loads: tuple[int, ...]
    rate: Fraction
    g: Fraction | None = None
    threshold: int | None = None
    type2_ceilings: tuple[int, ...] = ()

    @property
    def single_request(self) -> bool:
        return self.g is None


@dataclass(frozen=True)
class RateReport:
    """Achieved rate of one schedule and the analytic values around it"""

    achieved_rate: Fraction
    theorem_rate: Fraction
    cutset: Fraction
    gap_bound: int
    worst_rate: Fraction | None = None
    uncoded_ref: Fraction | None = None

    def rows(self) -> list[tuple[str, str, str]]:
        """Labeled (name, p/q, decimal) rows; absent values are skipped"""
        values: list[tuple[str, Fraction | int | None]] = [
            ("R", self.achieved_rate),
            ("theorem_rate", self.theorem_rate),
            ("worst_rate", self.worst_rate),
            ("cutset", self.cutset),
            ("uncoded_ref", self.uncoded_ref),
            ("gap_bound", self.gap_bound),
        ]
        return [
            (name, format_ratio(value), format_decimal(value))
            for name, value in values
            if value is not None
        ]

    def to_dict(self) -> dict:
        return {name: ratio for name, ratio, _ in self.rows()}


# ========== Schedule Rates ==========


def _multi_local(load: int, unique: int, n_requested: int, alpha: int) -> int:
    """Packets of one cache holding n >= 2 local files, none requested by that group alone"""
    return sum(
        binom(load - unique, n) * binom(n_requested - load, alpha - n)
        for n in range(2, min(load, alpha) + 1)
    )


def _type3_packets(load: int, n_requested: int, alpha: int) -> int:
    return sum(
        binom(load, n) * binom(n_requested - load, alpha - n)
        for n in range(2, min(load, alpha) + 1)
    )


def theorem_rate(
    params: SystemParams, profile: RequestProfile, delta: int, last_stage_gain: int
) -> Fraction:
    """
    Closed-form rate of the scheduler for a profile.

    Args:
        params: Network parameters
        profile: Request profile
        delta: Measured Type-IV delivery gain
        last_stage_gain: Measured last-stage gain

    Returns:
        Rate in file units
    """
    alpha = params.alpha
    n_req = profile.n_requested
    loads = profile.loads
    den = params.rate_denominator

    type2_saving = sum(
        min(binom(n_req - loads[m - 1], alpha - 1) for m in profile.requesters[n])
        for n in profile.requested_files
    )
    unique_saving = sum(
        _multi_local(d, s, n_req, alpha) - _type3_packets(d, n_req, alpha)
        for d, s in zip(loads, profile.sigma, strict=True)
    )
    type3_pairing = min(
        _multi_local(d, s, n_req, alpha) for d, s in zip(loads, profile.sigma, strict=True)
    )

    return (
        Fraction(n_req)
        - Fraction(type2_saving, den)
        + Fraction(unique_saving, den)
        - Fraction(type3_pairing, den)
        - Fraction(delta + last_stage_gain, den)
    )


def stage_identities(
    stats: DeliveryStats, params: SystemParams, profile: RequestProfile
) -> list[StageIdentity]:
    """
    Compare each family of stage counters with its closed form.

    Returns:
        Identities for Type-I, Type-II (+remaining), Type-III (+remaining),
        Type-IV (+remaining) and the last stage
    """
    alpha = params.alpha
    n_files = params.n_files
    n_req = profile.n_requested
    loads = profile.loads
    caches = profile.n_groups

    type1 = caches * sum(
        j * binom(n_req, j) * binom(n_files - n_req, alpha - j) for j in range(1, alpha)
    )
    type2 = alpha * sum(d * binom(n_req - d, alpha - 1) for d in loads) - sum(
        min(binom(n_req - loads[m - 1], alpha - 1) for m in profile.requesters[n])
        for n in profile.requested_files
    )
    shared = [_multi_local(d, s, n_req, alpha) for d, s in zip(loads, profile.sigma, strict=True)]
    type3 = (
        (alpha - 1) * sum(_type3_packets(d, n_req, alpha) for d in loads)
        + sum(shared)
        - min(shared)
    )
    type4 = alpha * sum(binom(n_req - d, alpha) for d in loads) - stats.delta
    last = stats.t_ii_rm + stats.t_iii_rm + stats.t_iv_rm - stats.last_stage_gain

    return [
        StageIdentity("T_I", stats.t_i, type1),
        StageIdentity("T_II+T_II_RM", stats.t_ii + stats.t_ii_rm, type2),
        StageIdentity("T_III+T_III_RM", stats.t_iii + stats.t_iii_rm, type3),
        StageIdentity("T_IV+T_IV_RM", stats.t_iv + stats.t_iv_rm, type4),
        StageIdentity("T_RM", stats.t_rm, last),
    ]


def rate_of_schedule(
    stats: DeliveryStats, params: SystemParams, profile: RequestProfile
) -> tuple[Fraction, Fraction]:
    """
    Counted rate of a built schedule and its closed form.

    Returns:
        (R, theorem_rate)

    Raises:
        RateIdentityException: If the two differ while no fallback fired
    """
    achieved = Fraction(stats.total_transmissions, params.rate_denominator)
    closed = theorem_rate(params, profile, stats.delta, stats.last_stage_gain)

    if achieved != closed and not stats.fallback_fired:
        broken = [i for i in stage_identities(stats, params, profile) if not i.holds]
        detail = ", ".join(f"{i.name} counted {i.counted} expected {i.expected}" for i in broken)
        logger.error(
            "rate_identity_failed",
            achieved=format_ratio(achieved),
            closed_form=format_ratio(closed),
            requests=[list(r) for r in profile.requests],
        )
        raise RateIdentityException(
            f"counted rate {format_ratio(achieved)} != closed form {format_ratio(closed)}"
            + (f" ({detail})" if detail else "")
        )

    return achieved, closed


# ========== Worst-Case Rates ==========


def _single_request_rate(params: SystemParams) -> Fraction:
    n, m, alpha = params.n_files, params.n_groups, params.alpha
    if m < n:
        raise OutOfRegimeException(
            f"single-request worst rate needs M >= N; got M={m}, N={n}"
        )
    return n - Fraction(n * (n + 1), (alpha + 1) * m)


def worst_rate_breakdown(params: SystemParams, loads: Sequence[int]) -> WorstRateBreakdown:
    """
    Worst-case rate over profiles requesting every file with the given loads.

    Args:
        params: Network parameters
        loads: D_m per group, any order

    Raises:
        OutOfRegimeException: If the loads do not fit the network, sum below N
            (no profile requests every file), or sum to M with M < N
    """
    n, alpha = params.n_files, params.alpha
    ordered = tuple(sorted(loads, reverse=True))
    if len(ordered) != params.n_groups:
        raise OutOfRegimeException(f"expected {params.n_groups} loads, got {len(ordered)}")
    if any(not 1 <= d <= n for d in ordered):
        raise OutOfRegimeException(f"every load must lie in 1..{n}; got {list(loads)}")
    total = sum(ordered)
    if total < n:
        raise OutOfRegimeException(f"total load {total} cannot cover all {n} files")

    if total == params.n_groups:
        return WorstRateBreakdown(sorted_loads=ordered, rate=_single_request_rate(params))

    threshold = 0
    covered = 0
    while threshold < len(ordered) and covered + ordered[threshold] <= n:
        covered += ordered[threshold]
        threshold += 1

    ceilings = tuple(binom(n - d, alpha - 1) for d in ordered)
    type2 = sum(ceilings[i] * ordered[i] for i in range(threshold))
    if threshold < len(ordered):
        type2 += (n - covered) * ceilings[threshold]
    type3 = min(
        sum(binom(d, k) * binom(n - d, alpha - k) for k in range(2, min(d, alpha) + 1))
        for d in ordered
    )
    type4 = min(binom(n - d, alpha) for d in ordered)

    g = Fraction(type2 + type3 + type4, params.rate_denominator)
    rate = n - max(g, params.cache_size)
    return WorstRateBreakdown(
        sorted_loads=ordered, rate=rate, g=g, threshold=threshold, type2_ceilings=ceilings
    )


def worst_rate(params: SystemParams, loads: Sequence[int]) -> Fraction:
    """Worst-case rate for the given request counts"""
    return worst_rate_breakdown(params, loads).rate


def worst_rate_uniform(params: SystemParams, load: int) -> Fraction:
    """
    Worst-case rate when every group requests exactly ``load`` files.

    Raises:
        OutOfRegimeException: Unless load = 1 with M >= N, or 2 <= load <= N
            with load*M > N
    """
    n, m, alpha = params.n_files, params.n_groups, params.alpha
    if load == 1:
        return _single_request_rate(params)
    if not 2 <= load <= n or load * m <= n:
        raise OutOfRegimeException(
            f"uniform worst rate needs 2 <= L <= N and L*M > N; got L={load}, N={n}, M={m}"
        )
    return (
        n
        - Fraction((n - load) * binom(n - load, alpha - 1), params.rate_denominator)
        - params.cache_size
    )


# ========== Reference Rates and Bounds ==========


def uncoded_reference_rate(n_files: int, n_groups: int, load: int) -> Fraction:
    """Achievable rate of uncoded prefetching at C = N/M with uniform loads"""
    if load == 1 and n_files <= n_groups <= 2 * n_files:
        return Fraction(n_groups - 1, 2)
    return min(Fraction(load * (n_groups - 1), 2), n_files - Fraction(n_files, n_groups))


def uncoded_gap(n_files: int, n_groups: int, load: int) -> Fraction:
    """How far the uncoded reference rate sits above the alpha = 1 worst rate"""
    params = SystemParams(n_files=n_files, n_groups=n_groups, alpha=1)
    return uncoded_reference_rate(n_files, n_groups, load) - worst_rate_uniform(params, load)


def cutset_bound(profile: RequestProfile, cache_size: Fraction | int) -> Fraction:
    """
    Cut-set lower bound for one profile.

    Maximizes sum(D) - s*C / floor(N_R / sum(D)) over every set of s groups
    whose loads sum to at most N_R, for s up to min(ceil(N_R / min D), M).
    Not clamped at zero.
    """
    n_req = profile.n_requested
    loads = profile.loads
    size = Fraction(cache_size)
    largest_s = min(ceil(n_req / min(loads)), profile.n_groups)

    # D_m <= N_R, so every single group is admissible
    best = max(d - size / (n_req // d) for d in loads)
    for s in range(2, largest_s + 1):
        for chosen in combinations(loads, s):
            total = sum(chosen)
            if total <= n_req:
                best = max(best, total - s * size / (n_req // total))
    return best


def gap_bound(params: SystemParams, profile: RequestProfile) -> int:
    """Upper bound on worst rate minus cut-set bound: N - max D_m"""
    return params.n_files - max(profile.loads)


def build_rate_report(
    stats: DeliveryStats, params: SystemParams, profile: RequestProfile
) -> RateReport:
    """
    Collect every rate and bound for one simulated profile.

    The worst rate is included when the loads are in its regime; the uncoded
    reference only for alpha = 1 with equal loads.
    """
    achieved, closed = rate_of_schedule(stats, params, profile)
    try:
        worst: Fraction | None = worst_rate(params, profile.loads)
    except OutOfRegimeException:
        worst = None

    uncoded = None
    if params.alpha == 1 and len(set(profile.loads)) == 1:
        uncoded = uncoded_reference_rate(params.n_files, params.n_groups, profile.loads[0])

    return RateReport(
        achieved_rate=achieved,
        theorem_rate=closed,
        cutset=cutset_bound(profile, params.cache_size),
        gap_bound=gap_bound(params, profile),
        worst_rate=worst,
        uncoded_ref=uncoded,
    )
