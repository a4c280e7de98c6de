"""Delivery Service

Builds the broadcast schedule for one request profile over a coded placement.

Every cached packet is classified by how its combo meets the requested files
and the caching group's own requests, then delivered type by type:

    Type-I    combo holds requested and unrequested files: send the requested
              fragments directly.
    Type-II   one local fragment: send the other alpha-1, then pair local
              fragments of the same file across its requesting caches.
    Type-III  several local fragments: keep the least-requested one, send the
              rest, then pair multi-requested keeps across all caches.
    Type-IV   no local fragment: (alpha+1)-request sets (gain alpha each),
              packet-groups (gain 1 each), then alpha-1 fragments of every
              leftover packet.
    Last      pair the leftovers of every cache against the cache holding the
              fewest of them; send the rest directly.

All ties break toward the smallest cache index, then the smallest file index,
then canonical combo order, so a schedule is a pure function of its inputs.
"""

import time
from collections import defaultdict
from dataclasses import dataclass, field
from enum import StrEnum
from itertools import combinations, pairwise, product

import structlog  # type: ignore[import-untyped]

from ..core.combinatorics import restricted_subsets
from ..core.entities import (
    DeliveryStats,
    FragmentId,
    PacketId,
    PlacementState,
    RequestProfile,
    Stage,
    Transmission,
    TransmissionSchedule,
)
from ..core.exceptions import SchedulerDefectException
from ..monitoring import MetricsCollector, get_metrics
from .verification_service import verify_all

logger = structlog.get_logger()


class PacketType(StrEnum):
    """Delivery class of a cached packet"""

    TYPE_I = "TypeI"
    TYPE_II = "TypeII"
    TYPE_III = "TypeIII"
    TYPE_IV = "TypeIV"
    INACTIVE = "Inactive"  # no requested fragment at all


@dataclass(frozen=True)
class PacketClass:
    """
    Per-cache partition of every cached packet into the five delivery classes.

    ``local_files`` holds, for Type-II and Type-III packets, the files of the
    combo requested by the caching group itself.
    """

    placement: PlacementState
    profile: RequestProfile
    types: dict[PacketId, PacketType]
    local_files: dict[PacketId, tuple[int, ...]]
    by_cache: tuple[dict[PacketType, tuple[PacketId, ...]], ...]

    @property
    def caches(self) -> range:
        return range(1, self.profile.n_groups + 1)

    def of_type(self, cache: int, ptype: PacketType) -> tuple[PacketId, ...]:
        return self.by_cache[cache - 1][ptype]

    def census(self) -> list[dict[str, int]]:
        """Per cache, how many packets fall in each class"""
        return [
            {ptype.value: len(buckets[ptype]) for ptype in PacketType} for buckets in self.by_cache
        ]


@dataclass(frozen=True)
class RequestSet:
    """
    An (alpha+1)-request set.

    No group requests two of ``files``; ``groups`` are all requesters of any of
    them and ``packets[i]`` is the packet of ``groups[i]`` whose combo is
    ``files`` minus that group's single request among them.
    """

    files: tuple[int, ...]
    groups: tuple[int, ...]
    packets: tuple[PacketId, ...]

    @classmethod
    def build(cls, files: tuple[int, ...], profile: RequestProfile) -> "RequestSet":
        groups = sorted(set().union(*(profile.requesters[n] for n in files)))
        packets = []
        for m in groups:
            wanted = profile.request_set_of(m)
            packets.append(PacketId(combo=tuple(n for n in files if n not in wanted), cache=m))
        return cls(files=files, groups=tuple(groups), packets=tuple(packets))

    def packet_of(self, group: int) -> PacketId:
        return self.packets[self.groups.index(group)]

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.files)) + "}"


@dataclass(frozen=True)
class PacketGroup:
    """One Type-IV packet from each of at least two caches, delivered jointly"""

    caches: tuple[int, ...]
    members: tuple[PacketId, ...]
    kept: tuple[FragmentId, ...]  # per member, the fragment chained instead of sent


@dataclass
class StageResult:
    """Transmissions of one delivery step plus what it hands to the last stage"""

    transmissions: list[Transmission] = field(default_factory=list)
    remaining: list[FragmentId] = field(default_factory=list)
    gain: int = 0
    delivered_packets: int = 0

    def emit(self, stage: Stage, *fragments: FragmentId) -> None:
        self.transmissions.append(Transmission.of(stage, *fragments))

    def count(self, stage: Stage) -> int:
        return sum(1 for t in self.transmissions if t.stage is stage)


@dataclass
class TypeTwoResult(StageResult):
    reference_caches: dict[int, int] = field(default_factory=dict)  # file -> reference cache


@dataclass
class TypeThreeResult(StageResult):
    untransmitted_local: tuple[int, ...] = ()
    reference_cache: int | None = None
    kept: list[FragmentId] = field(default_factory=list)


@dataclass
class LastStageResult(StageResult):
    remaining_counts: tuple[int, ...] = ()
    reference_cache: int | None = None


# ========== Classification ==========


def classify_packets(placement: PlacementState, profile: RequestProfile) -> PacketClass:
    """
    Partition every cached packet of every cache.

    Args:
        placement: Coded placement
        profile: Request profile over the same network

    Returns:
        PacketClass covering all M*binom(N, alpha) packets exactly once
    """
    profile.validate_against(placement.params)
    requested = profile.requested_set
    table = placement.table
    active = {table.combos[i] for i in restricted_subsets(table, requested)}
    types: dict[PacketId, PacketType] = {}
    local_files: dict[PacketId, tuple[int, ...]] = {}
    by_cache = []

    for cache, packets in enumerate(placement.packets, start=1):
        wanted = profile.request_set_of(cache)
        buckets: dict[PacketType, list[PacketId]] = {ptype: [] for ptype in PacketType}
        for packet in packets:
            if packet.combo not in active:
                touched = any(n in requested for n in packet.combo)
                ptype = PacketType.TYPE_I if touched else PacketType.INACTIVE
            else:
                own = tuple(n for n in packet.combo if n in wanted)
                if not own:
                    ptype = PacketType.TYPE_IV
                elif len(own) == 1:
                    ptype = PacketType.TYPE_II
                else:
                    ptype = PacketType.TYPE_III
                if own:
                    local_files[packet] = own
            types[packet] = ptype
            buckets[ptype].append(packet)
        by_cache.append({ptype: tuple(v) for ptype, v in buckets.items()})

    return PacketClass(
        placement=placement,
        profile=profile,
        types=types,
        local_files=local_files,
        by_cache=tuple(by_cache),
    )


# ========== Type-I ==========


def deliver_type1(pclass: PacketClass) -> StageResult:
    """Send every requested fragment of every Type-I packet directly."""
    result = StageResult()
    requested = pclass.profile.requested_set
    for cache in pclass.caches:
        for packet in pclass.of_type(cache, PacketType.TYPE_I):
            for fragment in packet.fragments:
                if fragment.file in requested:
                    result.emit(Stage.TYPE_I, fragment)
    return result


# ========== Type-II ==========


def deliver_type2(pclass: PacketClass) -> TypeTwoResult:
    """
    Deliver Type-II packets.

    Step 1 sends the alpha-1 non-local fragments of each packet. Step 2 takes,
    for each requested file, the requesting cache holding the fewest local
    fragments of it as reference and XORs each reference fragment with the next
    unused local fragment of the file from every other requesting cache.
    Unpaired local fragments go to the last stage.
    """
    profile = pclass.profile
    result = TypeTwoResult()
    holders: dict[int, dict[int, list[FragmentId]]] = defaultdict(dict)

    for cache in pclass.caches:
        for packet in pclass.of_type(cache, PacketType.TYPE_II):
            (own,) = pclass.local_files[packet]
            for fragment in packet.fragments:
                if fragment.file != own:
                    result.emit(Stage.TYPE_II_1, fragment)
            holders[own].setdefault(cache, []).append(packet.fragment(own))

    for file in profile.requested_files:
        groups = profile.requesters[file]
        if len(groups) < 2 or file not in holders:
            continue
        local = holders[file]
        reference = min(groups, key=lambda m: (len(local.get(m, ())), m))
        result.reference_caches[file] = reference
        anchors = local.get(reference, [])
        partners = {k: local.get(k, []) for k in groups if k != reference}
        for i, anchor in enumerate(anchors):
            for k in partners:
                result.emit(Stage.TYPE_II_2, anchor, partners[k][i])
        for k, fragments in partners.items():
            result.remaining.extend(fragments[len(anchors) :])

    return result


# ========== Type-III ==========


def deliver_type3(pclass: PacketClass) -> TypeThreeResult:
    """
    Deliver Type-III packets.

    Step 1 keeps, per packet, the local fragment requested by the fewest groups
    and sends the other alpha-1. Kept fragments requested only by the caching
    group are done. Step 2 XORs each multi-requested keep of the cache with the
    fewest of them against one unused multi-requested keep of every other cache.
    """
    profile = pclass.profile
    result = TypeThreeResult()
    shared: dict[int, list[FragmentId]] = {m: [] for m in pclass.caches}

    for cache in pclass.caches:
        for packet in pclass.of_type(cache, PacketType.TYPE_III):
            keep = min(pclass.local_files[packet], key=lambda n: (profile.demand(n), n))
            for fragment in packet.fragments:
                if fragment.file != keep:
                    result.emit(Stage.TYPE_III_1, fragment)
            kept = packet.fragment(keep)
            result.kept.append(kept)
            if profile.demand(keep) >= 2:
                shared[cache].append(kept)

    result.untransmitted_local = tuple(len(shared[m]) for m in pclass.caches)
    if not any(result.untransmitted_local):
        return result

    reference = min(pclass.caches, key=lambda m: (len(shared[m]), m))
    result.reference_cache = reference
    floor = len(shared[reference])
    others = [m for m in pclass.caches if m != reference]
    for i in range(floor):
        for k in others:
            result.emit(Stage.TYPE_III_2, shared[reference][i], shared[k][i])
    for k in others:
        result.remaining.extend(shared[k][floor:])

    return result


# ========== Type-IV ==========


def _requesters_disjoint(files: tuple[int, ...], profile: RequestProfile) -> bool:
    seen: set[int] = set()
    for n in files:
        groups = profile.requesters[n]
        if seen.intersection(groups):
            return False
        seen.update(groups)
    return True


def _compatible(
    candidate: tuple[int, ...], prior: tuple[int, ...], profile: RequestProfile
) -> bool:
    """Two request sets may coexist unless they would claim the same packet."""
    alpha = len(candidate) - 1
    common = set(candidate) & set(prior)
    if len(common) < alpha:
        return True
    if len(common) > alpha:
        return False
    spread = set(candidate) ^ set(prior)
    return not any(spread <= wanted for wanted in profile.request_sets)


def search_request_sets(pclass: PacketClass) -> list[RequestSet]:
    """
    Greedy search for (alpha+1)-request sets.

    Loop order: reference group m0 ascending from 1 to M-alpha, then the
    alpha-subsets of the groups after m0 in lexicographic order, then one
    request per chosen group in lexicographic product order. A candidate is
    accepted when no two of its files share a requester and it cannot claim a
    packet already claimed by an earlier set.

    Returns:
        Accepted sets in acceptance order (empty for alpha = 1)
    """
    profile = pclass.profile
    alpha = pclass.placement.params.alpha
    n_groups = profile.n_groups
    if alpha < 2:
        return []

    available = {p for m in pclass.caches for p in pclass.of_type(m, PacketType.TYPE_IV)}
    claimed: set[PacketId] = set()
    accepted: list[RequestSet] = []

    for m0 in range(1, n_groups - alpha + 1):
        for others in combinations(range(m0 + 1, n_groups + 1), alpha):
            chosen = (m0, *others)
            for choice in product(*(profile.requests_of(m) for m in chosen)):
                if not _requesters_disjoint(choice, profile):
                    continue
                files = tuple(sorted(choice))
                if not all(_compatible(files, prior.files, profile) for prior in accepted):
                    continue
                candidate = RequestSet.build(files, profile)
                if any(p not in available or p in claimed for p in candidate.packets):
                    continue
                accepted.append(candidate)
                claimed.update(candidate.packets)
                logger.debug("request_set_accepted", files=files, groups=candidate.groups)

    return accepted


def deliver_type4_step1(sets: list[RequestSet], pclass: PacketClass) -> StageResult:
    """
    Deliver the packets of each (alpha+1)-request set.

    For the files r_0 < ... < r_alpha of a set, c_i is the smallest cache whose
    request in the set is r_i; the selected fragment of r_i is taken from the
    packet of c_{i+1 mod alpha+1}, which always contains r_i. Every other
    fragment of the set's packets is XORed with the selected fragment of its
    file, and the alpha+1 selected fragments go out as one payload.

    Raises:
        SchedulerDefectException: If two sets claim the same packet
    """
    profile = pclass.profile
    result = StageResult()
    claimed: set[PacketId] = set()

    for rset in sets:
        if claimed.intersection(rset.packets):
            raise SchedulerDefectException(f"request set {rset} reuses a delivered packet")
        claimed.update(rset.packets)

        width = len(rset.files)
        providers = [profile.requesters[n][0] for n in rset.files]
        selected = {
            n: rset.packet_of(providers[(i + 1) % width]).fragment(n)
            for i, n in enumerate(rset.files)
        }
        for packet in rset.packets:
            for fragment in packet.fragments:
                anchor = selected[fragment.file]
                if fragment != anchor:
                    result.emit(Stage.TYPE_IV_1, fragment, anchor)
        result.emit(Stage.TYPE_IV_1, *selected.values())

        result.gain += width - 1
        result.delivered_packets += len(rset.packets)

    return result


def search_packet_groups(
    pclass: PacketClass, exclude: set[PacketId] | frozenset[PacketId] = frozenset()
) -> list[PacketGroup]:
    """
    Greedy search for packet-groups among the Type-IV packets not in exclude.

    Group sizes run from 2 to M; for each size the reference cache m0 ascends
    and the remaining caches are taken in lexicographic order. Within a cache
    set, each cache contributes its next unused packet whose combo is not
    covered by the requests of the caches outside the set; groups are formed
    until some cache runs out. The kept fragment of a member is its smallest
    file that no outside group requests.
    """
    profile = pclass.profile
    n_groups = profile.n_groups
    pool = {
        m: [p for p in pclass.of_type(m, PacketType.TYPE_IV) if p not in exclude]
        for m in pclass.caches
    }
    groups: list[PacketGroup] = []

    for size in range(2, n_groups + 1):
        for m0 in range(1, n_groups - size + 2):
            for rest in combinations(range(m0 + 1, n_groups + 1), size - 1):
                caches = (m0, *rest)
                if not all(pool[m] for m in caches):
                    continue
                outside = frozenset().union(
                    *(profile.request_set_of(k) for k in pclass.caches if k not in caches)
                )
                while True:
                    members = []
                    for m in caches:
                        pick = next((p for p in pool[m] if not outside.issuperset(p.combo)), None)
                        if pick is None:
                            break
                        members.append(pick)
                    if len(members) < size:
                        break
                    for packet in members:
                        pool[packet.cache].remove(packet)
                    kept = tuple(
                        p.fragment(min(n for n in p.combo if n not in outside)) for p in members
                    )
                    groups.append(PacketGroup(caches=caches, members=tuple(members), kept=kept))

    return groups


def deliver_type4_step2(groups: list[PacketGroup]) -> StageResult:
    """Send all but the kept fragment of every member, then chain the keeps."""
    result = StageResult()
    for group in groups:
        for member, kept in zip(group.members, group.kept, strict=True):
            for fragment in member.fragments:
                if fragment != kept:
                    result.emit(Stage.TYPE_IV_2, fragment)
        for first, second in pairwise(group.kept):
            result.emit(Stage.TYPE_IV_2, first, second)
        result.gain += 1
        result.delivered_packets += len(group.members)
    return result


def deliver_type4_step3(
    pclass: PacketClass, exclude: set[PacketId] | frozenset[PacketId] = frozenset()
) -> StageResult:
    """Send the alpha-1 most-requested fragments of every leftover Type-IV packet."""
    profile = pclass.profile
    result = StageResult()
    for cache in pclass.caches:
        for packet in pclass.of_type(cache, PacketType.TYPE_IV):
            if packet in exclude:
                continue
            keep = min(packet.combo, key=lambda n: (profile.demand(n), n))
            for fragment in packet.fragments:
                if fragment.file != keep:
                    result.emit(Stage.TYPE_IV_3, fragment)
            result.remaining.append(packet.fragment(keep))
    return result


# ========== Last Stage ==========


def deliver_last_stage(remaining: list[FragmentId], profile: RequestProfile) -> LastStageResult:
    """
    Deliver every fragment left over by Types II-IV.

    The cache with the fewest leftovers is the reference; each of its fragments
    is XORed with one unused leftover of every other cache, preferring the same
    combo, then the same file, then canonical order. Everything still unused is
    sent directly. The gain equals the reference cache's count.
    """
    caches = range(1, profile.n_groups + 1)
    by_cache: dict[int, list[FragmentId]] = {m: [] for m in caches}
    for fragment in remaining:
        by_cache[fragment.cache].append(fragment)
    for fragments in by_cache.values():
        fragments.sort(key=lambda f: f.sort_key)

    result = LastStageResult(remaining_counts=tuple(len(by_cache[m]) for m in caches))
    reference = min(caches, key=lambda m: (len(by_cache[m]), m))
    result.gain = len(by_cache[reference])

    if result.gain:
        result.reference_cache = reference
        others = [m for m in caches if m != reference]
        for anchor in by_cache[reference]:
            for k in others:
                partner = min(
                    by_cache[k],
                    key=lambda f, a=anchor: (f.combo != a.combo, f.file != a.file, f.combo, f.file),
                )
                by_cache[k].remove(partner)
                result.emit(Stage.LAST_1, anchor, partner)
        by_cache[reference] = []

    for m in caches:
        for fragment in by_cache[m]:
            result.emit(Stage.LAST_2, fragment)

    return result


# ========== Orchestration ==========


class DeliveryService:
    """
    Delivery Service

    Runs every delivery step in order, assembles the schedule and its counters,
    and certifies the result with the GF(2) oracle. Coded payloads touching an
    unrecoverable fragment are split into direct transmissions until the
    schedule verifies.
    """

    def __init__(self, metrics: MetricsCollector | None = None, certify: bool = True):
        """
        Initialize Delivery Service

        Args:
            metrics: Metrics collector (process-wide collector by default)
            certify: Run the decodability oracle after building
        """
        self.metrics = metrics or get_metrics()
        self.certify = certify

    def build_schedule(
        self, placement: PlacementState, profile: RequestProfile
    ) -> tuple[TransmissionSchedule, DeliveryStats]:
        """
        Build the complete delivery schedule.

        Args:
            placement: Coded placement
            profile: Request profile

        Returns:
            (schedule, stats)

        Raises:
            InvalidProfileException: If the profile does not fit the placement
            SchedulerDefectException: If no fallback makes the schedule decodable
        """
        started = time.perf_counter()
        pclass = classify_packets(placement, profile)

        type1 = deliver_type1(pclass)
        type2 = deliver_type2(pclass)
        type3 = deliver_type3(pclass)

        sets = search_request_sets(pclass)
        step1 = deliver_type4_step1(sets, pclass)
        consumed = {p for rset in sets for p in rset.packets}
        groups = search_packet_groups(pclass, exclude=consumed)
        step2 = deliver_type4_step2(groups)
        consumed.update(p for group in groups for p in group.members)
        step3 = deliver_type4_step3(pclass, exclude=consumed)

        last = deliver_last_stage(type2.remaining + type3.remaining + step3.remaining, profile)

        schedule = TransmissionSchedule()
        for part in (type1, type2, type3, step1, step2, step3, last):
            schedule.extend(part.transmissions)

        stats = DeliveryStats(
            t_ii_rm=len(type2.remaining),
            t_iii_rm=len(type3.remaining),
            t_iv_rm=len(step3.remaining),
            delta=step1.gain + step2.gain,
            last_stage_gain=last.gain,
            type4_delivered_packets=step1.delivered_packets + step2.delivered_packets,
            request_sets=len(sets),
            packet_groups=len(groups),
            untransmitted_local=type3.untransmitted_local,
            remaining_before_last=last.remaining_counts,
            type2_reference_caches=dict(type2.reference_caches),
            type3_reference_cache=type3.reference_cache,
            type3_kept=tuple(type3.kept),
        )
        stats.recount(schedule)

        if self.certify:
            schedule = self._certify(placement, profile, schedule, stats)

        elapsed = time.perf_counter() - started
        self.metrics.schedules_built.inc()
        self.metrics.build_seconds.observe(elapsed)
        for stage, count in schedule.count_by_stage().items():
            if count:
                self.metrics.transmissions.labels(stage=stage.value).inc(count)

        logger.debug(
            "schedule_built",
            total=stats.total_transmissions,
            delta=stats.delta,
            last_stage_gain=stats.last_stage_gain,
            request_sets=stats.request_sets,
            packet_groups=stats.packet_groups,
            elapsed_ms=round(elapsed * 1000, 3),
        )
        return schedule, stats

    def _certify(
        self,
        placement: PlacementState,
        profile: RequestProfile,
        schedule: TransmissionSchedule,
        stats: DeliveryStats,
    ) -> TransmissionSchedule:
        report = verify_all(profile, placement, schedule)
        while not report.passed:
            broken = set(report.missing)
            rebuilt: list[Transmission] = []
            splits = 0
            for transmission in schedule:
                if transmission.is_coded and broken.intersection(transmission.payload):
                    rebuilt.extend(
                        Transmission.of(transmission.stage, f) for f in transmission.payload
                    )
                    splits += 1
                else:
                    rebuilt.append(transmission)
            if not splits:
                raise SchedulerDefectException(
                    f"{len(broken)} fragments stay unrecoverable and no coded payload is left"
                )
            stats.fallback_splits += splits
            schedule = TransmissionSchedule(rebuilt)
            report = verify_all(profile, placement, schedule)

        if stats.fallback_fired:
            stats.recount(schedule)
            self.metrics.fallback_activations.inc()
            logger.warning(
                "fallback_applied",
                splits=stats.fallback_splits,
                requests=[list(r) for r in profile.requests],
            )
        return schedule


def build_schedule(
    placement: PlacementState, profile: RequestProfile
) -> tuple[TransmissionSchedule, DeliveryStats]:
    """Build and certify a schedule with the default service"""
    return DeliveryService().build_schedule(placement, profile)
