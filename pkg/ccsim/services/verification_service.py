"""Verification Service

Independent GF(2) decodability oracle. A user-group knows the XOR rows of its
own cached packets plus every broadcast payload; a fragment is recoverable iff
its unit vector lies in the span of those rows. Stage tags are never consulted.

Vectors are Python ints used as bitsets over the fragment universe; bit index
of S_{n,combo}^{(m)} is the mixed radix ((n-1)*K + position of combo among the
combos containing n)*M + (m-1), with K = binom(N-1, alpha-1).
"""

from collections.abc import Iterable
from dataclasses import dataclass, field

import structlog  # type: ignore[import-untyped]

from ..core.entities import FragmentId, PlacementState, RequestProfile, TransmissionSchedule
from ..monitoring import get_metrics

logger = structlog.get_logger()


class FragmentIndexer:
    """Bijection between fragments and bit positions"""

    def __init__(self, placement: PlacementState):
        self.placement = placement
        self.table = placement.table
        self.n_groups = placement.params.n_groups
        self.per_cache = placement.params.fragments_per_cache
        self.dimension = placement.n_fragments

    def index(self, fragment: FragmentId) -> int:
        position = self.table.position_in_file(fragment.file, fragment.combo)
        return ((fragment.file - 1) * self.per_cache + position) * self.n_groups + (
            fragment.cache - 1
        )

    def fragments_of_file(self, file: int) -> tuple[FragmentId, ...]:
        return self.placement.fragments_of_file(file)

    def vector(self, fragments: Iterable[FragmentId]) -> int:
        bits = 0
        for fragment in fragments:
            bits ^= 1 << self.index(fragment)
        return bits


@dataclass
class KnowledgeBasis:
    """
    Row-echelon basis of what one group can compute.

    ``pivots`` maps a leading bit to the row owning it; every stored row has a
    distinct leading bit, so reduction is a single descending pass.
    """

    group: int
    indexer: FragmentIndexer
    pivots: dict[int, int] = field(default_factory=dict)
    rows_seen: int = 0

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def _reduce(self, vector: int) -> int:
        while vector:
            lead = vector.bit_length() - 1
            row = self.pivots.get(lead)
            if row is None:
                return vector
            vector ^= row
        return 0

    def add(self, vector: int) -> bool:
        """Insert a row; returns True when it raised the rank"""
        self.rows_seen += 1
        reduced = self._reduce(vector)
        if not reduced:
            return False
        self.pivots[reduced.bit_length() - 1] = reduced
        return True

    def contains(self, vector: int) -> bool:
        return self._reduce(vector) == 0

    def knows(self, fragment: FragmentId) -> bool:
        return self.contains(1 << self.indexer.index(fragment))


@dataclass(frozen=True)
class GroupReport:
    """Outcome of verifying one group"""

    group: int
    checked: int
    missing: tuple[FragmentId, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.missing

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "passed": self.passed,
            "checked": self.checked,
            "missing": [f.to_triple() for f in self.missing],
        }


@dataclass(frozen=True)
class VerificationReport:
    """Conjunction of the per-group reports"""

    groups: tuple[GroupReport, ...]

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.groups)

    @property
    def missing(self) -> tuple[FragmentId, ...]:
        """Every unrecoverable fragment, each listed once"""
        seen: dict[FragmentId, None] = {}
        for report in self.groups:
            for fragment in report.missing:
                seen.setdefault(fragment, None)
        return tuple(seen)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "groups": [g.to_dict() for g in self.groups]}


def knowledge_basis(
    group: int, placement: PlacementState, schedule: TransmissionSchedule
) -> KnowledgeBasis:
    """
    Build the span of a group's cache contents and the broadcast.

    Args:
        group: User-group m (1-based)
        placement: Coded placement
        schedule: Broadcast payloads

    Returns:
        KnowledgeBasis in row-echelon form
    """
    indexer = FragmentIndexer(placement)
    basis = KnowledgeBasis(group=group, indexer=indexer)
    for packet in placement.packets_of(group):
        basis.add(indexer.vector(packet.fragments))
    for transmission in schedule:
        basis.add(indexer.vector(transmission.payload))
    return basis


def verify_group(
    group: int,
    profile: RequestProfile,
    basis: KnowledgeBasis,
) -> GroupReport:
    """Check every fragment of every file the group requested"""
    missing = []
    checked = 0
    for file in profile.requests_of(group):
        for fragment in basis.indexer.fragments_of_file(file):
            checked += 1
            if not basis.knows(fragment):
                missing.append(fragment)
    return GroupReport(group=group, checked=checked, missing=tuple(missing))


def verify_all(
    profile: RequestProfile,
    placement: PlacementState,
    schedule: TransmissionSchedule,
) -> VerificationReport:
    """
    Verify decodability for all groups.

    Returns:
        VerificationReport; ``passed`` iff every group recovers every fragment
        of every file it requested
    """
    reports = tuple(
        verify_group(m, profile, knowledge_basis(m, placement, schedule))
        for m in range(1, profile.n_groups + 1)
    )
    report = VerificationReport(groups=reports)
    if not report.passed:
        get_metrics().verification_failures.inc()
        logger.warning(
            "verification_failed",
            failed_groups=[g.group for g in reports if not g.passed],
            missing=len(report.missing),
        )
    return report
