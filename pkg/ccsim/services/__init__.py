"""Business Logic Layer

Placement, delivery, verification, analysis and sweeps over the core entities.
"""

from .analysis_service import (
    RateReport,
    WorstRateBreakdown,
    build_rate_report,
    cutset_bound,
    gap_bound,
    rate_of_schedule,
    stage_identities,
    theorem_rate,
    uncoded_gap,
    uncoded_reference_rate,
    worst_rate,
    worst_rate_breakdown,
    worst_rate_uniform,
)
from .delivery_service import (
    DeliveryService,
    PacketClass,
    PacketType,
    build_schedule,
    classify_packets,
)
from .placement_service import cache_size, place
from .sweep_service import SweepRow, run_sweep, sweep_rate_vs_load, sweep_rate_vs_memory
from .verification_service import VerificationReport, knowledge_basis, verify_all, verify_group

__all__ = [
    "DeliveryService",
    "PacketClass",
    "PacketType",
    "RateReport",
    "SweepRow",
    "VerificationReport",
    "WorstRateBreakdown",
    "build_rate_report",
    "build_schedule",
    "cache_size",
    "classify_packets",
    "cutset_bound",
    "gap_bound",
    "knowledge_basis",
    "place",
    "rate_of_schedule",
    "run_sweep",
    "stage_identities",
    "sweep_rate_vs_load",
    "sweep_rate_vs_memory",
    "theorem_rate",
    "uncoded_gap",
    "uncoded_reference_rate",
    "verify_all",
    "verify_group",
    "worst_rate",
    "worst_rate_breakdown",
    "worst_rate_uniform",
]
