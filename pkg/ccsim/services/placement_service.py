"""Placement Service

Coded prefetching: split every file into M*binom(N-1, alpha-1) fragments,
give each cache binom(N-1, alpha-1) of them, and XOR one fragment per file of
every combo into a cached packet.
"""

from fractions import Fraction

import structlog  # type: ignore[import-untyped]

from ..core.entities import FragmentId, PacketId, PlacementState, SystemParams

logger = structlog.get_logger()


def cache_size(params: SystemParams) -> Fraction:
    """Cache size C = N/(M*alpha) in file units"""
    return params.cache_size


def place(params: SystemParams) -> PlacementState:
    """
    Build the coded placement.

    Cache m holds, for every combo (n_1, ..., n_alpha), the packet
    S_{n_1,combo}^{(m)} ^ ... ^ S_{n_alpha,combo}^{(m)}. Packets are listed in
    canonical combo order and caches run 1..M, so the result is deterministic.

    Args:
        params: Network parameters

    Returns:
        PlacementState with every fragment mapped to its packet
    """
    table = params.combo_table
    packets: list[tuple[PacketId, ...]] = []
    fragment_home: dict[FragmentId, PacketId] = {}

    for cache in range(1, params.n_groups + 1):
        cache_packets = tuple(PacketId(combo=combo, cache=cache) for combo in table.combos)
        for packet in cache_packets:
            for fragment in packet.fragments:
                fragment_home[fragment] = packet
        packets.append(cache_packets)

    logger.debug(
        "placement_built",
        n_files=params.n_files,
        n_groups=params.n_groups,
        alpha=params.alpha,
        packets_per_cache=len(table),
        fragments=len(fragment_home),
    )

    return PlacementState(
        params=params,
        table=table,
        packets=tuple(packets),
        fragment_home=fragment_home,
    )
