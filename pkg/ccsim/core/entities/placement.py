"""Placement Domain Entity

Coded cache contents: per cache, one XOR packet per combo.
"""

from dataclasses import dataclass
from fractions import Fraction

from ..combinatorics import ComboTable
from .network import SystemParams
from .transmission import FragmentId, PacketId


@dataclass(frozen=True)
class PlacementState:
    """
    PlacementState Domain Entity

    ``packets[m - 1]`` lists the packets of cache m in canonical combo order.
    ``fragment_home`` maps every fragment to the single packet carrying it.
    """

    params: SystemParams
    table: ComboTable
    packets: tuple[tuple[PacketId, ...], ...]
    fragment_home: dict[FragmentId, PacketId]

    def packets_of(self, cache: int) -> tuple[PacketId, ...]:
        return self.packets[cache - 1]

    def home_of(self, fragment: FragmentId) -> PacketId:
        return self.fragment_home[fragment]

    @property
    def n_fragments(self) -> int:
        return len(self.fragment_home)

    def stored_size(self, cache: int) -> Fraction:
        """File units held by one cache"""
        return Fraction(len(self.packets_of(cache)), self.params.rate_denominator)

    def fragments_of_file(self, file: int) -> tuple[FragmentId, ...]:
        """All M*binom(N-1, alpha-1) fragments of a file"""
        return tuple(
            FragmentId(file, combo, cache)
            for combo in self.table.containing(file)
            for cache in range(1, self.params.n_groups + 1)
        )

    def render(self) -> list[str]:
        """One line per packet: ``cache m: (n1,...) = f1 ^ f2 ^ ...``"""
        lines = []
        for cache, packets in enumerate(self.packets, start=1):
            for packet in packets:
                combo = ",".join(map(str, packet.combo))
                body = " ^ ".join(str(f) for f in packet.fragments)
                lines.append(f"cache {cache}: ({combo}) = {body}")
        return lines
