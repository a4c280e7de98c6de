"""Domain Entities

Pure value objects without framework dependencies.
These represent the core concepts of the caching network.
"""

from .network import RequestProfile, SystemParams
from .placement import PlacementState
from .transmission import (
    DeliveryStats,
    FragmentId,
    PacketId,
    Stage,
    Transmission,
    TransmissionSchedule,
)

__all__ = [
    "DeliveryStats",
    "FragmentId",
    "PacketId",
    "PlacementState",
    "RequestProfile",
    "Stage",
    "SystemParams",
    "Transmission",
    "TransmissionSchedule",
]
