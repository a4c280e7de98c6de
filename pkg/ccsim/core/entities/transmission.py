"""Fragment, Packet and Transmission Entities

Symbolic identities for fragments and cached packets, the broadcast records
built from them, and the counters describing one delivery run.
"""

from collections import Counter
from dataclasses import dataclass, field
from enum import StrEnum

from ..combinatorics import Combo


@dataclass(frozen=True)
class FragmentId:
    """
    One fragment S_{file, combo}^{(cache)}.

    A fragment has size 1/(M*binom(N-1, alpha-1)) file units and is identified
    by the file it belongs to, the combo it is coded with, and its cache.
    """

    file: int
    combo: Combo
    cache: int

    def __post_init__(self):
        """Validate invariants"""
        if self.file not in self.combo:
            raise ValueError(f"file {self.file} is not in combo {self.combo}")

    @property
    def sort_key(self) -> tuple[int, Combo, int]:
        """Canonical order: cache, then combo, then file"""
        return (self.cache, self.combo, self.file)

    @property
    def packet(self) -> "PacketId":
        return PacketId(combo=self.combo, cache=self.cache)

    def __str__(self) -> str:
        return f"S{self.file}({','.join(map(str, self.combo))})^{self.cache}"

    def to_triple(self) -> list:
        return [self.file, list(self.combo), self.cache]

    @classmethod
    def from_triple(cls, triple) -> "FragmentId":
        file, combo, cache = triple
        return cls(file=int(file), combo=tuple(int(n) for n in combo), cache=int(cache))


@dataclass(frozen=True)
class PacketId:
    """A cached packet: the XOR of one fragment per file of combo, held in cache."""

    combo: Combo
    cache: int

    @property
    def sort_key(self) -> tuple[int, Combo]:
        return (self.cache, self.combo)

    @property
    def fragments(self) -> tuple[FragmentId, ...]:
        return tuple(FragmentId(n, self.combo, self.cache) for n in self.combo)

    def fragment(self, file: int) -> FragmentId:
        return FragmentId(file, self.combo, self.cache)

    def __str__(self) -> str:
        return f"({','.join(map(str, self.combo))})^{self.cache}"


class Stage(StrEnum):
    """Delivery stage that emitted a transmission"""

    TYPE_I = "TypeI"
    TYPE_II_1 = "TypeII-1"  # non-local fragments of Type-II packets
    TYPE_II_2 = "TypeII-2"  # pairwise reference/partner payloads
    TYPE_III_1 = "TypeIII-1"
    TYPE_III_2 = "TypeIII-2"
    TYPE_IV_1 = "TypeIV-1"  # (alpha+1)-request sets
    TYPE_IV_2 = "TypeIV-2"  # packet-groups
    TYPE_IV_3 = "TypeIV-3"  # leftovers
    LAST_1 = "Last-1"
    LAST_2 = "Last-2"


@dataclass(frozen=True)
class Transmission:
    """
    One broadcast payload of exactly one fragment unit.

    The payload is the XOR of its fragments; a single fragment is a direct
    transmission. Fragments are stored in canonical order.
    """

    payload: tuple[FragmentId, ...]
    stage: Stage

    def __post_init__(self):
        """Validate invariants"""
        if not self.payload:
            raise ValueError("transmission payload cannot be empty")
        if len(set(self.payload)) != len(self.payload):
            raise ValueError("transmission payload repeats a fragment")
        object.__setattr__(
            self, "payload", tuple(sorted(self.payload, key=lambda f: f.sort_key))
        )

    @classmethod
    def of(cls, stage: Stage, *fragments: FragmentId) -> "Transmission":
        return cls(payload=tuple(fragments), stage=stage)

    @property
    def is_coded(self) -> bool:
        return len(self.payload) > 1

    def __str__(self) -> str:
        return " ^ ".join(str(f) for f in self.payload)

    def to_dict(self) -> dict:
        """Convert to dictionary for serialization"""
        return {"stage": self.stage.value, "payload": [f.to_triple() for f in self.payload]}

    @classmethod
    def from_dict(cls, data: dict) -> "Transmission":
        """Create Transmission from dictionary"""
        return cls(
            payload=tuple(FragmentId.from_triple(t) for t in data["payload"]),
            stage=Stage(data["stage"]),
        )


@dataclass
class TransmissionSchedule:
    """Ordered broadcast payloads of one delivery run"""

    transmissions: list[Transmission] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.transmissions)

    def __iter__(self):
        return iter(self.transmissions)

    def extend(self, transmissions) -> None:
        self.transmissions.extend(transmissions)

    def count_by_stage(self) -> dict[Stage, int]:
        """Recount transmissions grouped by stage tag (every stage present)"""
        counts = Counter(t.stage for t in self.transmissions)
        return {stage: counts.get(stage, 0) for stage in Stage}

    def without_stages(self, *stages: Stage) -> "TransmissionSchedule":
        drop = set(stages)
        return TransmissionSchedule([t for t in self.transmissions if t.stage not in drop])

    def to_list(self) -> list[dict]:
        return [t.to_dict() for t in self.transmissions]

    @classmethod
    def from_list(cls, records: list[dict]) -> "TransmissionSchedule":
        return cls([Transmission.from_dict(r) for r in records])


@dataclass
class DeliveryStats:
    """
    Counters of one delivery run, in fragment units.

    ``delta`` is the Type-IV delivery gain and ``last_stage_gain`` the gain of
    the last stage (the minimum remaining count over the caches).
    """

    t_i: int = 0
    t_ii1: int = 0
    t_ii2: int = 0
    t_ii_rm: int = 0
    t_iii1: int = 0
    t_iii2: int = 0
    t_iii_rm: int = 0
    t_iv: int = 0
    t_iv_rm: int = 0
    t_rm: int = 0
    delta: int = 0
    last_stage_gain: int = 0
    type4_delivered_packets: int = 0  # packets fully delivered by Type-IV Steps 1-2
    request_sets: int = 0
    packet_groups: int = 0
    untransmitted_local: tuple[int, ...] = ()  # L_m^(UnTr) per cache
    remaining_before_last: tuple[int, ...] = ()
    type2_reference_caches: dict[int, int] = field(default_factory=dict)
    type3_reference_cache: int | None = None
    type3_kept: tuple[FragmentId, ...] = ()
    fallback_splits: int = 0

    @property
    def t_ii(self) -> int:
        return self.t_ii1 + self.t_ii2

    @property
    def t_iii(self) -> int:
        return self.t_iii1 + self.t_iii2

    @property
    def total_transmissions(self) -> int:
        return self.t_i + self.t_ii + self.t_iii + self.t_iv + self.t_rm

    @property
    def fallback_fired(self) -> bool:
        return self.fallback_splits > 0

    def recount(self, schedule: TransmissionSchedule) -> None:
        """Re-derive the transmission counters from stage tags"""
        counts = schedule.count_by_stage()
        self.t_i = counts[Stage.TYPE_I]
        self.t_ii1 = counts[Stage.TYPE_II_1]
        self.t_ii2 = counts[Stage.TYPE_II_2]
        self.t_iii1 = counts[Stage.TYPE_III_1]
        self.t_iii2 = counts[Stage.TYPE_III_2]
        self.t_iv = counts[Stage.TYPE_IV_1] + counts[Stage.TYPE_IV_2] + counts[Stage.TYPE_IV_3]
        self.t_rm = counts[Stage.LAST_1] + counts[Stage.LAST_2]

    # ========== Serialization ==========

    def to_dict(self) -> dict:
        """Convert to dictionary for serialization"""
        return {
            "T_I": self.t_i,
            "T_II1": self.t_ii1,
            "T_II2": self.t_ii2,
            "T_II_RM": self.t_ii_rm,
            "T_III1": self.t_iii1,
            "T_III2": self.t_iii2,
            "T_III_RM": self.t_iii_rm,
            "T_IV": self.t_iv,
            "T_IV_RM": self.t_iv_rm,
            "T_RM": self.t_rm,
            "delta": self.delta,
            "Delta": self.last_stage_gain,
            "N_IV_DEL": self.type4_delivered_packets,
            "request_sets": self.request_sets,
            "packet_groups": self.packet_groups,
            "L_UnTr": list(self.untransmitted_local),
            "remaining_before_last": list(self.remaining_before_last),
            "fallback_splits": self.fallback_splits,
            "total": self.total_transmissions,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DeliveryStats":
        """Create DeliveryStats from dictionary (counters only)"""
        return cls(
            t_i=data["T_I"],
            t_ii1=data["T_II1"],
            t_ii2=data["T_II2"],
            t_ii_rm=data["T_II_RM"],
            t_iii1=data["T_III1"],
            t_iii2=data["T_III2"],
            t_iii_rm=data["T_III_RM"],
            t_iv=data["T_IV"],
            t_iv_rm=data["T_IV_RM"],
            t_rm=data["T_RM"],
            delta=data["delta"],
            last_stage_gain=data["Delta"],
            type4_delivered_packets=data.get("N_IV_DEL", 0),
            request_sets=data.get("request_sets", 0),
            packet_groups=data.get("packet_groups", 0),
            untransmitted_local=tuple(data.get("L_UnTr", ())),
            remaining_before_last=tuple(data.get("remaining_before_last", ())),
            fallback_splits=data.get("fallback_splits", 0),
        )
