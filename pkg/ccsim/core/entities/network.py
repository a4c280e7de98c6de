"""Network Domain Entities

System parameters and per-group request profiles.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from ..combinatorics import ComboTable, alpha_subsets, binom
from ..exceptions import InvalidParametersException, InvalidProfileException


@dataclass(frozen=True)
class SystemParams:
    """
    SystemParams Domain Entity

    The (N, M, alpha) description of a shared-cache network. Files have unit
    size; every cache stores N/(M*alpha) file units.
    """

    n_files: int  # N
    n_groups: int  # M, one cache per user-group
    alpha: int

    def __post_init__(self):
        """Validate invariants"""
        if self.n_files < 1:
            raise InvalidParametersException("N must be at least 1")
        if self.n_groups < 1:
            raise InvalidParametersException("M must be at least 1")
        if not 1 <= self.alpha <= self.n_files:
            raise InvalidParametersException(
                f"alpha must lie in [1, N]; got alpha={self.alpha}, N={self.n_files}"
            )

    @property
    def cache_size(self) -> Fraction:
        """C = N/(M*alpha) file units"""
        return Fraction(self.n_files, self.n_groups * self.alpha)

    @property
    def fragments_per_cache(self) -> int:
        """Fragments of one file assigned to one cache, binom(N-1, alpha-1)"""
        return binom(self.n_files - 1, self.alpha - 1)

    @property
    def rate_denominator(self) -> int:
        """Fragments per file, M*binom(N-1, alpha-1); one fragment is 1/this file units"""
        return self.n_groups * self.fragments_per_cache

    @property
    def combo_table(self) -> ComboTable:
        return alpha_subsets(self.n_files, self.alpha)

    def to_dict(self) -> dict:
        """Convert to dictionary for serialization"""
        return {"N": self.n_files, "M": self.n_groups, "alpha": self.alpha}

    @classmethod
    def from_dict(cls, data: dict) -> "SystemParams":
        """Create SystemParams from dictionary"""
        return cls(n_files=int(data["N"]), n_groups=int(data["M"]), alpha=int(data["alpha"]))


@dataclass(frozen=True)
class RequestProfile:
    """
    RequestProfile Domain Entity

    The distinct request set of every user-group, 1-based groups and files.
    ``requests[m - 1]`` is the ascending tuple of files requested by group m.
    """

    n_files: int
    requests: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        """Validate invariants"""
        if not self.requests:
            raise InvalidProfileException("profile needs at least one user-group")
        normalized = []
        for m, files in enumerate(self.requests, start=1):
            files = tuple(files)
            if not files:
                raise InvalidProfileException(f"group {m} has an empty request set")
            if len(set(files)) != len(files):
                raise InvalidProfileException(f"group {m} repeats a file")
            for n in files:
                if not 1 <= n <= self.n_files:
                    raise InvalidProfileException(
                        f"group {m} requests file {n} outside 1..{self.n_files}"
                    )
            normalized.append(tuple(sorted(files)))
        object.__setattr__(self, "requests", tuple(normalized))

    @classmethod
    def of(cls, n_files: int, requests) -> "RequestProfile":
        """Build from any nested iterable of file indices"""
        return cls(n_files=n_files, requests=tuple(tuple(r) for r in requests))

    # ========== Derived Fields ==========

    @property
    def n_groups(self) -> int:
        return len(self.requests)

    @cached_property
    def request_sets(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(r) for r in self.requests)

    @cached_property
    def loads(self) -> tuple[int, ...]:
        """D_m per group"""
        return tuple(len(r) for r in self.requests)

    @property
    def total_requests(self) -> int:
        """D = sum of D_m"""
        return sum(self.loads)

    @cached_property
    def requested_files(self) -> tuple[int, ...]:
        """The union request set, ascending"""
        return tuple(sorted(set().union(*self.request_sets)))

    @property
    def n_requested(self) -> int:
        """N_R"""
        return len(self.requested_files)

    @cached_property
    def requested_set(self) -> frozenset[int]:
        return frozenset(self.requested_files)

    @cached_property
    def requesters(self) -> dict[int, tuple[int, ...]]:
        """File -> ascending groups requesting it (requested files only)"""
        table: dict[int, list[int]] = {n: [] for n in self.requested_files}
        for m, files in enumerate(self.requests, start=1):
            for n in files:
                table[n].append(m)
        return {n: tuple(groups) for n, groups in table.items()}

    def demand(self, file: int) -> int:
        """|M(n)|, zero for unrequested files"""
        return len(self.requesters.get(file, ()))

    @cached_property
    def sigma(self) -> tuple[int, ...]:
        """Per group, files requested by that group only"""
        return tuple(
            sum(1 for n in files if self.requesters[n] == (m,))
            for m, files in enumerate(self.requests, start=1)
        )

    def requests_of(self, group: int) -> tuple[int, ...]:
        return self.requests[group - 1]

    def request_set_of(self, group: int) -> frozenset[int]:
        return self.request_sets[group - 1]

    def validate_against(self, params: SystemParams) -> None:
        """Check the profile fits the network it is simulated on"""
        if params.n_files != self.n_files:
            raise InvalidProfileException(
                f"profile is over {self.n_files} files but the network has {params.n_files}"
            )
        if params.n_groups != self.n_groups:
            raise InvalidProfileException(
                f"profile lists {self.n_groups} groups but the network has {params.n_groups}"
            )

    # ========== Serialization ==========

    def to_dict(self) -> dict:
        """Convert to dictionary for serialization"""
        return {"N": self.n_files, "requests": [list(r) for r in self.requests]}

    @classmethod
    def from_dict(cls, data: dict) -> "RequestProfile":
        """Create RequestProfile from dictionary"""
        return cls.of(int(data["N"]), data["requests"])
