"""
ccsim Data Models

Pydantic wire models for profile documents, serialized schedules and sweep
configurations, plus the rational codec used by every output format.
"""

from fractions import Fraction
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .core.entities import (
    DeliveryStats,
    RequestProfile,
    SystemParams,
    TransmissionSchedule,
)
from .core.exceptions import InvalidProfileException

# ========== Rationals ==========


def format_ratio(value: Fraction | int) -> str:
    """Render an exact rational as ``p/q``."""
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def parse_ratio(text: str) -> Fraction:
    """Inverse of format_ratio; bare integers are accepted too."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational: {text!r}") from exc


def format_decimal(value: Fraction | int, digits: int = 6) -> str:
    return f"{float(value):.{digits}f}"


# ========== Profile Documents ==========


class ProfileDocument(BaseModel):
    """Request profile document: network parameters plus per-group requests"""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    n_files: int = Field(..., alias="N", description="Number of unit-size files")
    n_groups: int = Field(..., alias="M", description="Number of user-groups (caches)")
    alpha: int = Field(..., description="Coding parameter: files XORed per cached packet")
    requests: list[list[int]] = Field(
        ..., description="Per group, the distinct requested files (1-based)"
    )

    @field_validator("requests")
    @classmethod
    def validate_requests(cls, v: list[list[int]]) -> list[list[int]]:
        for m, files in enumerate(v, start=1):
            if not files:
                raise ValueError(f"group {m} has an empty request set")
            if len(set(files)) != len(files):
                raise ValueError(f"group {m} repeats a file")
        return v

    @model_validator(mode="after")
    def validate_shape(self) -> "ProfileDocument":
        if len(self.requests) != self.n_groups:
            raise ValueError(f"expected {self.n_groups} request lists, got {len(self.requests)}")
        return self

    @classmethod
    def from_entities(cls, params: SystemParams, profile: RequestProfile) -> "ProfileDocument":
        return cls(
            N=params.n_files,
            M=params.n_groups,
            alpha=params.alpha,
            requests=[list(r) for r in profile.requests],
        )

    def to_entities(self) -> tuple[SystemParams, RequestProfile]:
        params = SystemParams(n_files=self.n_files, n_groups=self.n_groups, alpha=self.alpha)
        profile = RequestProfile.of(self.n_files, self.requests)
        profile.validate_against(params)
        return params, profile


def parse_profile(document: str | bytes | dict) -> tuple[SystemParams, RequestProfile]:
    """
    Parse and validate a profile document.

    Args:
        document: JSON text or an already-decoded mapping

    Returns:
        (SystemParams, RequestProfile) with every derived field available

    Raises:
        InvalidProfileException: On schema violations or bad request sets
        InvalidParametersException: If alpha is outside [1, N]
    """
    try:
        if isinstance(document, dict):
            doc = ProfileDocument.model_validate(document)
        else:
            doc = ProfileDocument.model_validate_json(document)
    except ValidationError as exc:
        raise InvalidProfileException(f"invalid profile document: {exc}") from exc
    return doc.to_entities()


def dump_profile(params: SystemParams, profile: RequestProfile) -> str:
    """Serialize a profile document as JSON"""
    return ProfileDocument.from_entities(params, profile).model_dump_json(by_alias=True)


# ========== Schedule Documents ==========


class TransmissionRecord(BaseModel):
    """One broadcast payload: stage tag plus (file, combo, cache) triples"""

    stage: str = Field(..., description="Stage tag, e.g. TypeII-2")
    payload: list[tuple[int, list[int], int]] = Field(..., min_length=1)


class ScheduleDocument(BaseModel):
    """A complete delivery run as written by ``simulate --output``"""

    profile: ProfileDocument
    transmissions: list[TransmissionRecord]
    stats: dict[str, Any] = Field(default_factory=dict)
    rate: str | None = Field(None, description="Achieved rate as p/q")
    theorem_rate: str | None = Field(None, description="Closed-form rate as p/q")

    @classmethod
    def build(
        cls,
        params: SystemParams,
        profile: RequestProfile,
        schedule: TransmissionSchedule,
        stats: DeliveryStats | None = None,
        rate: Fraction | None = None,
        theorem_rate: Fraction | None = None,
    ) -> "ScheduleDocument":
        return cls(
            profile=ProfileDocument.from_entities(params, profile),
            transmissions=[TransmissionRecord(**t.to_dict()) for t in schedule],
            stats=stats.to_dict() if stats else {},
            rate=format_ratio(rate) if rate is not None else None,
            theorem_rate=format_ratio(theorem_rate) if theorem_rate is not None else None,
        )

    def to_schedule(self) -> TransmissionSchedule:
        try:
            return TransmissionSchedule.from_list([r.model_dump() for r in self.transmissions])
        except ValueError as exc:
            raise InvalidProfileException(f"invalid transmission record: {exc}") from exc


def parse_schedule(document: str | bytes) -> ScheduleDocument:
    try:
        return ScheduleDocument.model_validate_json(document)
    except ValidationError as exc:
        raise InvalidProfileException(f"invalid schedule document: {exc}") from exc


# ========== Sweeps ==========


class SweepConfig(BaseModel):
    """Monte-Carlo sweep over total load (D or L) or over cache size (alpha)"""

    kind: Literal["load", "memory"] = Field(
        "load", description="'load' sweeps D (or L); 'memory' sweeps alpha"
    )
    n_files: int = Field(..., ge=1, description="N")
    group_counts: list[int] = Field(..., min_length=1, description="M values (one block each)")
    alphas: list[int] | None = Field(
        None, description="alpha points; defaults to [1] for load, N..1 for memory sweeps"
    )
    loads: list[int] | None = Field(None, description="Total request counts D")
    uniform_loads: list[int] | None = Field(None, description="Per-group request counts L")
    samples: int = Field(100, ge=1, description="Random profiles per point")
    seed: int = Field(0, ge=0, le=2**64 - 1, description="64-bit sweep seed")
    output: str | None = Field(None, description="CSV path; stdout when unset")

    @field_validator("group_counts")
    @classmethod
    def validate_group_counts(cls, v: list[int]) -> list[int]:
        if any(m < 1 for m in v):
            raise ValueError("group counts must be positive")
        return v

    @model_validator(mode="after")
    def validate_ranges(self) -> "SweepConfig":
        if bool(self.loads) == bool(self.uniform_loads):
            raise ValueError("exactly one of loads / uniform_loads must be given")
        if self.alphas is not None:
            if not self.alphas:
                raise ValueError("alphas cannot be empty")
            if any(not 1 <= a <= self.n_files for a in self.alphas):
                raise ValueError("every alpha must lie in [1, N]")
        return self

    @property
    def alpha_points(self) -> list[int]:
        if self.alphas:
            return list(self.alphas)
        if self.kind == "memory":
            return list(range(self.n_files, 0, -1))
        return [1]


__all__ = [
    "ProfileDocument",
    "ScheduleDocument",
    "SweepConfig",
    "TransmissionRecord",
    "dump_profile",
    "format_decimal",
    "format_ratio",
    "parse_profile",
    "parse_ratio",
    "parse_schedule",
]
