"""Request Sampler

Seeded random request profiles for Monte-Carlo sweeps.

Every draw uses its own Philox stream keyed by (law, N, M, load, sample
index) under the sweep seed, so a sample does not depend on which other
samples were drawn or on the order workers ran them in.

Sampling law for a total load D:
    1. the composition (D_1, ..., D_M), 1 <= D_m <= N, uniformly among all
       compositions of D, by unranking a uniform rank;
    2. every request set uniformly among the D_m-subsets of {1..N}, by
       unranking a uniform combinadic rank.
"""

from functools import lru_cache

import numpy as np
import structlog  # type: ignore[import-untyped]

from ..core.combinatorics import binom
from ..core.entities import RequestProfile
from ..core.exceptions import InfeasibleLoadException

logger = structlog.get_logger()

_COMPOSITION_LAW = 0
_UNIFORM_LAW = 1
_INT64_BOUND = 2**63


def sample_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for one (seed, key) pair"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def _uniform_below(rng: np.random.Generator, bound: int) -> int:
    """Uniform integer in [0, bound) for arbitrarily large bounds"""
    if bound < _INT64_BOUND:
        return int(rng.integers(0, bound))
    width = (bound.bit_length() + 7) // 8
    while True:
        value = int.from_bytes(rng.bytes(width), "little") >> (8 * width - bound.bit_length())
        if value < bound:
            return value


@lru_cache(maxsize=4096)
def count_compositions(parts: int, total: int, cap: int) -> int:
    """Compositions of total into ``parts`` parts, each in 1..cap"""
    if parts == 0:
        return 1 if total == 0 else 0
    if not parts <= total <= parts * cap:
        return 0
    return sum(count_compositions(parts - 1, total - d, cap) for d in range(1, cap + 1))


def unrank_composition(rank: int, parts: int, total: int, cap: int) -> tuple[int, ...]:
    """The rank-th composition in lexicographic order"""
    if not 0 <= rank < count_compositions(parts, total, cap):
        raise ValueError(f"rank {rank} out of range")
    result = []
    for remaining in range(parts, 0, -1):
        for d in range(1, cap + 1):
            ways = count_compositions(remaining - 1, total - d, cap)
            if rank < ways:
                result.append(d)
                total -= d
                break
            rank -= ways
    return tuple(result)


def unrank_subset(rank: int, n: int, k: int) -> tuple[int, ...]:
    """k-subset of {1..n} with the given colex rank"""
    chosen = [0] * k
    while k > 0:
        n -= 1
        offset = binom(n, k)
        if rank >= offset:
            rank -= offset
            k -= 1
            chosen[k] = n + 1
    return tuple(chosen)


def sample_requests(
    n_files: int, n_groups: int, total: int, seed: int, index: int = 0
) -> RequestProfile:
    """
    Draw a profile with D = total requests in all.

    Args:
        n_files: N
        n_groups: M
        total: D, between M and N*M
        seed: 64-bit sweep seed
        index: Sample index within the sweep point

    Raises:
        InfeasibleLoadException: If D is outside [M, N*M]
    """
    if not n_groups <= total <= n_files * n_groups:
        raise InfeasibleLoadException(
            f"D={total} is infeasible for N={n_files}, M={n_groups}; need M <= D <= N*M"
        )
    rng = sample_stream(seed, _COMPOSITION_LAW, n_files, n_groups, total, index)
    count = count_compositions(n_groups, total, n_files)
    loads = unrank_composition(_uniform_below(rng, count), n_groups, total, n_files)
    requests = [
        unrank_subset(_uniform_below(rng, binom(n_files, d)), n_files, d) for d in loads
    ]
    return RequestProfile.of(n_files, requests)


def sample_uniform_requests(
    n_files: int, n_groups: int, load: int, seed: int, index: int = 0
) -> RequestProfile:
    """
    Draw a profile where every group requests exactly ``load`` files.

    Raises:
        InfeasibleLoadException: If load is outside 1..N
    """
    if not 1 <= load <= n_files:
        raise InfeasibleLoadException(f"L={load} is infeasible for N={n_files}; need 1 <= L <= N")
    rng = sample_stream(seed, _UNIFORM_LAW, n_files, n_groups, load, index)
    requests = [
        unrank_subset(_uniform_below(rng, binom(n_files, load)), n_files, load)
        for _ in range(n_groups)
    ]
    return RequestProfile.of(n_files, requests)
