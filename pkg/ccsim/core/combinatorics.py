"""Combinatorial Primitives

Binomials and the canonical (lexicographic) enumeration of the alpha-subsets of
the file library. Every "first"/"next" choice made by the scheduler refers to
the order fixed here.
"""

from bisect import bisect_left
from collections.abc import Iterable
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

from .exceptions import InvalidParametersException

Combo = tuple[int, ...]


def binom(n: int, k: int) -> int:
    """C(n, k), zero when k > n."""
    if n < 0 or k < 0:
        raise ValueError(f"binom requires n, k >= 0 (got n={n}, k={k})")
    return comb(n, k)


@dataclass(frozen=True)
class ComboTable:
    """
    Combination Table

    All alpha-subsets of {1..N} in lexicographic order, plus for every file the
    positions of the combos containing it.
    """

    n_files: int
    alpha: int
    combos: tuple[Combo, ...]
    per_file: dict[int, tuple[int, ...]]
    ranks: dict[Combo, int]

    def __len__(self) -> int:
        return len(self.combos)

    def rank(self, combo: Combo) -> int:
        """Position of combo in the canonical order"""
        return self.ranks[combo]

    def containing(self, file: int) -> tuple[Combo, ...]:
        """Combos that contain file, canonical order"""
        return tuple(self.combos[i] for i in self.per_file[file])

    def position_in_file(self, file: int, combo: Combo) -> int:
        """Index of combo among the combos containing file"""
        positions = self.per_file[file]
        target = self.ranks[combo]
        lo = bisect_left(positions, target)
        if lo == len(positions) or positions[lo] != target:
            raise KeyError(f"combo {combo} does not contain file {file}")
        return lo


@lru_cache(maxsize=64)
def alpha_subsets(n_files: int, alpha: int) -> ComboTable:
    """
    Enumerate the combination family.

    Args:
        n_files: Library size N
        alpha: Subset size

    Returns:
        ComboTable with binom(N, alpha) combos

    Raises:
        InvalidParametersException: If alpha is outside [1, N]
    """
    if alpha < 1 or alpha > n_files:
        raise InvalidParametersException(
            f"alpha must lie in [1, N]; got alpha={alpha}, N={n_files}"
        )

    combos = tuple(combinations(range(1, n_files + 1), alpha))
    per_file: dict[int, list[int]] = {n: [] for n in range(1, n_files + 1)}
    for idx, combo in enumerate(combos):
        for n in combo:
            per_file[n].append(idx)

    return ComboTable(
        n_files=n_files,
        alpha=alpha,
        combos=combos,
        per_file={n: tuple(v) for n, v in per_file.items()},
        ranks={combo: idx for idx, combo in enumerate(combos)},
    )


def restricted_subsets(table: ComboTable, allowed_files: Iterable[int]) -> frozenset[int]:
    """Indices of the combos lying entirely inside allowed_files"""
    allowed = sorted(set(allowed_files))
    return frozenset(table.ranks[combo] for combo in combinations(allowed, table.alpha))


__all__ = ["Combo", "ComboTable", "alpha_subsets", "binom", "restricted_subsets"]
