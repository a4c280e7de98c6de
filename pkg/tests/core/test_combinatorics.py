"""Unit Tests for Combinatorial Primitives

Binomials, lexicographic alpha-subsets and per-file combo positions.
"""

from itertools import combinations

import pytest

from ccsim.core.combinatorics import alpha_subsets, binom, restricted_subsets
from ccsim.core.exceptions import InvalidParametersException

# ============================================================================
# Binomials
# ============================================================================


class TestBinom:
    """Test binom()"""

    def test_values(self):
        """Standard values, including k > n"""
        assert binom(5, 2) == 10
        assert binom(4, 0) == 1
        assert binom(0, 0) == 1
        assert binom(2, 3) == 0

    def test_negative_arguments_rejected(self):
        """Negative n or k is a caller bug"""
        with pytest.raises(ValueError):
            binom(-1, 0)
        with pytest.raises(ValueError):
            binom(3, -1)


# ============================================================================
# Alpha-Subsets
# ============================================================================


class TestAlphaSubsets:
    """Test alpha_subsets() and ComboTable"""

    def test_lexicographic_order(self):
        """Combos are listed in lexicographic order"""
        table = alpha_subsets(4, 2)

        assert table.combos == ((1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4))
        assert len(table) == binom(4, 2)

    def test_rank_matches_position(self):
        """rank() is the inverse of indexing"""
        table = alpha_subsets(5, 3)

        for idx, combo in enumerate(table.combos):
            assert table.rank(combo) == idx

    def test_containing(self):
        """Every file sits in binom(N-1, alpha-1) combos, in canonical order"""
        table = alpha_subsets(4, 2)

        assert table.containing(1) == ((1, 2), (1, 3), (1, 4))
        assert table.containing(3) == ((1, 3), (2, 3), (3, 4))
        for n in range(1, 5):
            assert len(table.containing(n)) == binom(3, 1)

    def test_position_in_file(self):
        """Index of a combo among those containing the file"""
        table = alpha_subsets(4, 2)

        assert table.position_in_file(3, (1, 3)) == 0
        assert table.position_in_file(3, (2, 3)) == 1
        assert table.position_in_file(3, (3, 4)) == 2

    def test_position_in_file_rejects_foreign_combo(self):
        """A combo without the file has no position"""
        table = alpha_subsets(4, 2)

        with pytest.raises(KeyError):
            table.position_in_file(1, (2, 3))

    def test_alpha_equal_to_n(self):
        """A single combo holding every file"""
        table = alpha_subsets(3, 3)

        assert table.combos == ((1, 2, 3),)

    def test_alpha_one(self):
        """alpha = 1 is uncoded placement: one singleton per file"""
        table = alpha_subsets(3, 1)

        assert table.combos == ((1,), (2,), (3,))

    @pytest.mark.parametrize("n_files, alpha", [(3, 0), (3, 4)])
    def test_alpha_out_of_range(self, n_files, alpha):
        """alpha must lie in [1, N]"""
        with pytest.raises(InvalidParametersException):
            alpha_subsets(n_files, alpha)


class TestRestrictedSubsets:
    """Test restricted_subsets()"""

    def test_three_of_four_files(self):
        table = alpha_subsets(4, 2)

        indices = restricted_subsets(table, {1, 2, 3})

        assert {table.combos[i] for i in indices} == {(1, 2), (1, 3), (2, 3)}

    def test_every_file_allowed(self):
        table = alpha_subsets(5, 3)

        assert restricted_subsets(table, range(1, 6)) == frozenset(range(len(table)))

    def test_too_few_files(self):
        assert restricted_subsets(alpha_subsets(5, 3), {2, 4}) == frozenset()

    def test_size_is_binomial(self):
        """Exhaustive over every allowed set of a six-file library"""
        for alpha in range(1, 7):
            table = alpha_subsets(6, alpha)
            for size in range(7):
                for allowed in combinations(range(1, 7), size):
                    indices = restricted_subsets(table, allowed)

                    assert len(indices) == binom(size, alpha)
                    assert all(set(table.combos[i]) <= set(allowed) for i in indices)
