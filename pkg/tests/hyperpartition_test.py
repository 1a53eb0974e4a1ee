"""Test cases for the hyperpartitions."""
import itertools
from fractions import Fraction

import numpy as np
import pytest
from pydantic import ValidationError

from relational_limits.error import DomainError
from relational_limits.hyperpartition import Hyperpartition
from relational_limits.hyperpartition import cell
from relational_limits.hyperpartition import cell_signature
from relational_limits.hyperpartition import equitability_delta
from relational_limits.hyperpartition import hyperpartition_from_seed
from relational_limits.hyperpartition import seed_in_cube
from relational_limits.hyperpartition import step_structure
from relational_limits.limit import StepLimit
from relational_limits.limit import random_step_limit
from relational_limits.limit import realize
from relational_limits.limit import sample_seed
from relational_limits.structures import Signature

MIXED = Signature.from_pairs([("R", 2), ("U", 1)])
TERNARY = Signature.from_pairs([("T", 3), ("U", 1)])

# Only 3 has color 2 among the singletons, every pair has color 1.
SMALL = Hyperpartition(ground=3, t=2, resolution=2, colors=(1, 1, 2, 1, 1, 1))


class TestHyperpartition:
    """Test cases related to the colorings of subsets."""

    def test_colors(self) -> None:
        """Test the colors and the class sizes."""
        assert SMALL.color([3]) == 2
        assert SMALL.color([3, 1]) == 1
        assert SMALL.class_sizes(1) == (2, 1)
        assert SMALL.class_sizes(2) == (3, 0)

    def test_invalid(self) -> None:
        """Test that colorings must cover the subsets with valid colors."""
        with pytest.raises(ValidationError):
            Hyperpartition(ground=3, t=2, resolution=2, colors=(1, 1, 2))
        with pytest.raises(ValidationError):
            Hyperpartition(ground=2, t=1, resolution=2, colors=(1, 3))

    def test_from_seed(self) -> None:
        """Test that seed values are colored by their interval."""
        seed = sample_seed(4, 2, np.random.default_rng(1))
        h = hyperpartition_from_seed(seed, 3)
        assert h.t == 2
        assert h.ground == 4
        for subset, y in zip(seed.index.subsets, seed.values):
            assert (h.color(subset) - 1) / 3 <= y < h.color(subset) / 3


class TestCells:
    """Test cases related to the cells."""

    def test_signature(self) -> None:
        """Test the cell signatures of a few tuples."""
        assert cell_signature(SMALL, (1, 3)) == (1, 2, 1)
        assert cell_signature(SMALL, (3, 1)) == (2, 1, 1)
        assert cell_signature(SMALL, (2,)) == (1,)

    def test_signature_errors(self) -> None:
        """Test that tuples must be short, distinct and inside the ground set."""
        for x in [(), (1, 1), (1, 2, 3), (1, 4)]:
            with pytest.raises(DomainError):
                cell_signature(SMALL, x)

    def test_cell(self) -> None:
        """Test the cell of a signature."""
        assert cell(SMALL, (1, 2, 1)) == {(1, 3), (2, 3)}
        assert cell(SMALL, (2, 1, 1)) == {(3, 1), (3, 2)}
        assert cell(SMALL, (2, 2, 1)) == set()
        assert cell(SMALL, (2,)) == {(3,)}

    def test_cell_errors(self) -> None:
        """Test that signatures must color the subsets of a colored level."""
        with pytest.raises(DomainError):
            cell(SMALL, (1, 1))
        with pytest.raises(DomainError):
            cell(SMALL, (1,) * 7)

    def test_partition(self) -> None:
        """Test that the cells partition the distinct-entry tuples."""
        rng = np.random.default_rng(2)
        for _ in range(10):
            resolution = int(rng.integers(1, 4))
            h = hyperpartition_from_seed(sample_seed(int(rng.integers(2, 7)), 2, rng), resolution)
            cells = [
                cell(h, e) for e in itertools.product(range(1, resolution + 1), repeat=3)
            ]
            assert sum(len(c) for c in cells) == h.ground * (h.ground - 1)
            assert set().union(*cells) == set(itertools.permutations(range(1, h.ground + 1), 2))


class TestEquitability:
    """Test cases related to the equitability bound."""

    def test_examples(self) -> None:
        """Test the spread of a few colorings."""
        assert equitability_delta(Hyperpartition(ground=2, t=1, resolution=2, colors=(1, 2))) == 0
        balanced = Hyperpartition(
            ground=4, t=2, resolution=2, colors=(1, 1, 2, 2, 1, 2, 1, 2, 1, 2)
        )
        assert equitability_delta(balanced) == 0
        uneven = Hyperpartition(ground=3, t=1, resolution=2, colors=(1, 1, 2))
        assert equitability_delta(uneven) == Fraction(1, 3)
        assert equitability_delta(SMALL) == Fraction(2, 3)

    def test_shrinks(self) -> None:
        """Test that random colorings get more equitable on larger sets."""
        rng = np.random.default_rng(3)

        def mean_delta(ground: int) -> float:
            deltas = [
                equitability_delta(hyperpartition_from_seed(sample_seed(ground, 2, rng), 2))
                for _ in range(10)
            ]
            return float(sum(deltas)) / len(deltas)

        assert mean_delta(200) < mean_delta(10)


class TestStepStructure:
    """Test cases related to the structures coded by selected cells."""

    def test_realize(self) -> None:
        """Test that the coloring of a seed gives its realization."""
        rng = np.random.default_rng(4)
        for _ in range(100):
            size = int(rng.integers(1, 13))
            limit = random_step_limit(MIXED, int(rng.integers(1, 4)), rng)
            seed = sample_seed(size, 2, rng)
            h = hyperpartition_from_seed(seed, limit.resolution)
            assert step_structure(h, limit) == realize(limit, size, seed)

    def test_realize_ternary(self) -> None:
        """Test the identity on the partitions of three positions."""
        rng = np.random.default_rng(6)
        for _ in range(30):
            size = int(rng.integers(1, 8))
            limit = random_step_limit(TERNARY, int(rng.integers(1, 3)), rng)
            seed = sample_seed(size, 3, rng)
            h = hyperpartition_from_seed(seed, limit.resolution)
            assert step_structure(h, limit) == realize(limit, size, seed)

    def test_seed_in_cube(self) -> None:
        """Test that seeds drawn in the cube of a coloring realize its structure."""
        rng = np.random.default_rng(5)
        for _ in range(20):
            limit = random_step_limit(MIXED, 3, rng)
            h = hyperpartition_from_seed(sample_seed(5, 2, rng), 3)
            seed = seed_in_cube(h, rng)
            assert hyperpartition_from_seed(seed, 3) == h
            assert realize(limit, 5, seed) == step_structure(h, limit)

    def test_errors(self) -> None:
        """Test the resolution and level checks."""
        with pytest.raises(DomainError):
            step_structure(SMALL, StepLimit.empty(MIXED, 3))
        low = Hyperpartition(ground=3, t=1, resolution=2, colors=(1, 1, 2))
        with pytest.raises(DomainError):
            step_structure(low, StepLimit.empty(MIXED, 2))
