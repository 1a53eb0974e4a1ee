"""Test cases for the removal of forbidden induced copies."""
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from pydantic import ValidationError

from relational_limits.coding import SetPartition
from relational_limits.coding import index_key
from relational_limits.error import DomainError
from relational_limits.limit import StepLimit
from relational_limits.removal import ForbiddenFamily
from relational_limits.removal import RemovalRow
from relational_limits.removal import count_induced_copies
from relational_limits.removal import distance_d
from relational_limits.removal import frontier
from relational_limits.removal import greedy_removal
from relational_limits.removal import is_family_free
from relational_limits.removal import limit_generator
from relational_limits.removal import max_forbidden_density
from relational_limits.removal import planted_generator
from relational_limits.removal import removal_experiment
from relational_limits.structures import Signature
from relational_limits.structures import Structure
from relational_limits.structures import density_p
from relational_limits.structures import random_structure

BINARY = Signature.from_pairs([("R", 2)])
MIXED = Signature.from_pairs([("R", 2), ("U", 1)])


def graph(size: int, *edges: tuple) -> Structure:
    """Return a loop-free symmetric binary structure."""
    return Structure.from_tuples(
        BINARY, size, {"R": [tup for a, b in edges for tup in ((a, b), (b, a))]}
    )


TRIANGLE = graph(3, (1, 2), (2, 3), (1, 3))
TRIANGLE_FREE = ForbiddenFamily(signature=BINARY, members=(TRIANGLE,))


def bipartite(size: int, p: float, rng: np.random.Generator) -> Structure:
    """Return a random bipartite graph between the two halves of the universe."""
    half = size // 2
    edges = [
        (a, b)
        for a in range(1, half + 1)
        for b in range(half + 1, size + 1)
        if rng.random() < p
    ]
    return graph(size, *edges)


class TestDistance:
    """Test cases related to the edit distance."""

    def test_single_toggle(self) -> None:
        """Test that one toggled tuple costs the inverse size power of its key."""
        empty = Structure.empty(BINARY, 5)
        assert distance_d(empty, Structure.from_tuples(BINARY, 5, {"R": [(1, 2)]})) == Fraction(
            1, 25
        )
        assert distance_d(empty, Structure.from_tuples(BINARY, 5, {"R": [(1, 1)]})) == Fraction(
            1, 5
        )
        unary = Structure.from_tuples(MIXED, 4, {"U": [(3,)]})
        assert distance_d(Structure.empty(MIXED, 4), unary) == Fraction(1, 4)

    def test_pseudometric(self) -> None:
        """Test the axioms on random triples."""
        rng = np.random.default_rng(1)
        for _ in range(200):
            size = int(rng.integers(1, 6))
            a, b, c = (random_structure(MIXED, size, rng) for _ in range(3))
            assert distance_d(a, a) == 0
            assert distance_d(a, b) == distance_d(b, a)
            assert distance_d(a, c) <= distance_d(a, b) + distance_d(b, c)
            if distance_d(a, b) == 0:
                assert a == b

    def test_errors(self) -> None:
        """Test that structures must share their universe and language."""
        with pytest.raises(DomainError):
            distance_d(Structure.empty(BINARY, 2), Structure.empty(BINARY, 3))
        with pytest.raises(DomainError):
            distance_d(Structure.empty(BINARY, 2), Structure.empty(MIXED, 2))


class TestCopies:
    """Test cases related to the induced copies."""

    def test_count(self) -> None:
        """Test the copies of a triangle and of an edge."""
        n = graph(5, (1, 2), (2, 3), (1, 3), (3, 4))
        assert count_induced_copies(TRIANGLE, n) == 1
        assert count_induced_copies(graph(2, (1, 2)), n) == 4

    def test_density(self) -> None:
        """Test that copy counts are the densities times the number of subsets."""
        rng = np.random.default_rng(2)
        for _ in range(30):
            n = random_structure(MIXED, int(rng.integers(3, 7)), rng)
            m = random_structure(MIXED, int(rng.integers(1, 4)), rng)
            total = math.comb(n.size, m.size)
            assert Fraction(count_induced_copies(m, n), total) == density_p(m, n)

    def test_family_free(self) -> None:
        """Test the freeness checks and the size cap."""
        n = graph(4, (1, 2), (2, 3), (1, 3))
        assert not is_family_free(n, TRIANGLE_FREE)
        assert is_family_free(n, TRIANGLE_FREE, cap=2)
        assert is_family_free(graph(4, (1, 2), (3, 4)), TRIANGLE_FREE)
        assert is_family_free(n, ForbiddenFamily(signature=BINARY))

    def test_family_validation(self) -> None:
        """Test that members are non-isomorphic and share the language."""
        with pytest.raises(ValidationError):
            ForbiddenFamily(signature=BINARY, members=(graph(2, (1, 2)), graph(2, (2, 1))))
        with pytest.raises(ValidationError):
            ForbiddenFamily(signature=MIXED, members=(TRIANGLE,))
        with pytest.raises(DomainError):
            is_family_free(Structure.empty(MIXED, 2), TRIANGLE_FREE)


class TestGreedyRemoval:
    """Test cases related to the greedy removal."""

    def test_already_free(self) -> None:
        """Test that a free structure is returned untouched."""
        n = graph(4, (1, 2), (3, 4))
        repaired, report = greedy_removal(n, TRIANGLE_FREE)
        assert repaired == n
        assert report.distance == 0
        assert report.iterations == 0
        assert report.success

    def test_triangle(self) -> None:
        """Test that the least symmetric pair of a triangle is deleted."""
        n = graph(5, (1, 2), (2, 3), (1, 3))
        repaired, report = greedy_removal(n, TRIANGLE_FREE, epsilon=0.1)
        assert repaired == graph(5, (2, 3), (1, 3))
        assert report.distance == Fraction(2, 25)
        assert report.iterations == 1
        assert report.close
        assert report.edits == {index_key(0, SetPartition.parse("1|2")): 2}

    def test_without_symmetry(self) -> None:
        """Test that single tuples are toggled when symmetry is not preserved."""
        n = graph(5, (1, 2), (2, 3), (1, 3))
        repaired, report = greedy_removal(n, TRIANGLE_FREE, preserve_symmetry=False)
        assert report.distance == Fraction(1, 25)
        assert (1, 2) not in repaired.relation("R")
        assert (2, 1) in repaired.relation("R")

    def test_least_key_order(self) -> None:
        """Test that the least pair of the first copy is deleted first."""
        n = graph(4, (1, 2), (1, 3), (1, 4), (2, 3), (3, 4))
        repaired, report = greedy_removal(n, TRIANGLE_FREE)
        assert repaired == graph(4, (1, 4), (2, 3), (3, 4))
        assert report.iterations == 2
        assert report.distance == Fraction(4, 16)

    def test_most_copies(self) -> None:
        """Test that the pair shared by both triangles goes first on request."""
        n = graph(4, (1, 2), (1, 3), (1, 4), (2, 3), (3, 4))
        repaired, report = greedy_removal(n, TRIANGLE_FREE, most_copies=True)
        assert repaired == graph(4, (1, 2), (1, 4), (2, 3), (3, 4))
        assert report.iterations == 1
        assert report.distance == Fraction(2, 16)

    def test_insertion(self) -> None:
        """Test that copies without tuples are destroyed by insertions."""
        independent = ForbiddenFamily(signature=BINARY, members=(Structure.empty(BINARY, 2),))
        repaired, report = greedy_removal(Structure.empty(BINARY, 3), independent)
        assert report.success
        assert is_family_free(repaired, independent)
        assert repaired.relation("R") == {(1, 1), (2, 2)}
        assert report.distance == Fraction(2, 3)

    def test_budget(self) -> None:
        """Test that an exhausted budget is reported as a failure."""
        n = graph(6, (1, 2), (2, 3), (1, 3), (4, 5), (5, 6), (4, 6))
        repaired, report = greedy_removal(n, TRIANGLE_FREE, budget=1, epsilon=1.0)
        assert not report.success
        assert not report.close
        assert report.iterations == 1
        assert not is_family_free(repaired, TRIANGLE_FREE)
        with pytest.raises(DomainError):
            greedy_removal(n, TRIANGLE_FREE, budget=0)

    def test_orbits_are_closed(self) -> None:
        """Test that a symmetric repair keeps the relation symmetric."""
        n = graph(6, *itertools.combinations(range(1, 7), 2))
        repaired, report = greedy_removal(n, TRIANGLE_FREE)
        assert report.success
        relation = repaired.relation("R")
        assert all((b, a) in relation for a, b in relation)

    def test_report_distance(self) -> None:
        """Test that the distance is the sum of the edits over the key powers."""
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = random_structure(BINARY, 6, rng, 0.6)
            repaired, report = greedy_removal(n, TRIANGLE_FREE)
            expected = sum(
                (Fraction(count, 6**key.partition.size) for key, count in report.edits.items()),
                Fraction(0),
            )
            assert report.distance == expected == distance_d(n, repaired)
            if report.success:
                assert is_family_free(repaired, TRIANGLE_FREE)

    @pytest.mark.slow
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_planted(self, k: int) -> None:
        """Test that planted perturbations of a free structure are undone cheaply."""
        base = bipartite(20, 0.2, np.random.default_rng(4))
        assert is_family_free(base, TRIANGLE_FREE)
        # Distances are multiples of 1/400, so this is d <= 2k/400.
        epsilon = (2 * k + 1) / 400
        rows = removal_experiment(
            TRIANGLE_FREE,
            epsilon,
            planted_generator(base, k),
            trials=100,
            seed=k,
            most_copies=True,
        )
        assert sum(row.repaired for row in rows) >= 95


class TestExperiment:
    """Test cases related to the removal experiment."""

    def test_empty_family(self) -> None:
        """Test that every trial succeeds against an empty family."""
        rows = removal_experiment(
            ForbiddenFamily(signature=BINARY),
            0.01,
            limit_generator(StepLimit.full(BINARY), 5),
            trials=5,
            seed=1,
        )
        assert len(rows) == 5
        assert all(row.repaired and row.distance == 0 for row in rows)
        assert all(row.max_density == 0 and row.size == 5 for row in rows)

    def test_reproducible(self) -> None:
        """Test that a seed fixes the rows."""
        generator = planted_generator(graph(6, (1, 4), (2, 5), (3, 6)), 2)
        first = removal_experiment(TRIANGLE_FREE, 0.5, generator, trials=5, seed=7)
        second = removal_experiment(TRIANGLE_FREE, 0.5, generator, trials=5, seed=7)
        assert first == second

    def test_invalid_epsilon(self) -> None:
        """Test that the distance budget is positive."""
        with pytest.raises(DomainError):
            removal_experiment(
                TRIANGLE_FREE, 0, planted_generator(TRIANGLE, 1), trials=1, seed=1
            )

    def test_max_density(self) -> None:
        """Test the exact and sampled forbidden densities."""
        n = graph(4, (1, 2), (2, 3), (1, 3))
        rng = np.random.default_rng(5)
        assert max_forbidden_density(n, TRIANGLE_FREE, None, rng) == Fraction(1, 4)
        sampled = max_forbidden_density(n, TRIANGLE_FREE, None, rng, sample_limit=2)
        assert sampled in {Fraction(0), Fraction(1, 2), Fraction(1)}

    def test_planted_generator(self) -> None:
        """Test that symmetric relations are toggled by orbits."""
        generator = planted_generator(graph(4), 2)
        n = generator(np.random.default_rng(6))
        relation = n.relation("R")
        assert len(relation) == 4
        assert all((b, a) in relation for a, b in relation)
        with pytest.raises(DomainError):
            planted_generator(graph(2), 2)

    def test_frontier(self) -> None:
        """Test the success rates below each observed density."""

        def row(trial: int, density: Fraction, repaired: bool) -> RemovalRow:
            return RemovalRow(
                trial=trial,
                size=5,
                max_density=density,
                repaired=repaired,
                distance=Fraction(0),
                iterations=0,
            )

        rows = [
            row(0, Fraction(0), True),
            row(1, Fraction(1, 10), True),
            row(2, Fraction(1, 10), False),
            row(3, Fraction(1, 2), False),
        ]
        points = frontier(rows)
        assert [p.threshold for p in points] == [0, Fraction(1, 10), Fraction(1, 2)]
        assert [p.trials for p in points] == [1, 3, 4]
        assert [p.success_rate for p in points] == [1.0, 2 / 3, 0.5]
        assert frontier([]) == []
