"""Test cases for the structures."""
import itertools
import logging
import math
from fractions import Fraction

import numpy as np
import pytest
from pydantic import ValidationError

from relational_limits.error import DomainError
from relational_limits.error import ResourceError
from relational_limits.structures import Signature
from relational_limits.structures import Structure
from relational_limits.structures import automorphism_count
from relational_limits.structures import automorphism_probability
from relational_limits.structures import density_p
from relational_limits.structures import density_t
from relational_limits.structures import density_t0
from relational_limits.structures import density_tind
from relational_limits.structures import induced_copies
from relational_limits.structures import induced_substructure
from relational_limits.structures import is_embedding
from relational_limits.structures import is_homomorphism
from relational_limits.structures import is_isomorphic
from relational_limits.structures import isomorphism_types
from relational_limits.structures import random_structure
from relational_limits.structures import type_census
from relational_limits.structures import type_index

logger = logging.getLogger(__name__)

BINARY = Signature.from_pairs([("R", 2)])
MIXED = Signature.from_pairs([("R", 2), ("U", 1)])


def digraph(size: int, *edges: tuple) -> Structure:
    """Return a structure with one binary relation."""
    return Structure.from_tuples(BINARY, size, {"R": edges})


CYCLE = digraph(3, (1, 2), (2, 3), (3, 1))
EDGE = digraph(2, (1, 2))


def brute_force_isomorphic(m: Structure, n: Structure) -> bool:
    """Check every bijection."""
    if m.size != n.size:
        return False
    return any(
        is_embedding(f, m, n) for f in itertools.permutations(range(1, n.size + 1))
    )


class TestSignature:
    """Test cases related to the signatures."""

    def test_properties(self) -> None:
        """Test the counts and the notation."""
        signature = Signature.from_pairs([("R", 2), ("S", 3), ("U", 1)])
        assert signature.n == 3
        assert signature.arities == (2, 3, 1)
        assert signature.r_max == 3
        assert signature.index("S") == 1
        assert str(signature) == "R/2 S/3 U/1"

    def test_empty(self) -> None:
        """Test that an empty language has no arity."""
        assert Signature().r_max == 0

    def test_duplicate(self) -> None:
        """Test that symbol names are distinct."""
        with pytest.raises(ValidationError):
            Signature.from_pairs([("R", 2), ("R", 1)])

    def test_arity(self) -> None:
        """Test that arities are positive."""
        with pytest.raises(ValidationError):
            Signature.from_pairs([("R", 0)])

    def test_unknown(self) -> None:
        """Test that an unknown symbol is a domain error."""
        with pytest.raises(DomainError):
            BINARY.index("S")


class TestStructure:
    """Test cases related to the structures."""

    def test_out_of_range(self) -> None:
        """Test that tuples stay in the universe."""
        with pytest.raises(ValidationError):
            digraph(3, (1, 4))

    def test_wrong_length(self) -> None:
        """Test that tuples have the arity of their symbol."""
        with pytest.raises(ValidationError):
            digraph(3, (1, 2, 3))

    def test_unknown_symbol(self) -> None:
        """Test that tuples of an unknown symbol are rejected."""
        with pytest.raises(DomainError):
            Structure.from_tuples(BINARY, 2, {"S": [(1, 2)]})

    def test_duplicates(self) -> None:
        """Test that repeated tuples are merged."""
        assert digraph(2, (1, 2), (1, 2)).tuple_count == 1

    def test_relabel(self) -> None:
        """Test that relabelling moves the tuples."""
        assert EDGE.relabel([2, 1]) == digraph(2, (2, 1))
        with pytest.raises(DomainError):
            EDGE.relabel([1, 1])


class TestInducedSubstructure:
    """Test cases related to the induced substructures."""

    def test_full(self) -> None:
        """Test that the full universe gives the structure back."""
        assert induced_substructure(CYCLE, [1, 2, 3]) == CYCLE

    def test_cycle(self) -> None:
        """Test the substructure of a directed cycle."""
        assert induced_substructure(CYCLE, {1, 2}) == EDGE

    def test_diagonal(self) -> None:
        """Test that the equality relation restricts to equality."""
        equality = digraph(5, *((a, a) for a in range(1, 6)))
        assert induced_substructure(equality, [2, 4]) == digraph(2, (1, 1), (2, 2))

    def test_errors(self) -> None:
        """Test that the subset must be nonempty and inside the universe."""
        with pytest.raises(DomainError):
            induced_substructure(CYCLE, [])
        with pytest.raises(DomainError):
            induced_substructure(CYCLE, [1, 4])


class TestMaps:
    """Test cases related to homomorphisms and embeddings."""

    def test_identity(self) -> None:
        """Test that the identity is an embedding."""
        assert is_embedding([1, 2, 3], CYCLE, CYCLE)

    def test_edge_into_cycle(self) -> None:
        """Test the embeddings of an edge into a directed cycle."""
        assert is_embedding([1, 2], EDGE, CYCLE)
        assert not is_embedding([2, 1], EDGE, CYCLE)

    def test_homomorphism(self) -> None:
        """Test that homomorphisms need not be injective nor reflect tuples."""
        loop = digraph(1, (1, 1))
        assert is_homomorphism([1, 1], EDGE, loop)
        assert is_homomorphism([1, 2], digraph(2), EDGE)
        assert not is_embedding([1, 2], digraph(2), EDGE)

    def test_errors(self) -> None:
        """Test the domain errors of maps."""
        with pytest.raises(DomainError):
            is_embedding([1, 1], EDGE, CYCLE)
        with pytest.raises(DomainError):
            is_embedding([1, 2], Structure.empty(MIXED, 2), CYCLE)
        with pytest.raises(DomainError):
            is_homomorphism([1, 4], EDGE, CYCLE)


class TestIsomorphism:
    """Test cases related to isomorphisms."""

    def test_examples(self) -> None:
        """Test a few small cases."""
        assert is_isomorphic(CYCLE, CYCLE)
        assert is_isomorphic(EDGE, digraph(2, (2, 1)))
        assert not is_isomorphic(EDGE, digraph(2))
        assert not is_isomorphic(EDGE, CYCLE)

    def test_brute_force(self) -> None:
        """Test the backtracking search against every bijection."""
        rng = np.random.default_rng(1)
        for _ in range(200):
            size = int(rng.integers(1, 5))
            m = random_structure(MIXED, size, rng, 0.4)
            if rng.random() < 0.5:
                n = m.relabel([int(a) + 1 for a in rng.permutation(size)])
            else:
                n = random_structure(MIXED, size, rng, 0.4)
            assert is_isomorphic(m, n) == brute_force_isomorphic(m, n)

    def test_automorphisms(self) -> None:
        """Test the automorphism probabilities."""
        assert automorphism_probability(digraph(3)) == 1
        assert automorphism_probability(EDGE) == Fraction(1, 2)
        assert automorphism_probability(CYCLE) == Fraction(1, 2)
        assert automorphism_count(CYCLE) == 3

    def test_automorphism_probability_is_tind(self) -> None:
        """Test that the automorphism probability is the self embedding density."""
        rng = np.random.default_rng(2)
        for _ in range(30):
            m = random_structure(MIXED, int(rng.integers(1, 5)), rng)
            assert automorphism_probability(m) == density_tind(m, m)


class TestDensities:
    """Test cases related to the densities."""

    def test_p(self) -> None:
        """Test the induced substructure density examples."""
        assert density_p(CYCLE, CYCLE) == 1
        assert density_p(EDGE, CYCLE) == 1
        assert density_p(digraph(4), CYCLE) == 0

    def test_t(self) -> None:
        """Test the homomorphism density examples."""
        assert density_t(EDGE, CYCLE) == Fraction(1, 3)
        assert density_t(digraph(0), digraph(0)) == 1
        assert density_t(EDGE, digraph(0)) == 0

    def test_t0_edgeless(self) -> None:
        """Test that an edgeless pattern maps everywhere."""
        assert density_t0(digraph(2), digraph(3)) == 1
        assert density_t0(digraph(4), digraph(3)) == 0

    def test_tind(self) -> None:
        """Test the embedding density examples."""
        assert density_tind(EDGE, CYCLE) == Fraction(1, 2)
        assert density_tind(CYCLE, CYCLE) == Fraction(1, 2)

    def test_signature_mismatch(self) -> None:
        """Test that densities need a shared language."""
        with pytest.raises(DomainError):
            density_p(Structure.empty(MIXED, 1), CYCLE)

    def test_p_times_tind(self) -> None:
        """Test that t_ind(M, N) = p(M, N) t_ind(M, M) exactly."""
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = random_structure(MIXED, int(rng.integers(1, 7)), rng)
            k = int(rng.integers(1, min(3, n.size) + 1))
            if rng.random() < 0.5:
                subset = sorted(int(a) + 1 for a in rng.choice(n.size, k, replace=False))
                m = induced_substructure(n, subset)
            else:
                m = random_structure(MIXED, k, rng)
            assert density_tind(m, n) == density_p(m, n) * density_tind(m, m)

    def test_t_t0_gap(self) -> None:
        """Test that |t - t0| is at most ‖M‖² / (2‖N‖)."""
        rng = np.random.default_rng(4)
        for _ in range(100):
            m = random_structure(MIXED, int(rng.integers(1, 4)), rng, 0.3)
            n = random_structure(MIXED, int(rng.integers(m.size, 7)), rng, 0.7)
            gap = abs(density_t(m, n) - density_t0(m, n))
            assert gap <= Fraction(m.size**2, 2 * n.size)

    def test_p_sums_to_one(self) -> None:
        """Test that the densities of all the types of a size sum to one."""
        rng = np.random.default_rng(5)
        n = random_structure(BINARY, 6, rng)
        for k in range(1, 4):
            total = sum(density_p(m, n) for m in isomorphism_types(BINARY, k))
            assert total == 1


class TestTypes:
    """Test cases related to the isomorphism types."""

    def test_counts(self) -> None:
        """Test the numbers of binary relations up to isomorphism."""
        assert [len(isomorphism_types(BINARY, k)) for k in range(4)] == [1, 2, 10, 104]

    def test_representatives(self) -> None:
        """Test that representatives are pairwise non-isomorphic."""
        types = isomorphism_types(MIXED, 2)
        for first, second in itertools.combinations(types, 2):
            assert not is_isomorphic(first, second)
        for i, m in enumerate(types):
            assert type_index(m) == i
            assert type_index(m.relabel([2, 1])) == i

    def test_census(self) -> None:
        """Test that the census agrees with the induced copies."""
        rng = np.random.default_rng(6)
        n = random_structure(BINARY, 7, rng)
        census = type_census(n, 3)
        assert sum(census) == math.comb(7, 3)
        for m, count in zip(isomorphism_types(BINARY, 3), census):
            assert count == sum(1 for _ in induced_copies(m, n))

    def test_budget(self) -> None:
        """Test that the type table refuses oversized enumerations."""
        with pytest.raises(ResourceError):
            isomorphism_types(BINARY, 4, budget=1000)

    def test_colex_order(self) -> None:
        """Test that copies are listed in colexicographic order."""
        n = digraph(4, (1, 2), (3, 4), (1, 4))
        assert list(induced_copies(EDGE, n)) == [(1, 2), (1, 4), (3, 4)]
