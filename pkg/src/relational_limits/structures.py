"""Finite relational structures, structure preserving maps and densities."""
import itertools
import logging
import math
from collections import Counter
from fractions import Fraction
from functools import lru_cache
from typing import FrozenSet
from typing import Iterable
from typing import Iterator
from typing import List
from typing import Mapping
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np
from pydantic import Field
from pydantic import NonNegativeInt
from pydantic import PositiveInt
from pydantic import field_validator
from pydantic import model_validator

from ._pydantic import FrozenModel
from .error import DomainError
from .error import ResourceError
from .utils import colex_combinations
from .utils import falling_factorial

logger = logging.getLogger(__name__)

Density = Fraction
RelationTuple = Tuple[int, ...]
Relation = FrozenSet[RelationTuple]
Map = Sequence[int]

TYPE_BUDGET = 10**7
"""Default work budget of the isomorphism type table."""

_CODE_PERMUTATION_LIMIT = math.factorial(7)


class RelationSymbol(FrozenModel):
    """A relation symbol with its arity."""

    name: str = Field(pattern=r"^[A-Za-z_][A-Za-z0-9_]*$")
    arity: PositiveInt

    def __str__(self) -> str:
        """Return the ``name/arity`` notation."""
        return f"{self.name}/{self.arity}"


class Signature(FrozenModel):
    """A finite relational language.

    The order of the symbols is significant: relations of a structure,
    index keys of its coding and file serializations all follow it.
    """

    symbols: Tuple[RelationSymbol, ...] = ()

    @field_validator("symbols")
    @classmethod
    def _validate_symbols(
        cls, value: Tuple[RelationSymbol, ...]
    ) -> Tuple[RelationSymbol, ...]:
        names = [symbol.name for symbol in value]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate relation symbols: {names}")
        return value

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[str, int]]) -> "Signature":
        """Build a signature from ``(name, arity)`` pairs.

        Parameters
        ----------
        pairs
            The relation symbols, in order.

        Returns
        -------
        Signature
            The validated signature.
        """
        return cls(
            symbols=tuple(RelationSymbol(name=name, arity=arity) for name, arity in pairs)
        )

    @property
    def n(self) -> int:
        """int: The number of relation symbols."""
        return len(self.symbols)

    @property
    def arities(self) -> Tuple[int, ...]:
        """tuple of int: The arity of each symbol."""
        return tuple(symbol.arity for symbol in self.symbols)

    @property
    def r_max(self) -> int:
        """int: The largest arity, zero for an empty language."""
        return max(self.arities, default=0)

    def index(self, name: str) -> int:
        """Return the position of a symbol.

        Raises
        ------
        DomainError
            If the symbol is unknown.
        """
        for i, symbol in enumerate(self.symbols):
            if symbol.name == name:
                return i
        raise DomainError(f"Unknown relation symbol: '{name}'")

    def __str__(self) -> str:
        """Return the symbols in ``name/arity`` notation."""
        return " ".join(str(symbol) for symbol in self.symbols)


class Structure(FrozenModel):
    """A finite structure over the universe ``[size]``.

    ``relations[i]`` is the set of tuples related by the ``i``-th symbol of
    the signature.
    """

    signature: Signature
    size: NonNegativeInt
    relations: Tuple[Relation, ...]

    @model_validator(mode="after")
    def _validate_relations(self) -> "Structure":
        if len(self.relations) != self.signature.n:
            raise ValueError(
                f"expected {self.signature.n} relations, got {len(self.relations)}"
            )
        for symbol, relation in zip(self.signature.symbols, self.relations):
            for tup in relation:
                if len(tup) != symbol.arity:
                    raise ValueError(f"{symbol} tuple {tup} has the wrong length")
                if not all(1 <= a <= self.size for a in tup):
                    raise ValueError(f"{symbol} tuple {tup} leaves [{self.size}]")
        return self

    @classmethod
    def from_tuples(
        cls,
        signature: Signature,
        size: int,
        relations: Optional[Mapping[str, Iterable[Sequence[int]]]] = None,
    ) -> "Structure":
        """Build a structure from tuples given per symbol name.

        Parameters
        ----------
        signature
            The language of the structure.
        size
            The universe is ``[size]``.
        relations
            Tuples per symbol name; missing symbols are empty.

        Returns
        -------
        Structure
            The validated structure.

        Raises
        ------
        DomainError
            If a symbol name is unknown.
        """
        relations = relations or {}
        for name in relations:
            signature.index(name)
        return cls(
            signature=signature,
            size=size,
            relations=tuple(
                frozenset(tuple(t) for t in relations.get(symbol.name, ()))
                for symbol in signature.symbols
            ),
        )

    @classmethod
    def empty(cls, signature: Signature, size: int) -> "Structure":
        """Return the structure on ``[size]`` with every relation empty."""
        return cls(
            signature=signature,
            size=size,
            relations=tuple(frozenset() for _ in signature.symbols),
        )

    @classmethod
    def trusted(
        cls, signature: Signature, size: int, relations: Iterable[Iterable[RelationTuple]]
    ) -> "Structure":
        """Build a structure from data already known to be valid.

        No validation takes place; this is for internal constructions.
        """
        return cls.model_construct(
            signature=signature,
            size=size,
            relations=tuple(frozenset(relation) for relation in relations),
        )

    def relation(self, name: str) -> Relation:
        """Return the tuples of a symbol given by name."""
        return self.relations[self.signature.index(name)]

    @property
    def tuple_count(self) -> int:
        """int: The total number of related tuples."""
        return sum(len(relation) for relation in self.relations)

    def relabel(self, permutation: Map) -> "Structure":
        """Return the image of the structure under a bijection of ``[size]``.

        ``permutation[a - 1]`` is the new label of element ``a``.

        Raises
        ------
        DomainError
            If the map is not a bijection of ``[size]``.
        """
        if sorted(permutation) != list(range(1, self.size + 1)):
            raise DomainError(f"Not a permutation of [{self.size}]: {permutation}")
        return Structure.trusted(
            self.signature,
            self.size,
            (
                {tuple(permutation[a - 1] for a in tup) for tup in relation}
                for relation in self.relations
            ),
        )


def check_same_signature(m: Structure, n: Structure) -> None:
    """Raise a domain error unless both structures share a signature."""
    if m.signature != n.signature:
        raise DomainError(f"Signature mismatch: '{m.signature}' and '{n.signature}'")


def _check_map(f: Map, m: Structure, n: Structure, injective: bool) -> None:
    if len(f) != m.size:
        raise DomainError(f"Map has {len(f)} images, expected {m.size}")
    if not all(1 <= b <= n.size for b in f):
        raise DomainError(f"Map {tuple(f)} leaves [{n.size}]")
    if injective and len(set(f)) != len(f):
        raise DomainError(f"Map {tuple(f)} is not injective")


def induced_substructure(n: Structure, subset: Iterable[int]) -> Structure:
    """Return the substructure induced on a subset of the universe.

    The subset is relabelled to ``[|A|]`` by its increasing enumeration.

    Parameters
    ----------
    n
        The ambient structure.
    subset
        A nonempty subset ``A`` of ``[size]``.

    Returns
    -------
    Structure
        The structure with relations ``R ∩ A^r``, relabelled.

    Raises
    ------
    DomainError
        If the subset is empty or leaves the universe.
    """
    elements = sorted(set(subset))
    if not elements:
        raise DomainError("Cannot induce a substructure on an empty subset")
    if elements[0] < 1 or elements[-1] > n.size:
        raise DomainError(f"Subset {elements} leaves [{n.size}]")
    label = {a: i + 1 for i, a in enumerate(elements)}
    return Structure.trusted(
        n.signature,
        len(elements),
        (
            {
                tuple(label[a] for a in tup)
                for tup in relation
                if all(a in label for a in tup)
            }
            for relation in n.relations
        ),
    )


def _maps_into(f: Map, m: Structure, n: Structure) -> bool:
    return all(
        tuple(f[a - 1] for a in tup) in target
        for source, target in zip(m.relations, n.relations)
        for tup in source
    )


def _embeds(f: Map, m: Structure, n: Structure) -> bool:
    image = set(f)
    for source, target in zip(m.relations, n.relations):
        mapped = {tuple(f[a - 1] for a in tup) for tup in source}
        inside = {tup for tup in target if all(b in image for b in tup)}
        if mapped != inside:
            return False
    return True


def is_homomorphism(f: Map, m: Structure, n: Structure) -> bool:
    """Check whether a map sends every related tuple of ``m`` into ``n``.

    ``f[a - 1]`` is the image of element ``a``.

    Raises
    ------
    DomainError
        If the signatures differ or the map is not total into ``[‖n‖]``.
    """
    check_same_signature(m, n)
    _check_map(f, m, n, injective=False)
    return _maps_into(f, m, n)


def is_embedding(f: Map, m: Structure, n: Structure) -> bool:
    """Check whether an injective map is an embedding of ``m`` into ``n``.

    A tuple over ``[‖m‖]`` is related in ``m`` exactly when its image is
    related in ``n``.

    Parameters
    ----------
    f
        The map, ``f[a - 1]`` being the image of element ``a``.
    m
        The source structure.
    n
        The target structure.

    Returns
    -------
    bool
        Is the map an embedding?

    Raises
    ------
    DomainError
        If the signatures differ or the map is not injective.
    """
    check_same_signature(m, n)
    _check_map(f, m, n, injective=True)
    return _embeds(f, m, n)


VertexInvariant = Tuple[Tuple[Tuple[int, Tuple[int, ...]], int], ...]


def _vertex_invariants(n: Structure) -> List[VertexInvariant]:
    counters: List[Counter] = [Counter() for _ in range(n.size + 1)]
    for i, relation in enumerate(n.relations):
        for tup in relation:
            for a in set(tup):
                positions = tuple(j for j, b in enumerate(tup) if b == a)
                counters[a][(i, positions)] += 1
    return [tuple(sorted(counter.items())) for counter in counters]


def _incidence(n: Structure) -> List[List[Tuple[int, RelationTuple]]]:
    incident: List[List[Tuple[int, RelationTuple]]] = [[] for _ in range(n.size + 1)]
    for i, relation in enumerate(n.relations):
        for tup in relation:
            for a in set(tup):
                incident[a].append((i, tup))
    return incident


def isomorphisms(m: Structure, n: Structure) -> Iterator[Tuple[int, ...]]:
    """Iterate the isomorphisms from ``m`` onto ``n``.

    The search assigns the elements of ``m`` in increasing order and prunes
    with vertex invariants and partial consistency in both directions.

    Raises
    ------
    DomainError
        If the signatures differ.
    """
    check_same_signature(m, n)
    if m.size != n.size:
        return
    if any(len(a) != len(b) for a, b in zip(m.relations, n.relations)):
        return
    size = m.size
    invariants_m = _vertex_invariants(m)
    invariants_n = _vertex_invariants(n)
    if sorted(invariants_m[1:]) != sorted(invariants_n[1:]):
        return

    candidates = [
        [w for w in range(1, size + 1) if invariants_n[w] == invariants_m[v]]
        for v in range(size + 1)
    ]
    closing: List[List[Tuple[int, RelationTuple]]] = [[] for _ in range(size + 1)]
    for i, relation in enumerate(m.relations):
        for tup in relation:
            closing[max(tup)].append((i, tup))
    incident_n = _incidence(n)

    image = [0] * (size + 1)
    preimage = [0] * (size + 1)

    def consistent(v: int, w: int) -> bool:
        for i, tup in closing[v]:
            if tuple(image[a] for a in tup) not in n.relations[i]:
                return False
        for i, tup in incident_n[w]:
            if all(preimage[b] for b in tup):
                if tuple(preimage[b] for b in tup) not in m.relations[i]:
                    return False
        return True

    def extend(v: int) -> Iterator[Tuple[int, ...]]:
        if v > size:
            yield tuple(image[1:])
            return
        for w in candidates[v]:
            if preimage[w]:
                continue
            image[v] = w
            preimage[w] = v
            if consistent(v, w):
                yield from extend(v + 1)
            preimage[w] = 0
            image[v] = 0

    yield from extend(1)


def is_isomorphic(m: Structure, n: Structure) -> bool:
    """Check whether two structures are isomorphic.

    Raises
    ------
    DomainError
        If the signatures differ.
    """
    return next(isomorphisms(m, n), None) is not None


def automorphism_count(m: Structure) -> int:
    """Return the number of automorphisms of a structure."""
    return sum(1 for _ in isomorphisms(m, m))


def automorphism_probability(m: Structure) -> Density:
    """Return the probability that a random permutation is an automorphism.

    This is ``|Aut(m)| / ‖m‖!``, which equals ``density_tind(m, m)``.
    """
    return Fraction(automorphism_count(m), math.factorial(m.size))


def _code_layout(signature: Signature, k: int) -> Tuple[Tuple[int, ...], int]:
    offsets = []
    bits = 0
    for arity in signature.arities:
        offsets.append(bits)
        bits += k**arity
    return tuple(offsets), bits


def _tuple_position(tup: Sequence[int], k: int) -> int:
    position = 0
    for a in tup:
        position = position * k + a - 1
    return position


def structure_code(m: Structure) -> int:
    """Return the bit code of a structure.

    Bit ``offset_i + position(t)`` is set when ``t`` is related by symbol
    ``i``, where positions enumerate ``[‖m‖]^{r_i}`` lexicographically.
    """
    offsets, _ = _code_layout(m.signature, m.size)
    code = 0
    for offset, relation in zip(offsets, m.relations):
        for tup in relation:
            code |= 1 << (offset + _tuple_position(tup, m.size))
    return code


def _structure_from_code(signature: Signature, k: int, code: int) -> Structure:
    offsets, _ = _code_layout(signature, k)
    relations = []
    for offset, arity in zip(offsets, signature.arities):
        relations.append(
            {
                tup
                for position, tup in enumerate(
                    itertools.product(range(1, k + 1), repeat=arity)
                )
                if code >> (offset + position) & 1
            }
        )
    return Structure.trusted(signature, k, relations)


def _subset_code(n: Structure, subset: Sequence[int], offsets: Sequence[int]) -> int:
    code = 0
    for offset, arity, relation in zip(offsets, n.signature.arities, n.relations):
        if not relation:
            continue
        for position, tup in enumerate(itertools.product(subset, repeat=arity)):
            if tup in relation:
                code |= 1 << (offset + position)
    return code


def _relabelled_codes(m: Structure) -> FrozenSet[int]:
    return frozenset(
        structure_code(m.relabel(permutation))
        for permutation in itertools.permutations(range(1, m.size + 1))
    )


def induced_copies(m: Structure, n: Structure) -> Iterator[Tuple[int, ...]]:
    """Iterate the ``‖m‖``-subsets of ``[‖n‖]`` inducing a copy of ``m``.

    Subsets are yielded as increasing tuples in colexicographic order.

    Raises
    ------
    DomainError
        If the signatures differ.
    """
    check_same_signature(m, n)
    k = m.size
    if k > n.size:
        return
    if math.factorial(k) > _CODE_PERMUTATION_LIMIT:
        for subset in colex_combinations(n.size, k):
            if is_isomorphic(induced_substructure(n, subset), m):
                yield subset
        return
    codes = _relabelled_codes(m)
    offsets, _ = _code_layout(n.signature, k)
    for subset in colex_combinations(n.size, k):
        if _subset_code(n, subset, offsets) in codes:
            yield subset


def density_p(m: Structure, n: Structure) -> Density:
    """Return the induced substructure density ``p(m, n)``.

    This is the probability that a uniformly random ``‖m‖``-subset of
    ``[‖n‖]`` induces a copy of ``m``; zero when ``‖n‖ < ‖m‖``.

    Raises
    ------
    DomainError
        If the signatures differ.
    """
    check_same_signature(m, n)
    if n.size < m.size:
        return Fraction(0)
    copies = sum(1 for _ in induced_copies(m, n))
    return Fraction(copies, math.comb(n.size, m.size))


def density_t(m: Structure, n: Structure) -> Density:
    """Return the homomorphism density ``t(m, n)``.

    The denominator is ``‖n‖^‖m‖``; an empty target gives zero unless
    ``m`` is empty too.
    """
    check_same_signature(m, n)
    if m.size == 0:
        return Fraction(1)
    if n.size == 0:
        return Fraction(0)
    count = sum(
        1
        for f in itertools.product(range(1, n.size + 1), repeat=m.size)
        if _maps_into(f, m, n)
    )
    return Fraction(count, n.size**m.size)


def density_t0(m: Structure, n: Structure) -> Density:
    """Return the injective homomorphism density ``t0(m, n)``.

    Zero when ``‖n‖ < ‖m‖``.
    """
    check_same_signature(m, n)
    if n.size < m.size:
        return Fraction(0)
    count = sum(
        1
        for f in itertools.permutations(range(1, n.size + 1), m.size)
        if _maps_into(f, m, n)
    )
    return Fraction(count, falling_factorial(n.size, m.size))


def density_tind(m: Structure, n: Structure) -> Density:
    """Return the embedding density ``t_ind(m, n)``.

    Zero when ``‖n‖ < ‖m‖``.
    """
    check_same_signature(m, n)
    if n.size < m.size:
        return Fraction(0)
    count = sum(
        1
        for f in itertools.permutations(range(1, n.size + 1), m.size)
        if _embeds(f, m, n)
    )
    return Fraction(count, falling_factorial(n.size, m.size))


DENSITY_FUNCTIONS = {
    "p": density_p,
    "t": density_t,
    "t0": density_t0,
    "tind": density_tind,
}


def _permute_code(code: int, mapping: Sequence[int]) -> int:
    result = 0
    while code:
        low = code & -code
        result |= 1 << mapping[low.bit_length() - 1]
        code ^= low
    return result


@lru_cache(maxsize=None)
def _type_table(
    signature: Signature, k: int, budget: int
) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    offsets, bits = _code_layout(signature, k)
    work = (1 << bits) * math.factorial(k)
    if work > budget:
        raise ResourceError(f"isomorphism types of size {k} over '{signature}'", work, budget)

    mappings = []
    for permutation in itertools.permutations(range(1, k + 1)):
        mapping = [0] * bits
        for offset, arity in zip(offsets, signature.arities):
            for position, tup in enumerate(itertools.product(range(1, k + 1), repeat=arity)):
                image = tuple(permutation[a - 1] for a in tup)
                mapping[offset + position] = offset + _tuple_position(image, k)
        mappings.append(mapping)

    type_of = [-1] * (1 << bits)
    representatives: List[int] = []
    for code in range(1 << bits):
        if type_of[code] >= 0:
            continue
        for mapping in mappings:
            type_of[_permute_code(code, mapping)] = len(representatives)
        representatives.append(code)
    logger.debug(
        "%d isomorphism types of size %d over '%s'", len(representatives), k, signature
    )
    return tuple(type_of), tuple(representatives)


def isomorphism_types(
    signature: Signature, k: int, budget: int = TYPE_BUDGET
) -> List[Structure]:
    """Return one representative per isomorphism class of structures on ``[k]``.

    Representatives are the structures of least bit code in their class,
    listed by increasing code.

    Parameters
    ----------
    signature
        The language.
    k
        The universe size.
    budget
        Maximum work (codes times permutations) allowed.

    Returns
    -------
    list of Structure
        The isomorphism class representatives.

    Raises
    ------
    ResourceError
        If the enumeration exceeds the budget.
    """
    _, representatives = _type_table(signature, k, budget)
    return [_structure_from_code(signature, k, code) for code in representatives]


def type_index(m: Structure, budget: int = TYPE_BUDGET) -> int:
    """Return the position of the isomorphism type of ``m`` in ``isomorphism_types``."""
    type_of, _ = _type_table(m.signature, m.size, budget)
    return type_of[structure_code(m)]


def type_census(n: Structure, k: int, budget: int = TYPE_BUDGET) -> List[int]:
    """Count the ``k``-subsets of ``n`` inducing each isomorphism type.

    The counts are aligned with ``isomorphism_types(n.signature, k)``;
    dividing by ``C(‖n‖, k)`` gives every ``p(M, n)`` with ``‖M‖ = k``.
    """
    type_of, representatives = _type_table(n.signature, k, budget)
    offsets, _ = _code_layout(n.signature, k)
    counts = [0] * len(representatives)
    for subset in itertools.combinations(range(1, n.size + 1), k):
        counts[type_of[_subset_code(n, subset, offsets)]] += 1
    return counts


def random_structure(
    signature: Signature, size: int, rng: np.random.Generator, density: float = 0.5
) -> Structure:
    """Draw a structure whose tuples are related independently.

    Parameters
    ----------
    signature
        The language.
    size
        The universe size.
    rng
        The random source.
    density
        The probability that each tuple is related.

    Returns
    -------
    Structure
        The random structure.
    """
    relations: List[List[RelationTuple]] = []
    for arity in signature.arities:
        tuples = list(itertools.product(range(1, size + 1), repeat=arity))
        keep = rng.random(len(tuples)) < density
        relations.append([tup for tup, kept in zip(tuples, keep) if kept])
    return Structure.trusted(signature, size, relations)
