"""Coding of relations into families of uniform directed hypergraphs.

A tuple ``x`` of a ``t``-ary relation is filed under the partition of
``[t]`` induced by its equal entries, and stored with its repeated entries
removed. The family of these distinct-entry tuple sets, indexed by
``(symbol, partition)`` pairs, determines the structure.
"""
import logging
from functools import lru_cache
from typing import Dict
from typing import FrozenSet
from typing import Iterator
from typing import List
from typing import Sequence
from typing import Set
from typing import Tuple

from pydantic import Field
from pydantic import NonNegativeInt
from pydantic import field_validator
from pydantic import model_validator

from ._pydantic import FrozenModel
from .error import DomainError
from .error import FormatError
from .structures import RelationTuple
from .structures import Signature
from .structures import Structure

logger = logging.getLogger(__name__)

Edge = Tuple[int, ...]


class SetPartition(FrozenModel):
    """A partition of ``[t]`` stored as its restricted growth string.

    ``rgs[j - 1]`` is the zero-based class of ``j``; classes are therefore
    numbered by increasing minimum.
    """

    rgs: Tuple[NonNegativeInt, ...] = Field(min_length=1)

    @field_validator("rgs")
    @classmethod
    def _validate_rgs(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        top = -1
        for label in value:
            if label > top + 1:
                raise ValueError(f"not a restricted growth string: {value}")
            top = max(top, label)
        return value

    @classmethod
    def parse(cls, text: str) -> "SetPartition":
        """Parse the block notation, for example ``1,2|3``.

        Raises
        ------
        DomainError
            If the blocks do not partition ``[t]``.
        """
        try:
            blocks = [[int(a) for a in block.split(",")] for block in text.split("|")]
        except ValueError as exc:
            raise DomainError(f"Invalid partition: '{text}'") from exc
        elements = sorted(a for block in blocks for a in block)
        if elements != list(range(1, len(elements) + 1)):
            raise DomainError(f"Invalid partition of [{len(elements)}]: '{text}'")
        label_of = {}
        for label, block in enumerate(sorted(blocks, key=min)):
            for a in block:
                label_of[a] = label
        return _partition(tuple(label_of[a] for a in range(1, len(elements) + 1)))

    @property
    def t(self) -> int:
        """int: The size of the partitioned set."""
        return len(self.rgs)

    @property
    def size(self) -> int:
        """int: The number of classes ``‖p‖``."""
        return max(self.rgs) + 1

    @property
    def classes(self) -> Tuple[Tuple[int, ...], ...]:
        """tuple of tuple of int: The classes, ordered by their minimum."""
        return tuple(
            tuple(j + 1 for j, label in enumerate(self.rgs) if label == c)
            for c in range(self.size)
        )

    def expand(self, edge: Sequence[int]) -> RelationTuple:
        """Expand a ``‖p‖``-tuple to the ``t``-tuple it codes."""
        return tuple(edge[label] for label in self.rgs)

    def __str__(self) -> str:
        """Return the block notation."""
        return "|".join(",".join(str(j) for j in block) for block in self.classes)


@lru_cache(maxsize=None)
def _partition(rgs: Tuple[int, ...]) -> SetPartition:
    return SetPartition.model_construct(rgs=rgs)


def _growth_strings(t: int) -> Iterator[Tuple[int, ...]]:
    def extend(prefix: Tuple[int, ...], top: int) -> Iterator[Tuple[int, ...]]:
        if len(prefix) == t:
            yield prefix
            return
        for label in range(top + 2):
            yield from extend((*prefix, label), max(top, label))

    yield from extend((0,), 0)


@lru_cache(maxsize=None)
def _partitions(t: int) -> Tuple[SetPartition, ...]:
    return tuple(_partition(rgs) for rgs in _growth_strings(t))


def partitions_of(t: int) -> List[SetPartition]:
    """Return all the partitions of ``[t]``.

    Partitions are listed by lexicographic order of their restricted growth
    strings, so ``{{1, ..., t}}`` comes first and the discrete partition last.

    Parameters
    ----------
    t
        A positive integer.

    Returns
    -------
    list of SetPartition
        The ``Bell(t)`` partitions.

    Raises
    ------
    DomainError
        If ``t`` is not positive.
    """
    if t < 1:
        raise DomainError(f"Cannot partition [{t}]")
    return list(_partitions(t))


def induced_partition(x: Sequence[int]) -> SetPartition:
    """Return the partition of positions induced by equal entries of a tuple.

    Raises
    ------
    DomainError
        If the tuple is empty.
    """
    if not x:
        raise DomainError("Cannot induce a partition from an empty tuple")
    labels: Dict[int, int] = {}
    return _partition(tuple(labels.setdefault(a, len(labels)) for a in x))


def dedup(x: Sequence[int]) -> Edge:
    """Return the first occurrences of the entries of a tuple, in order.

    Raises
    ------
    DomainError
        If the tuple is empty.
    """
    if not x:
        raise DomainError("Cannot deduplicate an empty tuple")
    return tuple(dict.fromkeys(x))


class IndexKey(FrozenModel):
    """A ``(symbol, partition)`` index of a coded family.

    ``symbol`` is the zero-based position of the symbol in its signature.
    """

    symbol: NonNegativeInt
    partition: SetPartition

    @property
    def sort_key(self) -> Tuple[int, Tuple[int, ...]]:
        """tuple: Key of the deterministic key order."""
        return self.symbol, self.partition.rgs

    def label(self, signature: Signature) -> str:
        """Return a readable ``name:partition`` label."""
        return f"{signature.symbols[self.symbol].name}:{self.partition}"


@lru_cache(maxsize=None)
def _key(symbol: int, rgs: Tuple[int, ...]) -> IndexKey:
    return IndexKey.model_construct(symbol=symbol, partition=_partition(rgs))


def index_key(symbol: int, partition: SetPartition) -> IndexKey:
    """Return the index key of a symbol position and a partition."""
    return _key(symbol, partition.rgs)


def index_keys(signature: Signature) -> List[IndexKey]:
    """Return every index key of a signature in deterministic order.

    Keys follow the symbol order, then the partition order of
    ``partitions_of``.
    """
    return [
        _key(i, partition.rgs)
        for i, arity in enumerate(signature.arities)
        for partition in partitions_of(arity)
    ]


class DHypFamily(FrozenModel):
    """A family of directed hypergraphs indexed by ``(symbol, partition)``.

    Only nonempty edge sets are stored; a missing key has no edge.
    """

    signature: Signature
    size: NonNegativeInt
    edges: Dict[IndexKey, FrozenSet[Edge]] = {}  # noqa: RUF012

    @field_validator("edges")
    @classmethod
    def _drop_empty(
        cls, value: Dict[IndexKey, FrozenSet[Edge]]
    ) -> Dict[IndexKey, FrozenSet[Edge]]:
        return {key: edges for key, edges in value.items() if edges}

    @model_validator(mode="after")
    def _validate_keys(self) -> "DHypFamily":
        for key, edges in self.edges.items():
            if key.symbol >= self.signature.n:
                raise ValueError(f"no symbol at position {key.symbol}")
            if key.partition.t != self.signature.arities[key.symbol]:
                raise ValueError(f"partition {key.partition} does not fit the arity")
            for edge in edges:
                if len(edge) != key.partition.size:
                    raise ValueError(f"edge {edge} under {key.partition} has the wrong length")
        return self

    def edges_of(self, key: IndexKey) -> FrozenSet[Edge]:
        """Return the edge set of a key, empty when missing."""
        return self.edges.get(key, frozenset())

    def keys(self) -> List[IndexKey]:
        """Return every index key of the signature, stored or not."""
        return index_keys(self.signature)

    @property
    def edge_count(self) -> int:
        """int: The total number of edges."""
        return sum(len(edges) for edges in self.edges.values())


def encode(n: Structure) -> DHypFamily:
    """Return the coded family of a structure.

    The key ``(i, p)`` holds ``dedup(x)`` for each tuple ``x`` related by
    symbol ``i`` whose induced partition is ``p``.
    """
    edges: Dict[IndexKey, Set[Edge]] = {}
    for i, relation in enumerate(n.relations):
        for tup in relation:
            key = _key(i, induced_partition(tup).rgs)
            edges.setdefault(key, set()).add(dedup(tup))
    return DHypFamily.model_construct(
        signature=n.signature,
        size=n.size,
        edges={key: frozenset(value) for key, value in edges.items()},
    )


def decode(family: DHypFamily) -> Structure:
    """Return the unique structure coded by a family.

    Raises
    ------
    FormatError
        If an edge repeats an entry or leaves the universe.
    """
    relations: List[Set[RelationTuple]] = [set() for _ in family.signature.symbols]
    for key, edges in family.edges.items():
        label = key.label(family.signature)
        for edge in edges:
            if len(set(edge)) != len(edge):
                raise FormatError(f"edge {edge} of {label} repeats an entry")
            if not all(1 <= b <= family.size for b in edge):
                raise FormatError(f"edge {edge} of {label} leaves [{family.size}]")
            relations[key.symbol].add(key.partition.expand(edge))
    return Structure.trusted(family.signature, family.size, relations)
