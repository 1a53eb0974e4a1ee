"""Finite hyperpartitions and the cells they cut out of tuple spaces."""
import itertools
import logging
import math
from fractions import Fraction
from typing import Dict
from typing import FrozenSet
from typing import Sequence
from typing import Set
from typing import Tuple

import numpy as np
from pydantic import NonNegativeInt
from pydantic import PositiveInt
from pydantic import model_validator

from ._pydantic import FrozenModel
from .coding import DHypFamily
from .coding import Edge
from .coding import IndexKey
from .coding import decode
from .error import DomainError
from .limit import CellSignature
from .limit import SeedTuple
from .limit import StepLimit
from .limit import SubsetIndex
from .limit import cell_components
from .limit import interval_of
from .structures import Density
from .structures import Structure

logger = logging.getLogger(__name__)


class Hyperpartition(FrozenModel):
    """A coloring in ``[resolution]`` of the subsets of ``[ground]`` of size at most ``t``.

    ``colors`` follows the order of ``SubsetIndex(ground, t).subsets``; the
    sets of a level ``j`` with color ``e`` form the class ``H^j_e``.
    """

    ground: NonNegativeInt
    t: PositiveInt
    resolution: PositiveInt
    colors: Tuple[int, ...]

    @model_validator(mode="after")
    def _validate_colors(self) -> "Hyperpartition":
        if len(self.colors) != self.index.count:
            raise ValueError(f"expected {self.index.count} colors, got {len(self.colors)}")
        if not all(1 <= c <= self.resolution for c in self.colors):
            raise ValueError(f"colors must lie in [{self.resolution}]")
        return self

    @property
    def index(self) -> SubsetIndex:
        """SubsetIndex: The colored subsets."""
        return SubsetIndex(ground=self.ground, cap=self.t)

    def color(self, subset: Sequence[int]) -> int:
        """Return the color of a set given by its elements."""
        return self.colors[self.index.position(tuple(sorted(subset)))]

    def class_sizes(self, j: int) -> Tuple[int, ...]:
        """Return ``|H^j_e|`` for every color ``e``."""
        sizes = [0] * self.resolution
        for subset, c in zip(self.index.subsets, self.colors):
            if len(subset) == j:
                sizes[c - 1] += 1
        return tuple(sizes)


def cell_signature(h: Hyperpartition, x: Sequence[int]) -> CellSignature:
    """Return the colors of the sets ``{x_i : i in A}`` for the nonempty ``A``.

    Components follow ``cell_components(len(x))``.

    Raises
    ------
    DomainError
        If the tuple is empty, longer than ``t``, repeats an entry or
        leaves ``[ground]``.
    """
    u = len(x)
    if not 1 <= u <= h.t:
        raise DomainError(f"Tuple {tuple(x)} should have between 1 and {h.t} entries")
    if len(set(x)) != u:
        raise DomainError(f"Tuple {tuple(x)} repeats an entry")
    if not all(1 <= a <= h.ground for a in x):
        raise DomainError(f"Tuple {tuple(x)} leaves [{h.ground}]")
    return tuple(h.color([x[j] for j in component]) for component in cell_components(u))


def _cell_table(h: Hyperpartition, u: int) -> Dict[CellSignature, FrozenSet[Edge]]:
    table: Dict[CellSignature, Set[Edge]] = {}
    for x in itertools.permutations(range(1, h.ground + 1), u):
        table.setdefault(cell_signature(h, x), set()).add(x)
    return {e: frozenset(cell) for e, cell in table.items()}


def _components_count(e: CellSignature) -> int:
    u = (len(e) + 1).bit_length() - 1
    if u < 1 or (1 << u) - 1 != len(e):
        raise DomainError(f"Cell signature {e} does not color the subsets of any [u]")
    return u


def cell(h: Hyperpartition, e: CellSignature) -> FrozenSet[Edge]:
    """Return the distinct-entry tuples whose cell signature is ``e``.

    The length of ``e`` is ``2^u - 1`` for the tuple length ``u``.
    """
    u = _components_count(e)
    if u > h.t:
        raise DomainError(f"Cell signature {e} needs levels up to {u}, only {h.t} are colored")
    return _cell_table(h, u).get(tuple(e), frozenset())


def equitability_delta(h: Hyperpartition) -> Density:
    """Return the least ``δ`` bounding the spread of class measures at each level.

    The measure of the class of color ``e`` at level ``j`` is
    ``j! |H^j_e| / N^j``, the share of ``[N]^j`` taken by tuples whose
    underlying set has color ``e``. The spread is the largest difference
    between two colors of one level.
    """
    delta = Fraction(0)
    for j in range(1, min(h.t, h.ground) + 1):
        sizes = h.class_sizes(j)
        scale = Fraction(math.factorial(j), h.ground**j)
        delta = max(delta, (max(sizes) - min(sizes)) * scale)
    return delta


def hyperpartition_from_seed(seed: SeedTuple, resolution: int) -> Hyperpartition:
    """Color each subset ``S`` by ``interval_of(y_S, resolution)``.

    The levels colored are those of the seed index.

    Raises
    ------
    DomainError
        If the seed indexes no level.
    """
    if seed.index.cap < 1:
        raise DomainError("Seed indexes no subset level")
    return Hyperpartition.model_construct(
        ground=seed.index.ground,
        t=seed.index.cap,
        resolution=resolution,
        colors=tuple(interval_of(y, resolution) for y in seed.values),
    )


def step_structure(h: Hyperpartition, limit: StepLimit) -> Structure:
    """Return the structure coded by the union of the selected cells.

    The edge set of every index key ``(i, p)`` is the union of
    ``cell(h, e)`` over the cell signatures ``e`` the limit selects.

    Raises
    ------
    DomainError
        If the resolutions differ or the hyperpartition misses a level.
    """
    if h.resolution != limit.resolution:
        raise DomainError(
            f"Resolution mismatch: hyperpartition {h.resolution}, limit {limit.resolution}"
        )
    if h.t < limit.signature.r_max and h.ground > h.t:
        raise DomainError(
            f"Hyperpartition colors levels up to {h.t}, "
            f"arity {limit.signature.r_max} is needed"
        )
    tables: Dict[int, Dict[CellSignature, FrozenSet[Edge]]] = {}
    edges: Dict[IndexKey, FrozenSet[Edge]] = {}
    for key, selected in limit.cells.items():
        u = key.partition.size
        if u > h.ground:
            continue
        if u not in tables:
            tables[u] = _cell_table(h, u)
        union: Set[Edge] = set()
        for e in selected:
            union.update(tables[u].get(e, ()))
        edges[key] = frozenset(union)
    return decode(DHypFamily.model_construct(signature=limit.signature, size=h.ground, edges=edges))


def seed_in_cube(h: Hyperpartition, rng: np.random.Generator) -> SeedTuple:
    """Draw a uniform seed from the cube of the coloring.

    The value of a subset of color ``c`` falls in ``[(c - 1)/l, c/l)``, so
    realizing any step limit of resolution ``l`` from the seed gives
    ``step_structure(h, limit)``.
    """
    offsets = rng.random(len(h.colors))
    values = tuple(
        _inside(float((c - 1 + u) / h.resolution), c, h.resolution)
        for c, u in zip(h.colors, offsets)
    )
    return SeedTuple.model_construct(index=h.index, values=values)


def _inside(y: float, c: int, resolution: int) -> float:
    # Rounding may push y across an interval bound.
    while interval_of(y, resolution) > c:
        y = float(np.nextafter(y, 0.0))
    while interval_of(y, resolution) < c:
        y = float(np.nextafter(y, 1.0))
    return y
