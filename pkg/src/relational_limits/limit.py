"""Step limits, the random structures they generate and their exact densities.

A step limit selects, for every index key ``(i, p)`` with ``t = ‖p‖``, a
set of cell signatures: colorings in ``[l]`` of the nonempty subsets of
``[t]``. A structure on ``[m]`` is realized from one seed value per small
subset of ``[m]``: a distinct-entry tuple ``b`` is an edge under ``(i, p)``
when the colors of the seed values of ``{b_j : j in B}``, for ``B`` running
over the nonempty subsets of ``[t]``, form a selected signature.
"""
import itertools
import logging
import math
from fractions import Fraction
from functools import lru_cache
from typing import Callable
from typing import Dict
from typing import FrozenSet
from typing import Iterable
from typing import List
from typing import Sequence
from typing import Set
from typing import Tuple

import numpy as np
from pydantic import Field
from pydantic import NonNegativeInt
from pydantic import PositiveInt
from pydantic import field_validator
from pydantic import model_validator

from ._pydantic import FrozenModel
from ._pydantic import UseDefaultValueModel
from .coding import DHypFamily
from .coding import Edge
from .coding import IndexKey
from .coding import decode
from .coding import encode
from .coding import index_key
from .coding import index_keys
from .coding import partitions_of
from .error import DomainError
from .error import ResourceError
from .structures import TYPE_BUDGET
from .structures import Density
from .structures import Signature
from .structures import Structure
from .structures import automorphism_count
from .structures import isomorphism_types
from .structures import type_census
from .utils import falling_factorial

logger = logging.getLogger(__name__)

CellSignature = Tuple[int, ...]
Subset = Tuple[int, ...]

COLORING_BUDGET = 10**8
"""Default maximum number of colorings enumerated by ``embedding_measure``."""

_CHUNK = 1 << 16


@lru_cache(maxsize=None)
def cell_components(t: int) -> Tuple[Subset, ...]:
    """Return the nonempty subsets of ``[t]`` in cell signature order.

    Subsets are zero-based position tuples ordered by size, then
    lexicographically; component ``j`` of a cell signature is the color of
    the ``j``-th subset.
    """
    return tuple(
        subset
        for size in range(1, t + 1)
        for subset in itertools.combinations(range(t), size)
    )


@lru_cache(maxsize=None)
def _subsets(ground: int, cap: int) -> Tuple[Subset, ...]:
    return tuple(
        subset
        for size in range(1, min(ground, cap) + 1)
        for subset in itertools.combinations(range(1, ground + 1), size)
    )


@lru_cache(maxsize=None)
def _positions(ground: int, cap: int) -> Dict[Subset, int]:
    return {subset: i for i, subset in enumerate(_subsets(ground, cap))}


class SubsetIndex(FrozenModel):
    """The nonempty subsets of ``[ground]`` with at most ``cap`` elements.

    Subsets are increasing tuples, ordered by size then lexicographically.
    """

    ground: NonNegativeInt
    cap: NonNegativeInt

    @property
    def subsets(self) -> Tuple[Subset, ...]:
        """tuple of tuple of int: The subsets, in index order."""
        return _subsets(self.ground, self.cap)

    @property
    def count(self) -> int:
        """int: The number of subsets."""
        return len(self.subsets)

    def position(self, subset: Subset) -> int:
        """Return the position of an increasing tuple in the index."""
        try:
            return _positions(self.ground, self.cap)[subset]
        except KeyError as exc:
            raise DomainError(f"Subset {subset} is not indexed") from exc


class SeedTuple(FrozenModel):
    """One real value in ``[0, 1]`` per subset of a ``SubsetIndex``."""

    index: SubsetIndex
    values: Tuple[float, ...]

    @model_validator(mode="after")
    def _validate_values(self) -> "SeedTuple":
        if len(self.values) != self.index.count:
            raise ValueError(f"expected {self.index.count} values, got {len(self.values)}")
        if not all(0.0 <= y <= 1.0 for y in self.values):
            raise ValueError("seed values must lie in [0, 1]")
        return self

    def value(self, subset: Subset) -> float:
        """Return the value of an increasing tuple."""
        return self.values[self.index.position(subset)]

    def relabel(self, permutation: Sequence[int]) -> "SeedTuple":
        """Move the value of each subset ``S`` to its image ``π(S)``.

        Realizing the relabelled seed gives the relabelled structure.
        """
        if sorted(permutation) != list(range(1, self.index.ground + 1)):
            raise DomainError(f"Not a permutation of [{self.index.ground}]: {permutation}")
        values = [0.0] * self.index.count
        for subset, y in zip(self.index.subsets, self.values):
            image = tuple(sorted(permutation[a - 1] for a in subset))
            values[self.index.position(image)] = y
        return SeedTuple.model_construct(index=self.index, values=tuple(values))


def interval_of(y: float, resolution: int) -> int:
    """Return the color ``a`` of the interval of ``[0, 1]`` containing ``y``.

    Intervals are ``[(a - 1)/l, a/l)`` except the last one, ``[(l - 1)/l, 1]``.
    The comparison is exact.

    Raises
    ------
    DomainError
        If ``y`` is outside ``[0, 1]`` or the resolution is not positive.
    """
    if resolution < 1:
        raise DomainError(f"Invalid resolution: {resolution}")
    if not 0 <= y <= 1:
        raise DomainError(f"Value {y} is outside [0, 1]")
    return min(math.floor(Fraction(y) * resolution) + 1, resolution)


def _signature_length(t: int) -> int:
    return (1 << t) - 1


class StepLimit(FrozenModel):
    """A limit object given as unions of resolution ``l`` hypercubes.

    ``cells[key]`` holds the selected cell signatures of an index key;
    missing keys select nothing.
    """

    signature: Signature
    resolution: PositiveInt
    cells: Dict[IndexKey, FrozenSet[CellSignature]] = {}  # noqa: RUF012

    @field_validator("cells")
    @classmethod
    def _drop_empty(
        cls, value: Dict[IndexKey, FrozenSet[CellSignature]]
    ) -> Dict[IndexKey, FrozenSet[CellSignature]]:
        return {key: cells for key, cells in value.items() if cells}

    @model_validator(mode="after")
    def _validate_cells(self) -> "StepLimit":
        for key, cells in self.cells.items():
            if key.symbol >= self.signature.n:
                raise ValueError(f"no symbol at position {key.symbol}")
            if key.partition.t != self.signature.arities[key.symbol]:
                raise ValueError(f"partition {key.partition} does not fit the arity")
            length = _signature_length(key.partition.size)
            for cell in cells:
                if len(cell) != length:
                    raise ValueError(f"cell {cell} should have {length} colors")
                if not all(1 <= c <= self.resolution for c in cell):
                    raise ValueError(f"cell {cell} has colors outside [{self.resolution}]")
        return self

    @classmethod
    def full(cls, signature: Signature, resolution: int = 1) -> "StepLimit":
        """Return the limit selecting every cell, which realizes complete structures."""
        return cls(
            signature=signature,
            resolution=resolution,
            cells={key: _all_cells(key, resolution) for key in index_keys(signature)},
        )

    @classmethod
    def empty(cls, signature: Signature, resolution: int = 1) -> "StepLimit":
        """Return the limit selecting nothing, which realizes empty structures."""
        return cls(signature=signature, resolution=resolution)

    def cells_of(self, key: IndexKey) -> FrozenSet[CellSignature]:
        """Return the selected cells of a key, empty when missing."""
        return self.cells.get(key, frozenset())

    def measure(self, key: IndexKey) -> Density:
        """Return the Lebesgue measure of the set selected for a key."""
        length = _signature_length(key.partition.size)
        return Fraction(len(self.cells_of(key)), self.resolution**length)


def _all_cells(key: IndexKey, resolution: int) -> FrozenSet[CellSignature]:
    length = _signature_length(key.partition.size)
    return frozenset(itertools.product(range(1, resolution + 1), repeat=length))


def random_step_limit(
    signature: Signature, resolution: int, rng: np.random.Generator, fill: float = 0.5
) -> StepLimit:
    """Draw a step limit selecting each cell independently.

    Parameters
    ----------
    signature
        The language.
    resolution
        The resolution ``l``.
    rng
        The random source.
    fill
        The probability of selecting each cell.

    Returns
    -------
    StepLimit
        The random limit.
    """
    cells = {}
    for key in index_keys(signature):
        candidates = sorted(_all_cells(key, resolution))
        keep = rng.random(len(candidates)) < fill
        cells[key] = frozenset(cell for cell, kept in zip(candidates, keep) if kept)
    return StepLimit(signature=signature, resolution=resolution, cells=cells)


def step_graphon(
    weights: Sequence[Sequence[int]], name: str = "E"
) -> StepLimit:
    """Return the loop-free symmetric binary step limit of a block weight table.

    With ``l = len(weights)``, elements get a block from the color of their
    own seed value, and ``a ~ b`` when the color of the pair value is at most
    ``weights[block(a)][block(b)]``; blocks are joined with probability
    ``weights / l``.

    Raises
    ------
    DomainError
        If the table is not square, symmetric, with entries in ``[0, l]``.
    """
    table = np.asarray(weights, dtype=int)
    resolution = len(table)
    if table.shape != (resolution, resolution) or resolution < 1:
        raise DomainError(f"Weight table must be square, got shape {table.shape}")
    if not np.array_equal(table, table.T):
        raise DomainError("Weight table must be symmetric")
    if table.min() < 0 or table.max() > resolution:
        raise DomainError(f"Weights must lie in [0, {resolution}]")
    signature = Signature.from_pairs([(name, 2)])
    discrete = index_key(0, partitions_of(2)[1])
    cells = frozenset(
        (a, b, c)
        for a in range(1, resolution + 1)
        for b in range(1, resolution + 1)
        for c in range(1, table[a - 1][b - 1] + 1)
    )
    return StepLimit(signature=signature, resolution=resolution, cells={discrete: cells})


def refine(limit: StepLimit, factor: int) -> StepLimit:
    """Return the same limit at resolution ``l * factor``.

    Color ``c`` at resolution ``l`` splits into colors
    ``(c - 1) * factor + 1 .. c * factor``.
    """
    if factor < 1:
        raise DomainError(f"Invalid refinement factor: {factor}")
    if factor == 1:
        return limit
    cells = {}
    for key, selected in limit.cells.items():
        refined: Set[CellSignature] = set()
        for cell in selected:
            choices = [range((c - 1) * factor + 1, c * factor + 1) for c in cell]
            refined.update(itertools.product(*choices))
        cells[key] = frozenset(refined)
    return StepLimit.model_construct(
        signature=limit.signature, resolution=limit.resolution * factor, cells=cells
    )


def limit_distance(first: StepLimit, second: StepLimit) -> Density:
    """Return the sum over keys of the measures of the symmetric differences.

    Limits of different resolutions are compared at the least common
    multiple of both.

    Raises
    ------
    DomainError
        If the signatures differ.
    """
    if first.signature != second.signature:
        raise DomainError("Signature mismatch between limits")
    resolution = first.resolution * second.resolution // math.gcd(
        first.resolution, second.resolution
    )
    first = refine(first, resolution // first.resolution)
    second = refine(second, resolution // second.resolution)
    total = Fraction(0)
    for key in index_keys(first.signature):
        difference = first.cells_of(key) ^ second.cells_of(key)
        total += Fraction(len(difference), resolution ** _signature_length(key.partition.size))
    return total


def expected_coupled_distance(first: StepLimit, second: StepLimit, size: int) -> Density:
    """Return the expected distance of two structures realized from one seed.

    A tuple ``b`` is an edge of exactly one of them with probability the
    measure of the symmetric difference, so the expectation is the sum over
    keys of ``(m)_t / m^t`` times that measure.
    """
    if first.signature != second.signature:
        raise DomainError("Signature mismatch between limits")
    if size == 0:
        return Fraction(0)
    total = Fraction(0)
    for key in index_keys(first.signature):
        single = StepLimit.model_construct(
            signature=first.signature,
            resolution=first.resolution,
            cells={key: first.cells_of(key)},
        )
        other = StepLimit.model_construct(
            signature=second.signature,
            resolution=second.resolution,
            cells={key: second.cells_of(key)},
        )
        t = key.partition.size
        total += limit_distance(single, other) * Fraction(
            falling_factorial(size, t), size**t
        )
    return total


def sample_seed(size: int, cap: int, rng: np.random.Generator) -> SeedTuple:
    """Draw an independent uniform value per subset of ``[size]`` of size ``<= cap``.

    Raises
    ------
    DomainError
        If ``size`` is not positive.
    """
    if size < 1:
        raise DomainError(f"Cannot sample a seed on [{size}]")
    index = SubsetIndex(ground=size, cap=cap)
    return SeedTuple.model_construct(
        index=index, values=tuple(rng.random(index.count).tolist())
    )


def _colex_rank(subset: Subset) -> int:
    return sum(math.comb(a - 1, j + 1) for j, a in enumerate(subset))


def keyed_seed(size: int, cap: int, seed: int, replica: int = 0) -> SeedTuple:
    """Return a seed whose values are keyed by ``(seed, replica, subset)``.

    Each value is the first output of a Philox counter-based generator whose
    key comes from ``(seed, replica)`` and whose counter is the colex rank
    and size of the subset. The value of a subset therefore does not depend
    on ``size`` nor on the order of evaluation.

    Raises
    ------
    DomainError
        If ``size`` is not positive.
    """
    if size < 1:
        raise DomainError(f"Cannot sample a seed on [{size}]")
    key = np.random.SeedSequence(entropy=seed, spawn_key=(replica,)).generate_state(
        2, np.uint64
    )
    index = SubsetIndex(ground=size, cap=cap)
    values = []
    for subset in index.subsets:
        counter = np.array([_colex_rank(subset), len(subset), 0, 0], dtype=np.uint64)
        raw = int(np.random.Philox(counter=counter, key=key).random_raw())
        values.append((raw >> 11) * 2.0**-53)
    return SeedTuple.model_construct(index=index, values=tuple(values))


def _check_seed(limit: StepLimit, size: int, seed: SeedTuple) -> None:
    if seed.index.ground != size:
        raise DomainError(f"Seed is indexed on [{seed.index.ground}], not [{size}]")
    if seed.index.cap < limit.signature.r_max and size > seed.index.cap:
        raise DomainError(
            f"Seed covers subsets up to {seed.index.cap}, "
            f"arity {limit.signature.r_max} is needed"
        )


def realize(limit: StepLimit, size: int, seed: SeedTuple) -> Structure:
    """Return the structure ``N(F, m, y)`` realized from a seed.

    Parameters
    ----------
    limit
        The step limit ``F``.
    size
        The universe size ``m``.
    seed
        One value per subset of ``[m]`` with at most ``r_max`` elements.

    Returns
    -------
    Structure
        The decoded structure; a pure function of its arguments.

    Raises
    ------
    DomainError
        If the seed is not indexed by the subsets the limit needs.
    """
    _check_seed(limit, size, seed)
    colors = {
        subset: interval_of(y, limit.resolution)
        for subset, y in zip(seed.index.subsets, seed.values)
    }
    edges: Dict[IndexKey, FrozenSet[Edge]] = {}
    for key, selected in limit.cells.items():
        components = cell_components(key.partition.size)
        edges[key] = frozenset(
            b
            for b in itertools.permutations(range(1, size + 1), key.partition.size)
            if tuple(colors[tuple(sorted(b[j] for j in component))] for component in components)
            in selected
        )
    return decode(
        DHypFamily.model_construct(signature=limit.signature, size=size, edges=edges)
    )


def sample_structure(limit: StepLimit, size: int, rng: np.random.Generator) -> Structure:
    """Draw the random structure ``N(F, m)``."""
    return realize(limit, size, sample_seed(size, limit.signature.r_max, rng))


def _cell_code(cell: Iterable[int], resolution: int) -> int:
    code = 0
    for c in cell:
        code = code * resolution + c - 1
    return code


def _identity_embeds(
    m: Structure, limit: StepLimit, index: SubsetIndex
) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorize the event that the identity embeds ``m`` into a realization.

    The returned function maps an array of colorings, one row per seed and
    one column per subset of ``index``, to a boolean array.
    """
    coded = encode(m)
    resolution = limit.resolution
    checks = []
    for key in index_keys(m.signature):
        t = key.partition.size
        selected = np.array(
            sorted(_cell_code(cell, resolution) for cell in limit.cells_of(key)),
            dtype=np.int64,
        )
        present = coded.edges_of(key)
        for b in itertools.permutations(range(1, m.size + 1), t):
            columns = [
                index.position(tuple(sorted(b[j] for j in component)))
                for component in cell_components(t)
            ]
            checks.append((columns, selected, b in present))

    def predicate(colors: np.ndarray) -> np.ndarray:
        result = np.ones(len(colors), dtype=bool)
        for columns, selected, present in checks:
            codes = np.zeros(len(colors), dtype=np.int64)
            for column in columns:
                codes = codes * resolution + colors[:, column] - 1
            result &= np.isin(codes, selected) == present
        return result

    return predicate


def embedding_measure(
    m: Structure, limit: StepLimit, budget: int = COLORING_BUDGET
) -> Density:
    """Return the exact measure of the seeds for which the identity embeds ``m``.

    Membership depends only on the color of each seed value and colors are
    independent and uniform, so the measure is the fraction of colorings of
    the subsets of ``[‖m‖]`` whose realization contains ``m`` via the
    identity.

    Parameters
    ----------
    m
        The structure to embed.
    limit
        The step limit.
    budget
        Maximum number of colorings to enumerate.

    Returns
    -------
    Density
        The exact measure.

    Raises
    ------
    DomainError
        If the signatures differ.
    ResourceError
        If ``l^|r([m], r_max)|`` exceeds the budget.
    """
    if m.signature != limit.signature:
        raise DomainError("Signature mismatch between structure and limit")
    if m.size == 0:
        return Fraction(1)
    index = SubsetIndex(ground=m.size, cap=m.signature.r_max)
    total = limit.resolution**index.count
    if total > budget:
        raise ResourceError(f"embedding measure of a size {m.size} structure", total, budget)
    predicate = _identity_embeds(m, limit, index)
    if index.count == 0:
        return Fraction(int(predicate(np.ones((1, 0), dtype=np.int64))[0]))
    shape = (limit.resolution,) * index.count
    matches = 0
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        colors = np.stack(np.unravel_index(codes, shape), axis=1) + 1
        matches += int(predicate(colors).sum())
    logger.debug("identity embeds in %d of %d colorings", matches, total)
    return Fraction(matches, total)


def _check_trials(trials: int) -> None:
    if trials < 1:
        raise DomainError(f"At least one trial is needed, got {trials}")


def estimate_embedding_measure(
    m: Structure, limit: StepLimit, trials: int, rng: np.random.Generator
) -> Density:
    """Estimate ``embedding_measure`` from random seeds.

    Returns
    -------
    Density
        The fraction of the ``trials`` seeds for which the identity embeds.

    Raises
    ------
    DomainError
        If the signatures differ or ``trials`` is not positive.
    """
    if m.signature != limit.signature:
        raise DomainError("Signature mismatch between structure and limit")
    _check_trials(trials)
    if m.size == 0:
        return Fraction(1)
    index = SubsetIndex(ground=m.size, cap=m.signature.r_max)
    predicate = _identity_embeds(m, limit, index)
    hits = 0
    for start in range(0, trials, _CHUNK):
        values = rng.random((min(_CHUNK, trials - start), index.count))
        colors = np.minimum(
            np.floor(values * limit.resolution).astype(np.int64) + 1, limit.resolution
        )
        hits += int(predicate(colors).sum())
    return Fraction(hits, trials)


def induced_density(
    m: Structure, limit: StepLimit, budget: int = COLORING_BUDGET
) -> Density:
    """Return the limiting induced density of ``m``.

    This is ``embedding_measure * ‖m‖! / |Aut(m)|``, the probability that
    ``N(F, ‖m‖)`` is isomorphic to ``m``.
    """
    measure = embedding_measure(m, limit, budget)
    return measure * Fraction(math.factorial(m.size), automorphism_count(m))


class ConvergenceRow(FrozenModel):
    """One line of the convergence experiment."""

    size: int
    k: int
    type_index: int
    exact: Fraction
    mean_frequency: float
    mean_deviation: float
    trials: int


def convergence_experiment(
    limit: StepLimit,
    k: int,
    sizes: Sequence[int],
    trials: int,
    seed: int,
    budget: int = COLORING_BUDGET,
    type_budget: int = TYPE_BUDGET,
) -> List[ConvergenceRow]:
    """Compare sampled induced densities with their exact limits.

    For every isomorphism type ``M`` on ``[j]``, ``j <= k``, and every size
    ``m`` in ``sizes``, ``trials`` structures ``N(F, m)`` are drawn; the row
    reports the mean of ``p(M, N)`` and the mean of ``|p(M, N) - exact|``.
    Each size draws from its own stream spawned from ``seed``.
    """
    _check_trials(trials)
    exact: Dict[int, List[Fraction]] = {}
    for j in range(1, k + 1):
        exact[j] = [
            induced_density(m, limit, budget)
            for m in isomorphism_types(limit.signature, j, type_budget)
        ]
        logger.debug("exact densities of size %d: %s", j, exact[j])

    rows = []
    for size in sizes:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(size,)))
        orders = [j for j in exact if j <= size]
        sums = {j: np.zeros(len(exact[j])) for j in orders}
        deviations = {j: np.zeros(len(exact[j])) for j in orders}
        targets = {j: np.array([float(x) for x in exact[j]]) for j in orders}
        for _ in range(trials):
            n = sample_structure(limit, size, rng)
            for j in orders:
                frequencies = np.array(type_census(n, j, type_budget)) / math.comb(size, j)
                sums[j] += frequencies
                deviations[j] += np.abs(frequencies - targets[j])
        for j in orders:
            for i, value in enumerate(exact[j]):
                rows.append(
                    ConvergenceRow(
                        size=size,
                        k=j,
                        type_index=i,
                        exact=value,
                        mean_frequency=float(sums[j][i] / trials),
                        mean_deviation=float(deviations[j][i] / trials),
                        trials=trials,
                    )
                )
            logger.info(
                "size %d, order %d: aggregate deviation %.4f",
                size,
                j,
                float(deviations[j].sum() / trials),
            )
    return rows


class SamplingConfig(UseDefaultValueModel):
    """Sampling configuration."""

    seed: NonNegativeInt = Field(default=0, lt=2**64)
    trials: PositiveInt = 1000


class OracleConfig(UseDefaultValueModel):
    """Exact oracle configuration."""

    coloring_budget: PositiveInt = Field(default=COLORING_BUDGET, alias="coloring-budget")
    type_budget: PositiveInt = Field(default=TYPE_BUDGET, alias="type-budget")
