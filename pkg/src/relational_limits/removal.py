"""Edit distance between structures and removal of forbidden induced copies."""
import itertools
import logging
import math
from fractions import Fraction
from typing import Callable
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Set
from typing import Tuple

import numpy as np
from pydantic import Field
from pydantic import NonNegativeInt
from pydantic import PositiveFloat
from pydantic import PositiveInt
from pydantic import model_validator

from ._pydantic import FrozenModel
from ._pydantic import UseDefaultValueModel
from .coding import IndexKey
from .coding import encode
from .coding import index_key
from .coding import induced_partition
from .error import DomainError
from .limit import StepLimit
from .limit import sample_structure
from .structures import Density
from .structures import RelationTuple
from .structures import Signature
from .structures import Structure
from .structures import check_same_signature
from .structures import induced_copies
from .structures import induced_substructure
from .structures import is_isomorphic

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 1000
SAMPLE_LIMIT = 20000

Generator = Callable[[np.random.Generator], Structure]


class ForbiddenFamily(FrozenModel):
    """Pairwise non-isomorphic structures to keep out, as induced substructures.

    Families too large to list are represented by their members up to
    ``cap``, the only ones a removal test ever looks at.
    """

    signature: Signature
    members: Tuple[Structure, ...] = ()
    cap: Optional[NonNegativeInt] = None

    @model_validator(mode="after")
    def _validate_members(self) -> "ForbiddenFamily":
        for member in self.members:
            if member.signature != self.signature:
                raise ValueError(f"member over '{member.signature}', not '{self.signature}'")
        for first, second in itertools.combinations(self.members, 2):
            if is_isomorphic(first, second):
                raise ValueError("members must be pairwise non-isomorphic")
        return self

    def members_up_to(self, cap: Optional[int] = None) -> List[Structure]:
        """Return the members of size at most ``cap``, all of them by default."""
        if cap is None:
            cap = self.cap
        return [m for m in self.members if cap is None or m.size <= cap]


class RemovalReport(FrozenModel):
    """The outcome of a greedy removal."""

    epsilon: Optional[float] = None
    distance: Fraction
    iterations: int
    success: bool
    edits: Dict[IndexKey, int] = {}  # noqa: RUF012

    @property
    def close(self) -> bool:
        """bool: Whether the repair succeeded below the distance budget."""
        return self.success and (self.epsilon is None or self.distance < self.epsilon)


def _check_same_universe(m: Structure, n: Structure) -> None:
    check_same_signature(m, n)
    if m.size != n.size:
        raise DomainError(f"Size mismatch: {m.size} and {n.size}")


def _edit_counts(m: Structure, n: Structure) -> Dict[IndexKey, int]:
    coded_m = encode(m)
    coded_n = encode(n)
    counts = {}
    for key in coded_m.keys():
        count = len(coded_m.edges_of(key) ^ coded_n.edges_of(key))
        if count:
            counts[key] = count
    return counts


def _distance(edits: Dict[IndexKey, int], size: int) -> Density:
    return sum(
        (Fraction(count, size**key.partition.size) for key, count in edits.items()),
        Fraction(0),
    )


def distance_d(m: Structure, n: Structure) -> Density:
    """Return the edit distance of two structures on the same universe.

    Each index key contributes the size of the symmetric difference of the
    coded edge sets divided by ``‖n‖^‖p‖``.

    Raises
    ------
    DomainError
        If the signatures or the sizes differ.
    """
    _check_same_universe(m, n)
    return _distance(_edit_counts(m, n), n.size)


def count_induced_copies(m: Structure, n: Structure) -> int:
    """Return the number of ``‖m‖``-subsets of ``n`` inducing a copy of ``m``."""
    return sum(1 for _ in induced_copies(m, n))


def is_family_free(
    n: Structure, family: ForbiddenFamily, cap: Optional[int] = None
) -> bool:
    """Return whether no member of size at most ``cap`` is induced in ``n``."""
    if family.signature != n.signature:
        raise DomainError(f"Signature mismatch: '{family.signature}' and '{n.signature}'")
    return not any(
        next(induced_copies(m, n), None) is not None for m in family.members_up_to(cap)
    )


def _symmetric_symbols(n: Structure) -> Set[int]:
    return {
        i
        for i, relation in enumerate(n.relations)
        if n.signature.arities[i] > 1
        and all(perm in relation for tup in relation for perm in itertools.permutations(tup))
    }


def _orbit(tup: RelationTuple, symmetric: bool) -> Set[RelationTuple]:
    return set(itertools.permutations(tup)) if symmetric else {tup}


class _Toggle(FrozenModel):
    symbol: int
    tuples: Tuple[RelationTuple, ...]

    @property
    def rank(self) -> Tuple[Tuple[int, Tuple[int, ...]], RelationTuple]:
        tup = min(self.tuples)
        return index_key(self.symbol, induced_partition(tup)).sort_key, tup

    @property
    def support(self) -> Set[int]:
        return {a for tup in self.tuples for a in tup}


def _apply(relations: List[Set[RelationTuple]], toggle: _Toggle) -> None:
    relation = relations[toggle.symbol]
    for tup in toggle.tuples:
        if tup in relation:
            relation.remove(tup)
        else:
            relation.add(tup)


def _copies_through(
    n: Structure, members: Sequence[Structure], support: Set[int]
) -> int:
    others = [a for a in range(1, n.size + 1) if a not in support]
    count = 0
    for m in members:
        if not len(support) <= m.size <= n.size:
            continue
        for extra in itertools.combinations(others, m.size - len(support)):
            subset = sorted(support.union(extra))
            if is_isomorphic(induced_substructure(n, subset), m):
                count += 1
    return count


def _first_copy(
    n: Structure, members: Sequence[Structure]
) -> Optional[Tuple[Structure, Tuple[int, ...]]]:
    for m in members:
        for subset in induced_copies(m, n):
            return m, subset
    return None


def _candidates(
    n: Structure, subset: Sequence[int], symmetric: Set[int], present: bool
) -> List[_Toggle]:
    seen: Set[Tuple[int, RelationTuple]] = set()
    toggles = []
    for i, arity in enumerate(n.signature.arities):
        for tup in itertools.product(subset, repeat=arity):
            if (tup in n.relations[i]) != present or (i, tup) in seen:
                continue
            orbit = _orbit(tup, i in symmetric)
            seen.update((i, x) for x in orbit)
            toggles.append(_Toggle(symbol=i, tuples=tuple(sorted(orbit))))
    return toggles


def _most_copies(
    current: Structure,
    members: Sequence[Structure],
    relations: List[Set[RelationTuple]],
    toggles: Sequence[_Toggle],
) -> _Toggle:
    scored = []
    for toggle in toggles:
        before = _copies_through(current, members, toggle.support)
        _apply(relations, toggle)
        after = _copies_through(
            Structure.trusted(current.signature, current.size, relations),
            members,
            toggle.support,
        )
        _apply(relations, toggle)
        scored.append((before - after, toggle))
    drop, toggle = min(scored, key=lambda item: (-item[0], item[1].rank))
    logger.debug("%d copies through %s", drop, sorted(toggle.support))
    return toggle


def greedy_removal(
    n: Structure,
    family: ForbiddenFamily,
    cap: Optional[int] = None,
    budget: int = DEFAULT_BUDGET,
    epsilon: Optional[float] = None,
    preserve_symmetry: bool = True,
    most_copies: bool = False,
) -> Tuple[Structure, RemovalReport]:
    """Toggle relation tuples until no member of the family is induced.

    Each iteration locates the first induced copy (members in family order,
    subsets in colex order) and toggles one tuple inside it. Related tuples
    are deleted when the copy has any, otherwise absent tuples are
    inserted. The toggle of least index key, then least tuple, is chosen;
    with ``most_copies`` the toggle removing the most copies through its
    support goes first and that order only breaks ties. With
    ``preserve_symmetry`` a tuple of a relation closed under permutation of
    coordinates is toggled together with its permutations.

    Parameters
    ----------
    n
        The structure to repair.
    family
        The forbidden family.
    cap
        Only members of size at most ``cap`` are considered.
    budget
        Maximum number of iterations.
    epsilon
        Distance budget recorded in the report.
    preserve_symmetry
        Toggle whole permutation orbits in symmetric relations.
    most_copies
        Prefer the toggle destroying the most copies.

    Returns
    -------
    tuple of Structure and RemovalReport
        The repaired structure, or the last one tried when the budget is
        exhausted, and its report.

    Raises
    ------
    DomainError
        If the budget is not positive or the signatures differ.
    """
    if budget < 1:
        raise DomainError(f"Invalid iteration budget: {budget}")
    if family.signature != n.signature:
        raise DomainError(f"Signature mismatch: '{family.signature}' and '{n.signature}'")
    members = family.members_up_to(cap)
    symmetric = _symmetric_symbols(n) if preserve_symmetry else set()
    relations = [set(relation) for relation in n.relations]
    current = n
    iterations = 0
    success = False
    while True:
        found = _first_copy(current, members)
        if found is None:
            success = True
            break
        if iterations == budget:
            logger.warning("Removal budget of %d iterations exhausted", budget)
            break
        _, subset = found
        toggles = _candidates(current, subset, symmetric, present=True) or _candidates(
            current, subset, symmetric, present=False
        )
        if not toggles:
            logger.warning("No tuple to toggle inside the copy at %s", subset)
            break
        if most_copies:
            toggle = _most_copies(current, members, relations, toggles)
        else:
            toggle = min(toggles, key=lambda item: item.rank)
        logger.debug("toggling %s of symbol %d", toggle.tuples, toggle.symbol)
        _apply(relations, toggle)
        current = Structure.trusted(n.signature, n.size, relations)
        iterations += 1

    edits = _edit_counts(n, current)
    report = RemovalReport(
        epsilon=epsilon,
        distance=_distance(edits, n.size),
        iterations=iterations,
        success=success,
        edits=edits,
    )
    return current, report


def estimate_density_p(
    m: Structure, n: Structure, samples: int, rng: np.random.Generator
) -> Density:
    """Estimate ``p(m, n)`` from uniformly random ``‖m‖``-subsets."""
    check_same_signature(m, n)
    if n.size < m.size:
        return Fraction(0)
    hits = 0
    for _ in range(samples):
        subset = sorted(int(a) + 1 for a in rng.choice(n.size, m.size, replace=False))
        if is_isomorphic(induced_substructure(n, subset), m):
            hits += 1
    return Fraction(hits, samples)


def max_forbidden_density(
    n: Structure,
    family: ForbiddenFamily,
    cap: Optional[int],
    rng: np.random.Generator,
    sample_limit: int = SAMPLE_LIMIT,
) -> Density:
    """Return the largest density ``p(M, n)`` over the members up to ``cap``.

    Densities over more than ``sample_limit`` subsets are estimated from
    ``sample_limit`` random subsets.
    """
    densities = [Fraction(0)]
    for m in family.members_up_to(cap):
        total = math.comb(n.size, m.size)
        if total <= sample_limit:
            densities.append(Fraction(count_induced_copies(m, n), total) if total else Fraction(0))
        else:
            densities.append(estimate_density_p(m, n, sample_limit, rng))
    return max(densities)


class RemovalRow(FrozenModel):
    """One trial of the removal experiment."""

    trial: int
    size: int
    max_density: Fraction
    repaired: bool
    distance: Fraction
    iterations: int


def removal_experiment(
    family: ForbiddenFamily,
    epsilon: float,
    generator: Generator,
    trials: int,
    seed: int,
    cap: Optional[int] = None,
    budget: int = DEFAULT_BUDGET,
    preserve_symmetry: bool = True,
    sample_limit: int = SAMPLE_LIMIT,
    most_copies: bool = False,
) -> List[RemovalRow]:
    """Measure forbidden densities and repair distances on generated structures.

    Trial ``i`` draws from its own stream spawned from ``seed``; a trial is
    repaired when greedy removal succeeds at a distance below ``epsilon``.

    Raises
    ------
    DomainError
        If ``epsilon`` is not positive.
    """
    if epsilon <= 0:
        raise DomainError(f"Distance budget must be positive, got {epsilon}")
    rows = []
    for trial, stream in enumerate(np.random.SeedSequence(seed).spawn(trials)):
        rng = np.random.default_rng(stream)
        n = generator(rng)
        density = max_forbidden_density(n, family, cap, rng, sample_limit)
        _, report = greedy_removal(
            n,
            family,
            cap,
            budget,
            epsilon=epsilon,
            preserve_symmetry=preserve_symmetry,
            most_copies=most_copies,
        )
        rows.append(
            RemovalRow(
                trial=trial,
                size=n.size,
                max_density=density,
                repaired=report.close,
                distance=report.distance,
                iterations=report.iterations,
            )
        )
    repaired = sum(row.repaired for row in rows)
    logger.info("%d of %d trials repaired below %s", repaired, trials, epsilon)
    return rows


class FrontierPoint(FrozenModel):
    """Repair success among the trials below a density threshold."""

    threshold: Fraction
    trials: int
    success_rate: float


def frontier(rows: Sequence[RemovalRow]) -> List[FrontierPoint]:
    """Return the success rate among trials with density at most each observed value."""
    points = []
    for threshold in sorted({row.max_density for row in rows}):
        below = [row for row in rows if row.max_density <= threshold]
        points.append(
            FrontierPoint(
                threshold=threshold,
                trials=len(below),
                success_rate=sum(row.repaired for row in below) / len(below),
            )
        )
    return points


def planted_generator(base: Structure, toggles: int, symmetric: bool = True) -> Generator:
    """Return a source of copies of ``base`` with ``toggles`` random distinct-entry tuples flipped.

    With ``symmetric``, relations closed under permutation of coordinates
    are flipped by whole orbits, so they stay closed.
    """
    closed = _symmetric_symbols(base) if symmetric else set()
    candidates = [
        _Toggle(symbol=i, tuples=tuple(sorted(_orbit(tup, i in closed))))
        for i, arity in enumerate(base.signature.arities)
        for tup in itertools.permutations(range(1, base.size + 1), arity)
        if i not in closed or list(tup) == sorted(tup)
    ]
    if toggles > len(candidates):
        raise DomainError(f"Cannot toggle {toggles} of {len(candidates)} tuples")

    def generate(rng: np.random.Generator) -> Structure:
        relations = [set(relation) for relation in base.relations]
        for choice in rng.choice(len(candidates), toggles, replace=False):
            _apply(relations, candidates[int(choice)])
        return Structure.trusted(base.signature, base.size, relations)

    return generate


def limit_generator(limit: StepLimit, size: int) -> Generator:
    """Return a source of random structures ``N(limit, size)``."""

    def generate(rng: np.random.Generator) -> Structure:
        return sample_structure(limit, size, rng)

    return generate


class RemovalConfig(UseDefaultValueModel):
    """Removal configuration."""

    budget: PositiveInt = DEFAULT_BUDGET
    cap: Optional[NonNegativeInt] = None
    epsilon: PositiveFloat = 0.05
    preserve_symmetry: bool = Field(default=True, alias="preserve-symmetry")
    sample_limit: PositiveInt = Field(default=SAMPLE_LIMIT, alias="sample-limit")
    most_copies: bool = Field(default=False, alias="most-copies")
