"""Files related code.

Three line-oriented text formats are handled, all whitespace separated,
with ``#`` comments and ``;`` accepted as a line separator:

* structures: ``lang R/2 S/3``, ``size 3`` then ``R 1 2`` tuple lines;
* step limits: ``lang``, ``resolution 2`` then
  ``cell R 1|2 c1 c2 c3`` lines, ``*`` standing for every color;
* coded families: ``lang``, ``size`` then ``edge R 1|2 b1 b2`` lines.
"""
import csv
import itertools
import logging
from pathlib import Path
from typing import Dict
from typing import Iterator
from typing import List
from typing import Optional
from typing import Sequence
from typing import Set
from typing import TextIO
from typing import Tuple
from typing import Union

from pydantic import ValidationError

from .coding import DHypFamily
from .coding import Edge
from .coding import IndexKey
from .coding import SetPartition
from .coding import index_key
from .coding import index_keys
from .error import DomainError
from .error import FormatError
from .error import InvalidUtf8FileError
from .limit import CellSignature
from .limit import ConvergenceRow
from .limit import StepLimit
from .removal import FrontierPoint
from .removal import RemovalRow
from .structures import RelationTuple
from .structures import Signature
from .structures import Structure

logger = logging.getLogger(__name__)

PathLike = Union[Path, str]
Line = Tuple[int, List[str]]


def _lines(text: str) -> Iterator[Line]:
    for number, line in enumerate(text.splitlines(), start=1):
        for statement in line.split("#", 1)[0].split(";"):
            tokens = statement.split()
            if tokens:
                yield number, tokens


class _Reader:
    """Statements of a document with their location."""

    def __init__(self, text: str, path: Optional[PathLike]) -> None:
        self.lines = list(_lines(text))
        self.path = path
        self.position = 0

    def error(self, message: str, line: Optional[int] = None) -> FormatError:
        if line is None and self.lines:
            line = self.lines[min(self.position, len(self.lines) - 1)][0]
        return FormatError(message, line, self.path)

    def header(self, keyword: str) -> Line:
        if self.position >= len(self.lines):
            raise self.error(f"missing '{keyword}' line")
        number, tokens = self.lines[self.position]
        if tokens[0] != keyword:
            raise self.error(f"expected '{keyword}', found '{tokens[0]}'", number)
        self.position += 1
        return number, tokens[1:]

    def natural(self, token: str, line: int) -> int:
        if not (token.isascii() and token.isdigit()):
            raise self.error(f"expected a natural number, found '{token}'", line)
        return int(token)

    def signature(self) -> Signature:
        number, tokens = self.header("lang")
        pairs = []
        for token in tokens:
            name, _, arity = token.partition("/")
            pairs.append((name, self.natural(arity, number)))
        try:
            return Signature.from_pairs(pairs)
        except ValidationError as exc:
            raise self.error(f"invalid language '{' '.join(tokens)}'", number) from exc

    def single(self, keyword: str) -> int:
        number, tokens = self.header(keyword)
        if len(tokens) != 1:
            raise self.error(f"'{keyword}' takes one value", number)
        return self.natural(tokens[0], number)

    def body(self, keyword: Optional[str] = None) -> Iterator[Line]:
        for number, tokens in self.lines[self.position :]:
            if keyword is not None:
                if tokens[0] != keyword:
                    raise self.error(f"expected '{keyword}', found '{tokens[0]}'", number)
                tokens = tokens[1:]
            yield number, tokens
        self.position = len(self.lines)

    def symbol(self, signature: Signature, token: str, line: int) -> int:
        try:
            return signature.index(token)
        except DomainError as exc:
            raise self.error(f"unknown relation symbol '{token}'", line) from exc

    def partition(self, token: str, arity: int, line: int) -> SetPartition:
        try:
            partition = SetPartition.parse(token)
        except DomainError as exc:
            raise self.error(f"invalid partition '{token}'", line) from exc
        if partition.t != arity:
            raise self.error(f"partition '{token}' does not partition [{arity}]", line)
        return partition

    def entries(self, tokens: Sequence[str], count: int, size: int, line: int) -> Tuple[int, ...]:
        if len(tokens) != count:
            raise self.error(f"expected {count} entries, found {len(tokens)}", line)
        entries = tuple(self.natural(token, line) for token in tokens)
        for a in entries:
            if not 1 <= a <= size:
                raise self.error(f"entry {a} is outside [{size}]", line)
        return entries


def parse_structure(text: str, path: Optional[PathLike] = None) -> Structure:
    """Parse a structure document.

    Raises
    ------
    FormatError
        With the location of an unknown symbol, an arity mismatch, an
        entry out of range or any malformed line.
    """
    reader = _Reader(text, path)
    signature = reader.signature()
    size = reader.single("size")
    relations: List[Set[RelationTuple]] = [set() for _ in signature.symbols]
    for number, tokens in reader.body():
        i = reader.symbol(signature, tokens[0], number)
        arity = signature.arities[i]
        relations[i].add(reader.entries(tokens[1:], arity, size, number))
    return Structure.trusted(signature, size, relations)


def dump_structure(n: Structure) -> str:
    """Return the canonical document of a structure.

    Tuples follow the symbol order, then the lexicographic order.
    """
    lines = [f"lang {n.signature}".rstrip(), f"size {n.size}"]
    for symbol, relation in zip(n.signature.symbols, n.relations):
        lines.extend(f"{symbol.name} {' '.join(map(str, tup))}" for tup in sorted(relation))
    return "\n".join(lines) + "\n"


def parse_limit(text: str, path: Optional[PathLike] = None) -> StepLimit:
    """Parse a step limit document.

    Raises
    ------
    FormatError
        With the location of the first malformed line.
    """
    reader = _Reader(text, path)
    signature = reader.signature()
    resolution = reader.single("resolution")
    if resolution < 1:
        raise reader.error("resolution must be positive")
    cells: Dict[IndexKey, Set[CellSignature]] = {}
    for number, tokens in reader.body("cell"):
        if len(tokens) < 2:
            raise reader.error("expected a symbol and a partition", number)
        i = reader.symbol(signature, tokens[0], number)
        partition = reader.partition(tokens[1], signature.arities[i], number)
        length = (1 << partition.size) - 1
        if len(tokens) - 2 != length:
            raise reader.error(f"expected {length} colors, found {len(tokens) - 2}", number)
        choices = []
        for token in tokens[2:]:
            if token == "*":
                choices.append(range(1, resolution + 1))
                continue
            color = reader.natural(token, number)
            if not 1 <= color <= resolution:
                raise reader.error(f"color {color} is outside [{resolution}]", number)
            choices.append(range(color, color + 1))
        cells.setdefault(index_key(i, partition), set()).update(itertools.product(*choices))
    return StepLimit.model_construct(
        signature=signature,
        resolution=resolution,
        cells={key: frozenset(value) for key, value in cells.items()},
    )


def dump_limit(limit: StepLimit) -> str:
    """Return the document of a step limit, one line per selected cell."""
    lines = [f"lang {limit.signature}".rstrip(), f"resolution {limit.resolution}"]
    for key in index_keys(limit.signature):
        name = limit.signature.symbols[key.symbol].name
        lines.extend(
            f"cell {name} {key.partition} {' '.join(map(str, cell))}"
            for cell in sorted(limit.cells_of(key))
        )
    return "\n".join(lines) + "\n"


def parse_family(text: str, path: Optional[PathLike] = None) -> DHypFamily:
    """Parse a coded family document.

    Edges repeating an entry are kept; ``decode`` rejects them.

    Raises
    ------
    FormatError
        With the location of the first malformed line.
    """
    reader = _Reader(text, path)
    signature = reader.signature()
    size = reader.single("size")
    edges: Dict[IndexKey, Set[Edge]] = {}
    for number, tokens in reader.body("edge"):
        if len(tokens) < 2:
            raise reader.error("expected a symbol and a partition", number)
        i = reader.symbol(signature, tokens[0], number)
        partition = reader.partition(tokens[1], signature.arities[i], number)
        edge = reader.entries(tokens[2:], partition.size, size, number)
        edges.setdefault(index_key(i, partition), set()).add(edge)
    return DHypFamily.model_construct(
        signature=signature,
        size=size,
        edges={key: frozenset(value) for key, value in edges.items()},
    )


def dump_family(family: DHypFamily) -> str:
    """Return the document of a coded family, keys in index order."""
    lines = [f"lang {family.signature}".rstrip(), f"size {family.size}"]
    for key in family.keys():
        name = family.signature.symbols[key.symbol].name
        lines.extend(
            f"edge {name} {key.partition} {' '.join(map(str, edge))}"
            for edge in sorted(family.edges_of(key))
        )
    return "\n".join(lines) + "\n"


def read_text(path: PathLike) -> str:
    """Return the content of a UTF-8 file.

    Raises
    ------
    FormatError
        If the file cannot be read.
    InvalidUtf8FileError
        If the file is not valid UTF-8.
    """
    try:
        with open(path, encoding="utf-8") as stream:
            return stream.read()
    except UnicodeError as exc:
        raise InvalidUtf8FileError(path) from exc
    except OSError as exc:
        raise FormatError(f"cannot read file: {exc.strerror}", path=path) from exc


def read_structure(path: PathLike) -> Structure:
    """Read a structure file."""
    logger.debug("reading structure file: %s", path)
    return parse_structure(read_text(path), path)


def read_limit(path: PathLike) -> StepLimit:
    """Read a step limit file."""
    logger.debug("reading limit file: %s", path)
    return parse_limit(read_text(path), path)


def read_family(path: PathLike) -> DHypFamily:
    """Read a coded family file."""
    logger.debug("reading family file: %s", path)
    return parse_family(read_text(path), path)


def open_output(path: PathLike, newline: str = "\n") -> TextIO:
    """Open a UTF-8 file for writing.

    Raises
    ------
    FormatError
        If the file cannot be opened.
    """
    logger.debug("writing file: %s", path)
    try:
        return open(path, "w", encoding="utf-8", newline=newline)  # noqa: SIM115
    except OSError as exc:
        raise FormatError(f"cannot write file: {exc.strerror}", path=path) from exc


def write_text(text: str, path: Optional[PathLike], stream: TextIO) -> None:
    """Write a document to ``path``, or to ``stream`` when no path is given."""
    if path is None:
        stream.write(text)
        return
    with open_output(path) as output:
        output.write(text)


def write_convergence_csv(rows: Sequence[ConvergenceRow], stream: TextIO) -> None:
    """Write the rows of the convergence experiment as CSV."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(
        [
            "size",
            "k",
            "type",
            "exact_num",
            "exact_den",
            "mean_frequency",
            "mean_deviation",
            "trials",
        ]
    )
    for row in rows:
        writer.writerow(
            [
                row.size,
                row.k,
                row.type_index,
                row.exact.numerator,
                row.exact.denominator,
                f"{row.mean_frequency:.6f}",
                f"{row.mean_deviation:.6f}",
                row.trials,
            ]
        )


def write_removal_csv(rows: Sequence[RemovalRow], stream: TextIO) -> None:
    """Write the rows of the removal experiment as CSV."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(
        [
            "trial",
            "size",
            "max_density_num",
            "max_density_den",
            "repaired",
            "d_num",
            "d_den",
            "iterations",
        ]
    )
    for row in rows:
        writer.writerow(
            [
                row.trial,
                row.size,
                row.max_density.numerator,
                row.max_density.denominator,
                int(row.repaired),
                row.distance.numerator,
                row.distance.denominator,
                row.iterations,
            ]
        )


def write_frontier_csv(points: Sequence[FrontierPoint], stream: TextIO) -> None:
    """Write the removal frontier as CSV."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["threshold_num", "threshold_den", "trials", "success_rate"])
    for point in points:
        writer.writerow(
            [
                point.threshold.numerator,
                point.threshold.denominator,
                point.trials,
                f"{point.success_rate:.6f}",
            ]
        )


def parse_signature(text: str) -> Signature:
    """Parse the symbols of a ``lang`` line, given without the keyword.

    Raises
    ------
    FormatError
        If a symbol is malformed.
    """
    return _Reader(f"lang {text}", None).signature()
