"""Simple utility functions."""
import logging
from fractions import Fraction
from pathlib import Path
from typing import Iterator
from typing import Tuple
from typing import Union

logger = logging.getLogger(__name__)


def log_exception(exc: BaseException, level: int = logging.ERROR) -> None:
    """Log exception recursively.

    Parameters
    ----------
    exc
        The exception to log.
    level
        An optional logging level.
    """
    if exc.__cause__:
        log_exception(exc.__cause__, level)
    logger.log(level, str(exc))


def relative_path(path: Union[Path, str]) -> Path:
    """Get the relative path from the current directory if possible."""
    if not isinstance(path, Path):
        path = Path(path)
    try:
        return path.relative_to(Path.cwd())
    except ValueError:
        return path


def format_fraction(value: Fraction) -> str:
    """Format an exact rational as ``num/den`` in lowest terms."""
    return f"{value.numerator}/{value.denominator}"


def falling_factorial(n: int, k: int) -> int:
    """Return ``n (n - 1) ... (n - k + 1)``, zero when ``k > n``."""
    result = 1
    for i in range(k):
        result *= n - i
    return result


def colex_combinations(n: int, k: int) -> Iterator[Tuple[int, ...]]:
    """Iterate the ``k``-subsets of ``[n]`` in colexicographic order.

    Subsets are yielded as increasing tuples. The order compares the
    largest elements first, so every subset of ``[n - 1]`` comes before
    any subset containing ``n``.
    """
    if k == 0:
        yield ()
        return
    for top in range(k, n + 1):
        for rest in colex_combinations(top - 1, k - 1):
            yield (*rest, top)
