"""The command line module."""
import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Callable
from typing import Dict
from typing import List
from typing import Optional
from typing import TextIO

import colorlog
import numpy as np
from pydantic import ValidationError

from . import __version__
from .coding import decode
from .coding import encode
from .config import CONFIG_FILE
from .config import CONFIG_HELP
from .config import Config
from .config import parse_config
from .config import sample_config
from .error import DomainError
from .error import FormatError
from .error import InvalidConfigFileError
from .error import InvalidUtf8FileError
from .error import InvalidYamlFileError
from .error import RelationalLimitsError
from .error import ResourceError
from .file import dump_family
from .file import dump_structure
from .file import open_output
from .file import parse_signature
from .file import read_family
from .file import read_limit
from .file import read_structure
from .file import write_convergence_csv
from .file import write_frontier_csv
from .file import write_removal_csv
from .file import write_text
from .hyperpartition import equitability_delta
from .hyperpartition import hyperpartition_from_seed
from .limit import convergence_experiment
from .limit import estimate_embedding_measure
from .limit import induced_density
from .limit import keyed_seed
from .limit import limit_distance
from .limit import realize
from .limit import sample_seed
from .limit import sample_structure
from .removal import ForbiddenFamily
from .removal import Generator
from .removal import distance_d
from .removal import frontier
from .removal import greedy_removal
from .removal import limit_generator
from .removal import planted_generator
from .removal import removal_experiment
from .structures import DENSITY_FUNCTIONS
from .structures import automorphism_count
from .structures import isomorphism_types
from .utils import format_fraction
from .utils import log_exception

logger = logging.getLogger(__name__)

Command = Callable[[argparse.Namespace, Config], int]

SEED_LIMIT = 2**64

EXIT_STATUS: Dict[type, int] = {
    FormatError: 2,
    InvalidUtf8FileError: 2,
    InvalidYamlFileError: 2,
    InvalidConfigFileError: 2,
    DomainError: 1,
    ResourceError: 1,
}


def _seed(args: argparse.Namespace, config: Config) -> int:
    if args.seed is None:
        return config.sampling.seed
    if not 0 <= args.seed < SEED_LIMIT:
        raise DomainError(f"Seed must be an unsigned 64-bit integer, got {args.seed}")
    return args.seed


def _trials(args: argparse.Namespace, config: Config) -> int:
    return config.sampling.trials if args.trials is None else args.trials


def _open_output(path: Optional[str]) -> TextIO:
    if path is None:
        return sys.stdout
    return open_output(path)


def _density(args: argparse.Namespace, config: Config) -> int:
    m = read_structure(args.M)
    n = read_structure(args.N)
    print(format_fraction(DENSITY_FUNCTIONS[args.kind](m, n)))
    return 0


def _encode(args: argparse.Namespace, config: Config) -> int:
    write_text(dump_family(encode(read_structure(args.N))), args.out, sys.stdout)
    return 0


def _decode(args: argparse.Namespace, config: Config) -> int:
    write_text(dump_structure(decode(read_family(args.family))), args.out, sys.stdout)
    return 0


def _sample(args: argparse.Namespace, config: Config) -> int:
    limit = read_limit(args.limit)
    seed = _seed(args, config)
    if args.sequential:
        n = sample_structure(limit, args.m, np.random.default_rng(seed))
    else:
        n = realize(limit, args.m, keyed_seed(args.m, limit.signature.r_max, seed))
    write_text(dump_structure(n), args.out, sys.stdout)
    return 0


def _dist(args: argparse.Namespace, config: Config) -> int:
    print(format_fraction(distance_d(read_structure(args.M), read_structure(args.N))))
    return 0


def _limit_density(args: argparse.Namespace, config: Config) -> int:
    m = read_structure(args.M)
    limit = read_limit(args.limit)
    print(format_fraction(induced_density(m, limit, config.oracle.coloring_budget)))
    if args.trials is not None:
        rng = np.random.default_rng(_seed(args, config))
        estimate = estimate_embedding_measure(m, limit, args.trials, rng) * (
            math.factorial(m.size) / automorphism_count(m)
        )
        print(f"{float(estimate):.6f} ({args.trials} trials)")
    return 0


def _converge(args: argparse.Namespace, config: Config) -> int:
    rows = convergence_experiment(
        read_limit(args.limit),
        args.k,
        args.sizes,
        _trials(args, config),
        _seed(args, config),
        config.oracle.coloring_budget,
        config.oracle.type_budget,
    )
    stream = _open_output(args.out)
    try:
        write_convergence_csv(rows, stream)
    finally:
        if stream is not sys.stdout:
            stream.close()
    return 0


def _hpcheck(args: argparse.Namespace, config: Config) -> int:
    rng = np.random.default_rng(_seed(args, config))
    seed = sample_seed(args.ground, args.levels, rng)
    delta = equitability_delta(hyperpartition_from_seed(seed, args.resolution))
    print(f"{format_fraction(delta)} {float(delta):.6f}")
    return 0


def _family(paths: List[str], cap: Optional[int]) -> ForbiddenFamily:
    members = tuple(read_structure(path) for path in paths)
    if not members:
        raise DomainError("A forbidden family needs a language, give at least one member")
    try:
        return ForbiddenFamily(signature=members[0].signature, members=members, cap=cap)
    except ValidationError as exc:
        raise DomainError("Invalid forbidden family") from exc


def _cap(args: argparse.Namespace, config: Config) -> Optional[int]:
    return config.removal.cap if args.cap is None else args.cap


def _remove(args: argparse.Namespace, config: Config) -> int:
    n = read_structure(args.N)
    family = _family(args.family, _cap(args, config))
    repaired, report = greedy_removal(
        n,
        family,
        budget=config.removal.budget if args.budget is None else args.budget,
        epsilon=config.removal.epsilon if args.epsilon is None else args.epsilon,
        preserve_symmetry=config.removal.preserve_symmetry,
        most_copies=config.removal.most_copies,
    )
    for key, count in report.edits.items():
        logger.info("%s: %d edits", key.label(n.signature), count)
    if not report.success:
        logger.warning("No family free structure found in %d iterations", report.iterations)
    logger.info(
        "distance %s after %d iterations", format_fraction(report.distance), report.iterations
    )
    write_text(dump_structure(repaired), args.out, sys.stdout)
    return 0


def _removal_exp(args: argparse.Namespace, config: Config) -> int:
    family = _family(args.family, _cap(args, config))
    generator: Generator
    if args.base is not None:
        generator = planted_generator(
            read_structure(args.base), args.toggles, config.removal.preserve_symmetry
        )
    elif args.limit is not None:
        if args.m is None:
            raise DomainError("--m is needed to sample from a limit")
        generator = limit_generator(read_limit(args.limit), args.m)
    else:
        raise DomainError("Either --base or --limit is needed")
    rows = removal_experiment(
        family,
        config.removal.epsilon if args.epsilon is None else args.epsilon,
        generator,
        _trials(args, config),
        _seed(args, config),
        budget=config.removal.budget,
        preserve_symmetry=config.removal.preserve_symmetry,
        sample_limit=config.removal.sample_limit,
        most_copies=config.removal.most_copies,
    )
    stream = _open_output(args.out)
    try:
        write_removal_csv(rows, stream)
    finally:
        if stream is not sys.stdout:
            stream.close()
    if args.frontier is not None:
        with open_output(args.frontier) as output:
            write_frontier_csv(frontier(rows), output)
    return 0


def _types(args: argparse.Namespace, config: Config) -> int:
    signature = parse_signature(args.lang)
    documents = [
        f"# type {i}\n{dump_structure(m)}"
        for i, m in enumerate(isomorphism_types(signature, args.k, config.oracle.type_budget))
    ]
    write_text("".join(documents), args.out, sys.stdout)
    return 0


def _limit_dist(args: argparse.Namespace, config: Config) -> int:
    print(format_fraction(limit_distance(read_limit(args.first), read_limit(args.second))))
    return 0


def _add_seed(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, help="seed of the random streams")


def _add_trials(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--trials", type=int, help="number of random trials")


def _add_out(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", help="output file (default: standard output)")


def _add_removal(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--family", nargs="+", required=True, help="structure files of the forbidden family"
    )
    parser.add_argument("--cap", type=int, help="largest member size considered")
    parser.add_argument("--epsilon", type=float, help="distance budget")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relational-limits",
        description="Densities, limits and removal for finite relational structures.",
        epilog=f"{CONFIG_HELP}.",
    )

    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="show debug logs")

    parser.add_argument(
        "--no-color",
        action="store_false",
        dest="color",
        help="do not colorize the output",
    )

    parser.add_argument(
        "-c",
        "--config",
        default=CONFIG_FILE,
        help="specify an alternate configuration file",
    )

    parser.add_argument(
        "--sample-config", action="store_true", help=f"print a sample {CONFIG_FILE}"
    )

    commands = parser.add_subparsers(dest="command", metavar="command")

    density = commands.add_parser("density", help="print a density of M in N")
    density.add_argument("--kind", choices=sorted(DENSITY_FUNCTIONS), default="p")
    density.add_argument("-M", required=True, help="structure file of the pattern")
    density.add_argument("-N", required=True, help="structure file of the host")
    density.set_defaults(func=_density)

    encode_parser = commands.add_parser("encode", help="print the coded family of N")
    encode_parser.add_argument("-N", required=True, help="structure file")
    _add_out(encode_parser)
    encode_parser.set_defaults(func=_encode)

    decode_parser = commands.add_parser("decode", help="print the structure of a coded family")
    decode_parser.add_argument("family", help="coded family file")
    _add_out(decode_parser)
    decode_parser.set_defaults(func=_decode)

    sample = commands.add_parser("sample", help="sample a structure from a step limit")
    sample.add_argument("--limit", required=True, help="step limit file")
    sample.add_argument("--m", type=int, required=True, help="universe size")
    sample.add_argument(
        "--sequential",
        action="store_true",
        help="draw seed values in sequence instead of keying them by subset",
    )
    _add_seed(sample)
    _add_out(sample)
    sample.set_defaults(func=_sample)

    dist = commands.add_parser("dist", help="print the edit distance of M and N")
    dist.add_argument("-M", required=True, help="structure file")
    dist.add_argument("-N", required=True, help="structure file")
    dist.set_defaults(func=_dist)

    limit_density = commands.add_parser(
        "limit-density", help="print the exact induced density of M in a step limit"
    )
    limit_density.add_argument("-M", required=True, help="structure file")
    limit_density.add_argument("--limit", required=True, help="step limit file")
    limit_density.add_argument(
        "--trials", type=int, help="also print a Monte Carlo estimate over this many seeds"
    )
    _add_seed(limit_density)
    limit_density.set_defaults(func=_limit_density)

    converge = commands.add_parser(
        "converge", help="compare sampled and exact induced densities (CSV)"
    )
    converge.add_argument("--limit", required=True, help="step limit file")
    converge.add_argument("--k", type=int, default=3, help="largest pattern size")
    converge.add_argument(
        "--sizes", type=int, nargs="+", default=[4, 9, 16], help="sampled universe sizes"
    )
    _add_trials(converge)
    _add_seed(converge)
    _add_out(converge)
    converge.set_defaults(func=_converge)

    hpcheck = commands.add_parser(
        "hpcheck", help="print the equitability of a random hyperpartition"
    )
    hpcheck.add_argument("--ground", type=int, required=True, help="ground set size")
    hpcheck.add_argument("--levels", type=int, default=2, help="number of subset levels")
    hpcheck.add_argument("--resolution", type=int, default=2, help="number of colors")
    _add_seed(hpcheck)
    hpcheck.set_defaults(func=_hpcheck)

    remove = commands.add_parser("remove", help="repair N into a family free structure")
    remove.add_argument("-N", required=True, help="structure file")
    _add_removal(remove)
    remove.add_argument("--budget", type=int, help="maximum number of iterations")
    _add_out(remove)
    remove.set_defaults(func=_remove)

    removal_exp = commands.add_parser(
        "removal-exp", help="run the removal experiment (CSV)"
    )
    _add_removal(removal_exp)
    removal_exp.add_argument("--base", help="structure file to perturb")
    removal_exp.add_argument("--toggles", type=int, default=1, help="tuples toggled")
    removal_exp.add_argument("--limit", help="step limit file to sample from")
    removal_exp.add_argument("--m", type=int, help="sampled universe size")
    removal_exp.add_argument("--frontier", help="also write the frontier CSV here")
    _add_trials(removal_exp)
    _add_seed(removal_exp)
    _add_out(removal_exp)
    removal_exp.set_defaults(func=_removal_exp)

    types = commands.add_parser("types", help="print the isomorphism types of size k")
    types.add_argument("--lang", required=True, help="symbols, for example 'R/2 S/1'")
    types.add_argument("--k", type=int, required=True, help="universe size")
    _add_out(types)
    types.set_defaults(func=_types)

    limit_dist = commands.add_parser(
        "limit-dist", help="print the distance of two step limits"
    )
    limit_dist.add_argument("first", help="step limit file")
    limit_dist.add_argument("second", help="step limit file")
    limit_dist.set_defaults(func=_limit_dist)

    return parser


def relational_limits_cli(argv: Optional[List[str]] = None) -> int:
    """Entry point for the command line.

    Parameters
    ----------
    argv: list of str, optional
        List of command line arguments.

    Returns
    -------
    int
        The value to be returned by the CLI executable: 1 for domain and
        resource errors, 2 for format and configuration errors.
    """
    parser = _parser()
    args = parser.parse_args(args=argv)

    logging_format = "%(levelname)-8s %(message)s"
    logging_level = logging.DEBUG if args.verbose else logging.INFO

    if args.color:
        logging_handler = colorlog.StreamHandler()
        logging_handler.setFormatter(
            colorlog.ColoredFormatter(f"%(log_color)s{logging_format}")
        )
        logging.basicConfig(handlers=[logging_handler], level=logging_level)
    else:
        logging.basicConfig(format=logging_format, level=logging_level)

    try:
        if args.sample_config:
            sample_config(sys.stdout)
            return 0

        if args.command is None:
            parser.print_usage(sys.stderr)
            logger.critical("A command is required")
            return 2

        config = parse_config(Path(args.config))
        command: Command = args.func
        return command(args, config)

    except RelationalLimitsError as exc:
        log_exception(exc, level=logging.CRITICAL)
        return next(
            (status for kind, status in EXIT_STATUS.items() if isinstance(exc, kind)), 1
        )

    except (KeyboardInterrupt, EOFError) as exc:
        raise SystemExit("Cancelled by user") from exc
