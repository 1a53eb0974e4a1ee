"""Command line interface for the package.

This file is for compatibility only.
"""
from .cli import relational_limits_cli

if __name__ == "__main__":
    raise SystemExit(relational_limits_cli())
