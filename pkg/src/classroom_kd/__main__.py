# -*- coding: utf-8 -*-
"""
Entry point: ``ckd`` console script and ``python -m classroom_kd``.
"""
import sys

from classroom_kd.cli import run


def main():
    """Run the CLI and exit with its status."""
    sys.exit(run())


if __name__ == "__main__":
    main()
