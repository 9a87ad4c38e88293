#!/usr/bin/env python3
"""Suboptimality bound harness over three coherent score distributions."""

import sys

from fairselect.cli import main

if __name__ == "__main__":
    for dist in ("comonotone", "gaussian:0.8", "independent"):
        code = main(
            [
                "bound-check",
                "--dist", dist,
                "--alpha1", "0.6",
                "--alpha2", "0.3",
                "--replicates", "2000",
                "--pool-size", "200",
                "--seed", "99",
            ]
        )
        if code != 0:
            sys.exit(code)
