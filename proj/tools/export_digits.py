#!/usr/bin/env python3
# Copyright 2026 The pcasim Authors
# SPDX-License-Identifier: Apache-2.0
"""Write the 8x8 handwritten digits dataset (1797 x 64) as a header-less CSV.

Uses the copy bundled with scikit-learn, so nothing is downloaded.
"""
import sys

from sklearn.datasets import load_digits


def main() -> int:
    if len(sys.argv) != 2:
        print("usage: export_digits.py OUT.csv", file=sys.stderr)
        return 1
    data = load_digits().data
    with open(sys.argv[1], "w", newline="\n") as f:
        for row in data:
            f.write(",".join(str(int(v)) for v in row) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
