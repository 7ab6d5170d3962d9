#!/usr/bin/env python3
"""Time the compiled ADMM kernel against the pure-NumPy fallback.

Equivalent to ``hqplab bench-kernel``; kept as a standalone script so the
benchmark can run straight from a source checkout.
"""

import argparse

from hqplab.benchmark import run_benchmark


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=50,
                        help="number of random problems per kernel")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    for line in run_benchmark(n_problems=args.n, seed=args.seed):
        print(line)


if __name__ == "__main__":
    main()
