"""Joint-distribution check of the sampler on a small intercept-only model.

    python3 scripts/run_geweke.py [--draws 50000] [--seed 4] [--na 4 --ne 3 --t 1]
"""
import argparse
import time

from amenet.geweke import geweke_test


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--draws", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=4)
    p.add_argument("--na", type=int, default=4)
    p.add_argument("--ne", type=int, default=3)
    p.add_argument("--t", type=int, default=1)
    args = p.parse_args()
    t0 = time.perf_counter()
    res = geweke_test(args.na, args.ne, args.t, args.draws, seed=args.seed)
    for line in res.lines():
        print(line)
    print(f"{'passed' if res.passed(4.0) else 'FAILED'} (|z| < 4) in {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
