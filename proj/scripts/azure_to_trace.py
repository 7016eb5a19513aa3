#!/usr/bin/env python3
"""Aggregate an Azure Functions invocation CSV into a start_s,qps trace.

Expects the public per-minute layout: one row per function with columns
"1".."1440" holding invocation counts. Counts are summed over all rows and
divided by 60 to give queries per second per minute bucket.
"""
import argparse
import csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("invocations")
    ap.add_argument("--start-minute", type=int, default=1)
    ap.add_argument("--minutes", type=int, default=30)
    ap.add_argument("--out", default="trace.csv")
    args = ap.parse_args()

    cols = [str(m) for m in range(args.start_minute, args.start_minute + args.minutes)]
    totals = [0.0] * len(cols)
    with open(args.invocations, newline="") as f:
        for row in csv.DictReader(f):
            for i, c in enumerate(cols):
                totals[i] += float(row.get(c) or 0)

    with open(args.out, "w") as out:
        out.write(f"# duration_s={60 * len(cols)}\n")
        out.write("start_s,qps\n")
        for i, n in enumerate(totals):
            out.write(f"{60 * i},{n / 60.0:.6g}\n")


if __name__ == "__main__":
    main()
