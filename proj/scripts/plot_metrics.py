#!/usr/bin/env python3
"""Render a metrics.csv time series: demand, fid, violations and workers."""
import argparse
import csv
import sys


def read_metrics(path):
    with open(path, newline="") as f:
        rows = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(rows))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("metrics")
    ap.add_argument("--out", default="metrics.png")
    args = ap.parse_args()

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        sys.exit("matplotlib is not installed")

    rows = read_metrics(args.metrics)
    t = [float(r["start_s"]) for r in rows]
    worker_cols = [c for c in rows[0] if c.startswith("workers:")]

    fig, ax = plt.subplots(4, 1, sharex=True, figsize=(8, 9))
    ax[0].plot(t, [float(r["demand_qps"]) for r in rows])
    ax[0].set_ylabel("demand (qps)")
    ax[1].plot(t, [float(r["fid"]) if r["fid"] else float("nan") for r in rows])
    ax[1].set_ylabel("fid proxy")
    ax[2].plot(t, [float(r["slo_violation_ratio"]) for r in rows])
    ax[2].set_ylabel("slo violations")
    ax[3].stackplot(t, *[[float(r[c]) for r in rows] for c in worker_cols],
                    labels=[c.split(":", 1)[1] for c in worker_cols])
    ax[3].set_ylabel("workers")
    ax[3].set_xlabel("time (s)")
    ax[3].legend(loc="upper right", fontsize="small")
    fig.tight_layout()
    fig.savefig(args.out)


if __name__ == "__main__":
    main()
