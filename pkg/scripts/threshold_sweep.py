"""Precision against forecast threshold for each config and automaton order.

Usage::

    python3 scripts/threshold_sweep.py
    python3 scripts/threshold_sweep.py configs/validate_abc.yaml --orders 1 2
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from pmcforecast.cli import validation_rows
from pmcforecast.streams import load_config

CONFIGS = sorted((Path(__file__).resolve().parents[1] / "configs").glob("validate_*.yaml"))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="*", type=Path, default=CONFIGS)
    ap.add_argument("--orders", nargs="+", type=int)
    args = ap.parse_args()

    for path in args.configs:
        cfg = load_config(str(path))
        orders = args.orders or cfg.orders or [cfg.order]
        t0 = time.perf_counter()
        rows = validation_rows(cfg, orders)
        print(f"\n{cfg.pattern}  ({path.name}, {time.perf_counter() - t0:.1f}s)")
        print(f"{'m':>2} {'p_fc':>5} {'precision':>10} {'gap':>8} {'spread':>7} {'scored':>8}")
        for m, p_fc, _, prec, _, spread, _, scored, *_ in rows:
            if prec == "N/A":
                print(f"{m:>2} {p_fc:>5} {'N/A':>10}")
                continue
            gap = float(prec) - float(p_fc)
            flag = "  <-- below" if gap < -0.03 else ""
            print(f"{m:>2} {p_fc:>5} {float(prec):>10.4f} {gap:>+8.4f} "
                  f"{float(spread):>7.2f} {scored:>8}{flag}")


if __name__ == "__main__":
    main()
