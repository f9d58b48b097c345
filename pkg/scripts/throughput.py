"""Events per second for the same pattern compiled at several orders.

A 16-letter first-order source feeds an eight-symbol sequence pattern, so
the automaton grows with the order while the per-event work should not.

Usage::

    python3 scripts/throughput.py --events 2000000 --orders 0 1 2 3
"""

from __future__ import annotations

import argparse
import string
import time

from pmcforecast.engine import Engine, EngineConfig
from pmcforecast.forecast import build_forecast_table
from pmcforecast.pipeline import learn
from pmcforecast.synthgen import GeneratorSpec, generate_codes


def cyclic_source(k: int, stay: float, seed: int, length: int) -> GeneratorSpec:
    sigma = tuple(string.ascii_lowercase[:k])
    table = {}
    for i, x in enumerate(sigma):
        p = [(1 - stay) / (k - 1)] * k
        p[(i + 1) % k] = stay
        table[(x,)] = tuple(p)
    return GeneratorSpec(sigma, 1, table, seed, length)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=10_000_000)
    ap.add_argument("--orders", nargs="+", type=int, default=[1, 2])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--p-fc", type=float, default=0.5)
    args = ap.parse_args()

    spec = cyclic_source(16, 0.8, 7, args.events)
    t0 = time.perf_counter()
    codes = generate_codes(spec).tolist()
    print(f"generated {len(codes)} events in {time.perf_counter() - t0:.1f}s")
    pattern = ";".join(spec.alphabet[:8])

    engines = {}
    for m in args.orders:
        cfg = EngineConfig(pattern, spec.alphabet, m, args.p_fc, None, 100_000, 200)
        pmc = learn(cfg, codes)
        engines[m] = (cfg, pmc, build_forecast_table(pmc, args.p_fc))

    # interleave orders so machine drift hits all of them alike
    best = dict.fromkeys(args.orders, 0.0)
    for _ in range(args.repeats):
        for m, parts in engines.items():
            eng = Engine(*parts)
            t0 = time.perf_counter()
            eng.consume(codes)
            best[m] = max(best[m], len(codes) / (time.perf_counter() - t0))
    top = max(best.values())
    for m in args.orders:
        n = engines[m][1].n_states
        print(f"m={m}  states={n:5d}  {best[m]:12,.0f} events/sec  ({best[m] / top:.0%} of best)")


if __name__ == "__main__":
    main()
