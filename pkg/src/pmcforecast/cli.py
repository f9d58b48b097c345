"""Command-line front end: compile, learn, run, validate, report."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from contextlib import contextmanager

import numpy as np

from . import metrics
from .engine import Engine, EngineConfig
from .forecast import build_forecast_table, table_rows
from .pattern import PatternError
from .pipeline import compile_config, evaluate, learn, split_stream
from .pmc import (
    ModelFormatError,
    estimate_matrix,
    load_compiled,
    load_model,
    save_compiled,
    save_model,
    waiting_times,
    warm_up,
)
from .streams import OutputWriter, RunConfig, load_config
from .synthgen import generate, generate_codes

log = logging.getLogger("pmcforecast")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _words(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


@contextmanager
def _open_out(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _config(args) -> RunConfig:
    overrides = {
        "pattern": args.pattern,
        "alphabet": args.alphabet,
        "order": args.order,
        "p_fc": args.p_fc,
        "ms": args.ms,
        "warmup_count": args.warmup,
        "horizon": args.horizon,
        "smoothing": args.smoothing,
        "input": getattr(args, "input", None),
        "model": getattr(args, "model", None),
        "output": getattr(args, "output", None),
        "report": getattr(args, "report", None),
        "table": getattr(args, "table", None),
        "orders": getattr(args, "orders", None),
    }
    if getattr(args, "dedupe", False):
        overrides["dedupe"] = True
    return load_config(args.config, overrides)


def _stream(cfg: RunConfig):
    if cfg.input is not None:
        return cfg.read_events()
    if cfg.generator is not None:
        if tuple(cfg.generator.alphabet) != tuple(cfg.alphabet):
            raise ValueError("generator alphabet differs from the configured alphabet")
        return generate(cfg.generator)
    raise ValueError("no input file or generator configured")


def cmd_compile(args) -> int:
    cfg = _config(args)
    dfa, pattern = compile_config(cfg.engine_config())
    if cfg.model:
        save_compiled(dfa, pattern, cfg.model)
    print(f"pattern: {pattern}")
    print(f"order: {dfa.order}")
    print(f"states: {dfa.n_states}")
    print(f"finals: {' '.join(map(str, sorted(dfa.finals)))}")
    for origin, copies in sorted(dfa.clusters().items()):
        tags = " ".join(f"{q}[{dfa.tag_text(q)}]" for q in copies)
        print(f"cluster {origin}: {tags}")
    return 0


def cmd_learn(args) -> int:
    cfg = _config(args)
    ecfg = cfg.engine_config()
    if args.compiled:
        dfa, pattern = load_compiled(args.compiled)
        if dfa.order != ecfg.order or dfa.alphabet.symbols != tuple(ecfg.alphabet):
            raise ModelFormatError("compiled automaton does not match the configuration")
    else:
        dfa, pattern = compile_config(ecfg)
    events = _stream(cfg)
    if len(events) < ecfg.warmup_count:
        raise ValueError(f"stream has {len(events)} events, warm-up needs {ecfg.warmup_count}")
    if ecfg.warmup_count == 0:
        log.warning("warm-up is empty: every row of the model is uniform")
    counts = warm_up(dfa, events, ecfg.warmup_count)
    pmc = estimate_matrix(counts, dfa, ecfg.smoothing, pattern=pattern)
    if cfg.model:
        save_model(pmc, cfg.model)
    print(f"states: {dfa.n_states}")
    print(f"warm-up events: {counts.events}")
    for q in range(dfa.n_states):
        print(f"visits {q} [{dfa.tag_text(q)}]: {int(counts.visits[q])}")
    unvisited = [q for q in range(dfa.n_states) if counts.visits[q] == 0]
    print(f"unvisited: {' '.join(map(str, unvisited)) if unvisited else '-'}")
    if cfg.table:
        dists = waiting_times(pmc, ecfg.horizon)
        with _open_out(cfg.table) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["p_fc", "state", "origin", "suffix", "start", "end", "probability"])
            for p_fc in cfg.p_fc:
                table = build_forecast_table(pmc, p_fc, ecfg.ms, ecfg.horizon, dists)
                for row in table_rows(table, pmc):
                    w.writerow([repr(p_fc)] + row)
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    if not cfg.model:
        raise ValueError("run needs --model")
    pmc = load_model(cfg.model)
    ecfg = cfg.engine_config()
    events = _stream(cfg)
    _, evaluation = split_stream(events, cfg.warmup_count)
    dists = waiting_times(pmc, ecfg.horizon)
    sweep = len(cfg.p_fc) > 1
    reports = []
    with _open_out(cfg.output) as out_fh:
        writer = OutputWriter(out_fh, cfg.dedupe, p_fc=cfg.p_fc[0] if sweep else None)
        for p_fc in cfg.p_fc:
            table = build_forecast_table(pmc, p_fc, ecfg.ms, ecfg.horizon, dists)
            engine = Engine(cfg.engine_config(p_fc), pmc, table)
            writer.reset(p_fc if sweep else None)
            t0 = time.perf_counter()
            for ev in evaluation:
                writer.write(engine.process_event(ev))
            end = engine.finish()
            elapsed = time.perf_counter() - t0
            rate = engine.stats.events / elapsed if elapsed > 0 else float("inf")
            rep = metrics.report(engine.stats, table, pmc.dfa)
            reports.append((p_fc, rep))
            prec = "N/A" if rep.precision is None else f"{rep.precision:.4f}"
            print(
                f"p_fc={p_fc}: {rep.events} events, {rep.matches} matches, precision {prec}, "
                f"{end.incorrect} expired, {end.discarded} discarded, {rate:.0f} events/sec",
                file=sys.stderr,
            )
    if cfg.report:
        with _open_out(cfg.report) as fh:
            metrics.write_report(reports, fh)
    return 0


VALIDATE_HEADER = [
    "order", "p_fc", "baseline", "precision", "precision_gt", "mean_spread",
    "mean_distance", "scored", "matches", "dead_zones",
]


def validation_rows(cfg: RunConfig, orders: list[int]) -> list[list]:
    if cfg.generator is None:
        raise ValueError("validate needs a generator spec")
    codes = generate_codes(cfg.generator)
    warm, rest = codes[: cfg.warmup_count], codes[cfg.warmup_count :]
    rows = []
    for m in orders:
        ecfg = cfg.engine_config(order=m)
        pmc = learn(ecfg, warm)
        for ev in evaluate(pmc, ecfg, cfg.p_fc, np.asarray(rest)):
            r = ev.report
            rows.append([
                m, repr(ev.p_fc), repr(ev.p_fc), metrics.format_value(r.precision),
                metrics.format_value(r.precision_gt), metrics.format_value(r.mean_spread),
                metrics.format_value(r.mean_distance), r.correct + r.incorrect, r.matches,
                len(r.dead_zones),
            ])
    return rows


def cmd_validate(args) -> int:
    cfg = _config(args)
    orders = cfg.orders if cfg.orders is not None else [cfg.order]
    rows = validation_rows(cfg, orders)
    with _open_out(cfg.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VALIDATE_HEADER)
        w.writerows(rows)
    return 0


def cmd_report(args) -> int:
    with open(args.report_file, newline="") as fh:
        rows = metrics.read_report(fh)
    by_fc: dict[str, list[dict]] = {}
    for row in rows:
        by_fc.setdefault(row["p_fc"], []).append(row)
    for p_fc, group in by_fc.items():
        agg = {r["metric"]: r["value"] for r in group if r["scope"] == "aggregate"}
        print(f"== p_fc={p_fc}")
        print(
            "aggregate: precision={precision} precision_gt={precision_gt} "
            "spread={mean_spread} distance={mean_distance} issued={issued} "
            "matches={matches}".format(**{k: agg.get(k, "N/A") for k in (
                "precision", "precision_gt", "mean_spread", "mean_distance",
                "issued", "matches")})
        )
        states: dict[tuple, dict] = {}
        for r in group:
            if r["scope"] == "state":
                key = (int(r["origin"]), int(r["state"]), r["suffix"])
                states.setdefault(key, {})[r["metric"]] = r["value"]
        current = None
        for (origin, state, suffix), vals in sorted(states.items()):
            if origin != current:
                print(f"origin {origin}:")
                current = origin
            flag = "  DEAD ZONE" if vals.get("dead_zone") == "1" else ""
            print(
                f"  state {state} [{suffix}] precision={vals.get('precision')} "
                f"spread={vals.get('mean_spread')} distance={vals.get('mean_distance')} "
                f"issued={vals.get('issued')}{flag}"
            )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmcforecast",
        description="Recognize and forecast regular-expression patterns over event streams.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, stream=True):
        p.add_argument("--config", "-c", help="YAML/JSON run configuration")
        p.add_argument("--pattern", help="pattern, e.g. 'a;(a+b)*;c'")
        p.add_argument("--alphabet", type=_words, help="comma-separated event types")
        p.add_argument("--order", "-m", type=int, help="memory order m")
        p.add_argument("--p-fc", dest="p_fc", type=_floats, help="threshold(s), comma-separated")
        p.add_argument("--ms", type=int, help="maximum spread")
        p.add_argument("--warmup", type=int, help="warm-up event count")
        p.add_argument("--horizon", type=int, help="waiting-time horizon cap")
        p.add_argument("--smoothing", type=float, help="additive smoothing")
        if stream:
            p.add_argument("--input", "-i", help="event file")

    p = sub.add_parser("compile", help="build the automaton")
    common(p, stream=False)
    p.add_argument("--model", "-o", help="write compiled automaton here")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("learn", help="estimate the chain from the warm-up prefix")
    common(p)
    p.add_argument("--compiled", help="compiled automaton to start from")
    p.add_argument("--model", "-o", help="write the learned model here")
    p.add_argument("--table", help="write the forecast table here")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("run", help="recognize and forecast over a stream")
    common(p)
    p.add_argument("--model", help="learned model file")
    p.add_argument("--output", "-o", help="per-event output file")
    p.add_argument("--report", "-r", help="metrics report file")
    p.add_argument("--dedupe", action="store_true", help="collapse repeated output records")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="precision-vs-threshold on a synthetic stream")
    common(p, stream=False)
    p.add_argument("--orders", type=_ints, help="orders to compare, comma-separated")
    p.add_argument("--output", "-o", help="table output file (default stdout)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="summarize a metrics report file")
    p.add_argument("report_file")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        return args.func(args)
    except (PatternError, ModelFormatError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
