"""Compile, learn and evaluate in one place; used by the CLI and scripts."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .automata import Dfa, compile_pattern
from .engine import Engine, EngineConfig, EngineOutput, Event
from .forecast import ForecastTable, build_forecast_table
from .metrics import MetricsReport, report
from .pattern import Alphabet, format_pattern, parse_pattern
from .pmc import Pmc, estimate_matrix, waiting_times, warm_up


def compile_config(config: EngineConfig) -> tuple[Dfa, str]:
    alphabet = Alphabet(config.alphabet)
    ast = parse_pattern(config.pattern, alphabet)
    return compile_pattern(ast, alphabet, config.order), format_pattern(ast)


def learn(
    config: EngineConfig, stream: Sequence, dfa: Dfa | None = None
) -> Pmc:
    """Estimate the chain from the first ``config.warmup_count`` events."""
    if dfa is None:
        dfa, pattern = compile_config(config)
    else:
        pattern = config.canonical_pattern()
    counts = warm_up(dfa, stream, config.warmup_count)
    return estimate_matrix(counts, dfa, config.smoothing, pattern=pattern)


@dataclass
class Evaluation:
    p_fc: float
    table: ForecastTable
    report: MetricsReport
    events: int
    seconds: float


def evaluate(
    pmc: Pmc,
    config: EngineConfig,
    thresholds: Sequence[float],
    stream: Sequence,
    on_output: Callable[[float, EngineOutput], None] | None = None,
) -> list[Evaluation]:
    """Run the engine over ``stream`` once per forecast threshold.

    The waiting-time distributions are computed once; only the forecast table
    is rebuilt per threshold.  ``stream`` holds :class:`Event` objects, or is
    an integer array of alphabet positions for the single-run fast path.
    """
    dists = waiting_times(pmc, config.horizon)
    codes = isinstance(stream, np.ndarray)
    if codes:
        stream = stream.tolist()
    results = []
    for p_fc in thresholds:
        cfg = EngineConfig(
            config.pattern, config.alphabet, config.order, p_fc, config.ms,
            config.warmup_count, config.horizon, config.smoothing,
        )
        table = build_forecast_table(pmc, p_fc, config.ms, config.horizon, dists)
        engine = Engine(cfg, pmc, table)
        t0 = time.perf_counter()
        if codes:
            engine.consume(stream)
        elif on_output is None:
            for ev in stream:
                engine.process_event(ev)
        else:
            for ev in stream:
                on_output(p_fc, engine.process_event(ev))
        engine.finish()
        seconds = time.perf_counter() - t0
        results.append(
            Evaluation(p_fc, table, report(engine.stats, table, pmc.dfa), engine.stats.events, seconds)
        )
    return results


def split_stream(events: Sequence[Event], warmup_count: int) -> tuple[Sequence, Sequence]:
    if warmup_count > len(events):
        raise ValueError(f"stream has {len(events)} events, warm-up needs {warmup_count}")
    return events[:warmup_count], events[warmup_count:]
