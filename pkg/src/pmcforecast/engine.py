"""Online recognition and forecasting over (optionally partitioned) streams."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .forecast import ForecastInterval, ForecastTable
from .metrics import StatsAccumulator, score_match
from .pattern import Alphabet, UnknownSymbolError, format_pattern, parse_pattern
from .pmc import Pmc, pattern_digest


class StreamOrderError(ValueError):
    pass


class ModelMismatchError(ValueError):
    pass


@dataclass(slots=True)
class Event:
    symbol: str
    partition_key: str | None = None
    index: int | None = None
    ground_truth: bool | None = None


@dataclass
class EngineConfig:
    pattern: str
    alphabet: Sequence[str]
    order: int = 0
    p_fc: float = 0.5
    ms: int | None = None
    warmup_count: int = 0
    horizon: int = 200
    smoothing: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.p_fc <= 1.0:
            raise ValueError(f"p_fc={self.p_fc} not in (0, 1]")
        if self.order < 0:
            raise ValueError("order must be non-negative")
        if self.warmup_count < 0:
            raise ValueError("warmup_count must be non-negative")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.ms is not None and self.ms < 0:
            raise ValueError("ms must be non-negative")
        self.alphabet = tuple(self.alphabet)

    def canonical_pattern(self) -> str:
        return format_pattern(parse_pattern(self.pattern, Alphabet(self.alphabet)))


@dataclass
class RunState:
    partition_key: str | None
    current_state: int = 0
    pending: list[tuple[int, int]] = field(default_factory=list)
    last_index: int = -1
    label: bool | None = None


@dataclass(frozen=True)
class EngineOutput:
    partition_key: str | None
    index: int
    symbol: str
    state: int
    forecast: ForecastInterval | None
    is_match: bool


@dataclass
class EndReport:
    incorrect: int
    discarded: int
    final_states: dict


class Engine:
    """Runs the pattern over a stream, one run per partition key.

    All runs share the model's transition table and the forecast table.
    Calls must be serialized; shard partitions across engines to scale.
    """

    def __init__(self, config: EngineConfig, model: Pmc, table: ForecastTable):
        dfa = model.dfa
        if tuple(config.alphabet) != dfa.alphabet.symbols:
            raise ModelMismatchError("alphabet differs from the model's")
        if config.order != dfa.order:
            raise ModelMismatchError(f"order {config.order} != model order {dfa.order}")
        if model.pattern and pattern_digest(config.canonical_pattern()) != pattern_digest(
            model.pattern
        ):
            raise ModelMismatchError("pattern differs from the model's")
        if table.n_states != dfa.n_states:
            raise ModelMismatchError("forecast table does not belong to this model")
        self.config = config
        self.model = model
        self.table = table
        self.runs: dict[str | None, RunState] = {}
        self.stats = StatsAccumulator(dfa.n_states)
        self._rows = dfa.delta.tolist()
        self._index = dfa.alphabet._index
        self._final = [q in dfa.finals for q in range(dfa.n_states)]
        self._restart = [dfa.restart.get(q, 0) for q in range(dfa.n_states)]
        self._starts, self._ends = table.lookup_arrays()

    def _run(self, key) -> RunState:
        run = self.runs.get(key)
        if run is None:
            run = self.runs[key] = RunState(key)
        return run

    def _match(self, run: RunState, index: int, label: bool | None) -> None:
        self.stats.matches += 1
        score_match(run.pending, index, self.table, label, self.stats)
        run.pending = []
        run.label = None

    def process_event(self, event: Event) -> EngineOutput:
        try:
            e = self._index[event.symbol]
        except KeyError:
            raise UnknownSymbolError(event.symbol) from None
        run = self._run(event.partition_key)
        index = event.index
        if index is None:
            index = run.last_index + 1
        elif index <= run.last_index:
            raise StreamOrderError(
                f"index {index} after {run.last_index} in partition {event.partition_key!r}"
            )
        run.last_index = index
        if event.ground_truth is not None:
            run.label = bool(run.label) or bool(event.ground_truth)
        self.stats.events += 1
        state = self._rows[run.current_state][e]
        if self._final[state]:
            self._match(run, index, run.label)
            run.current_state = self._restart[state]
            return EngineOutput(event.partition_key, index, event.symbol, state, None, True)
        run.current_state = state
        if self._starts[state] > 0:
            run.pending.append((index, state))
            self.stats.issued[state] += 1
            forecast = self.table[state]
        else:
            self.stats.no_forecast[state] += 1
            forecast = None
        return EngineOutput(event.partition_key, index, event.symbol, state, forecast, False)

    def process(self, events: Iterable[Event]):
        for event in events:
            yield self.process_event(event)

    def consume(self, codes: Iterable[int], key: str | None = None) -> int:
        """Feed alphabet positions to one run without building output records."""
        run = self._run(key)
        rows = self._rows
        final = self._final
        restart = self._restart
        starts = self._starts
        issued = self.stats.issued
        no_forecast = self.stats.no_forecast
        state = run.current_state
        pending = run.pending
        t = run.last_index
        first = t
        for e in codes:
            t += 1
            state = rows[state][e]
            if final[state]:
                run.pending = pending
                self._match(run, t, None)
                pending = run.pending
                state = restart[state]
            elif starts[state] > 0:
                pending.append((t, state))
                issued[state] += 1
            else:
                no_forecast[state] += 1
        run.pending = pending
        run.current_state = state
        run.last_index = t
        self.stats.events += t - first
        return t - first

    def finish(self) -> EndReport:
        """Score forecasts whose window closed unmatched; drop still-open ones."""
        incorrect = discarded = 0
        for run in self.runs.values():
            for issued_at, state in run.pending:
                if issued_at + self._ends[state] <= run.last_index:
                    self.stats.incorrect[state] += 1
                    incorrect += 1
                else:
                    self.stats.discarded[state] += 1
                    discarded += 1
            run.pending = []
        return EndReport(
            incorrect,
            discarded,
            {key: run.current_state for key, run in self.runs.items()},
        )


def create_engine(config: EngineConfig, model: Pmc, table: ForecastTable) -> Engine:
    return Engine(config, model, table)
