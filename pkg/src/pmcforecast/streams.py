"""Event files, per-event output records and run configuration."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field, fields
from typing import Iterable, Iterator, Mapping, Sequence, TextIO

import yaml

from .engine import EngineConfig, EngineOutput, Event
from .synthgen import GeneratorSpec

log = logging.getLogger(__name__)

_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


class EventFormatError(ValueError):
    pass


def parse_bool(text: str) -> bool | None:
    t = text.strip().lower()
    if not t:
        return None
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise EventFormatError(f"not a boolean: {text!r}")


@dataclass
class SymbolMapper:
    """Rewrites raw event types to alphabet symbols; counts rejected ones."""

    alphabet: Sequence[str]
    mapping: Mapping[str, str] = field(default_factory=dict)
    on_unknown: str = "error"
    rejected: int = 0

    def __post_init__(self):
        if self.on_unknown not in ("error", "skip"):
            raise ValueError("on_unknown must be 'error' or 'skip'")
        self._known = set(self.alphabet)
        for raw, sym in self.mapping.items():
            if sym not in self._known:
                raise ValueError(f"mapping {raw!r} -> {sym!r}: target not in alphabet")

    def __call__(self, raw: str) -> str | None:
        sym = self.mapping.get(raw, raw)
        if sym in self._known:
            return sym
        self.rejected += 1
        if self.on_unknown == "error":
            raise EventFormatError(f"event type {raw!r} is not in the alphabet")
        return None


def read_events(
    fh: TextIO,
    mapper: SymbolMapper | None = None,
    symbol_field: str = "symbol",
    partition_field: str | None = "partition_key",
    ground_truth_field: str = "ground_truth",
) -> Iterator[Event]:
    """Parse ``symbol[,partition_key[,ground_truth]]`` lines.

    A first line with a cell named ``symbol_field`` is a header; columns are
    then picked by name, otherwise by position.  Blank lines and lines
    starting with ``#`` are ignored.
    """
    reader = csv.reader(fh)
    cols = None
    first = True
    for lineno, row in enumerate(reader, 1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        row = [c.strip() for c in row]
        if first:
            first = False
            if symbol_field in row:
                cols = {name: i for i, name in enumerate(row)}
                continue
        if cols is None:
            sym = row[0]
            key = row[1] if len(row) > 1 and row[1] != "" else None
            gt = row[2] if len(row) > 2 else ""
        else:
            sym = row[cols[symbol_field]]
            pi = cols.get(partition_field) if partition_field else None
            key = row[pi] if pi is not None and pi < len(row) and row[pi] != "" else None
            gi = cols.get(ground_truth_field)
            gt = row[gi] if gi is not None and gi < len(row) else ""
        try:
            label = parse_bool(gt)
        except EventFormatError as exc:
            raise EventFormatError(f"line {lineno}: {exc}") from None
        if mapper is not None:
            sym = mapper(sym)
            if sym is None:
                continue
        yield Event(sym, key, None, label)


def write_events(events: Iterable[Event], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["symbol", "partition_key", "ground_truth"])
    for ev in events:
        gt = "" if ev.ground_truth is None else str(int(ev.ground_truth))
        writer.writerow([ev.symbol, "" if ev.partition_key is None else ev.partition_key, gt])


OUTPUT_HEADER = [
    "partition", "index", "symbol", "state",
    "forecast_start", "forecast_end", "forecast_prob", "is_match",
]


class OutputWriter:
    """Per-event records; ``dedupe`` drops repeats of a run's previous record."""

    def __init__(self, fh: TextIO, dedupe: bool = False, p_fc: float | None = None):
        self.writer = csv.writer(fh, lineterminator="\n")
        header = OUTPUT_HEADER if p_fc is None else ["p_fc"] + OUTPUT_HEADER
        self.writer.writerow(header)
        self.dedupe = dedupe
        self.p_fc = p_fc
        self._last: dict = {}

    def reset(self, p_fc: float | None = None) -> None:
        """Start a new pass (e.g. the next threshold of a sweep)."""
        self.p_fc = p_fc
        self._last.clear()

    def write(self, out: EngineOutput) -> None:
        fc = out.forecast
        sig = (out.state, fc, out.is_match)
        if self.dedupe and not out.is_match and self._last.get(out.partition_key) == sig:
            return
        self._last[out.partition_key] = sig
        row = [
            "" if out.partition_key is None else out.partition_key,
            out.index,
            out.symbol,
            out.state,
            "" if fc is None else fc.start,
            "" if fc is None else fc.end,
            "" if fc is None else repr(fc.probability),
            int(out.is_match),
        ]
        if self.p_fc is not None:
            row.insert(0, repr(self.p_fc))
        self.writer.writerow(row)


@dataclass
class RunConfig:
    pattern: str
    alphabet: list[str]
    order: int = 0
    p_fc: list[float] = field(default_factory=lambda: [0.5])
    ms: int | None = None
    warmup_count: int = 0
    horizon: int = 200
    smoothing: float = 0.0
    input: str | None = None
    generator: GeneratorSpec | None = None
    partition_field: str | None = "partition_key"
    symbol_field: str = "symbol"
    ground_truth_field: str = "ground_truth"
    symbol_map: dict[str, str] = field(default_factory=dict)
    on_unknown: str = "error"
    orders: list[int] | None = None
    dedupe: bool = False
    model: str | None = None
    output: str | None = None
    report: str | None = None
    table: str | None = None

    def __post_init__(self):
        if isinstance(self.p_fc, (int, float)):
            self.p_fc = [float(self.p_fc)]
        self.p_fc = [float(p) for p in self.p_fc]
        if not self.p_fc:
            raise ValueError("p_fc sweep list is empty")
        for p in self.p_fc:
            if not 0.0 < p <= 1.0:
                raise ValueError(f"p_fc={p} not in (0, 1]")
        if isinstance(self.generator, Mapping):
            self.generator = GeneratorSpec.from_dict(self.generator)
        if self.input is not None and not os.path.exists(self.input):
            raise FileNotFoundError(self.input)

    def engine_config(self, p_fc: float | None = None, order: int | None = None) -> EngineConfig:
        return EngineConfig(
            pattern=self.pattern,
            alphabet=self.alphabet,
            order=self.order if order is None else order,
            p_fc=self.p_fc[0] if p_fc is None else p_fc,
            ms=self.ms,
            warmup_count=self.warmup_count,
            horizon=self.horizon,
            smoothing=self.smoothing,
        )

    def mapper(self) -> SymbolMapper:
        return SymbolMapper(self.alphabet, self.symbol_map, self.on_unknown)

    def read_events(self, path: str | None = None, mapper: SymbolMapper | None = None) -> list[Event]:
        path = path or self.input
        if path is None:
            raise ValueError("no input stream configured")
        with open(path, newline="") as fh:
            return list(
                read_events(
                    fh,
                    mapper if mapper is not None else self.mapper(),
                    self.symbol_field,
                    self.partition_field,
                    self.ground_truth_field,
                )
            )


def load_config(path: str | None, overrides: Mapping | None = None) -> RunConfig:
    """Read a YAML (or JSON) config; non-None ``overrides`` take precedence."""
    data: dict = {}
    base = "."
    if path is not None:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        base = os.path.dirname(os.path.abspath(path))
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    gen = data.get("generator")
    if isinstance(gen, str):
        data["generator"] = GeneratorSpec.load(_resolve(base, gen))
    if isinstance(data.get("input"), str) and path is not None and "input" not in (overrides or {}):
        data["input"] = _resolve(base, data["input"])
    if "pattern" not in data or "alphabet" not in data:
        raise ValueError("config needs 'pattern' and 'alphabet'")
    return RunConfig(**data)


def _resolve(base: str, p: str) -> str:
    return p if os.path.isabs(p) else os.path.join(base, p)
