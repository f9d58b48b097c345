"""Forecast scoring: precision, spread and distance, per state and pooled."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

from .forecast import ForecastInterval, ForecastTable


def distance_of(forecast: ForecastInterval) -> int:
    # forecasts are relative to their issue time, so "now" is 0
    return forecast.start


@dataclass
class StateStats:
    state: int
    issued: int = 0
    correct: int = 0
    correct_gt: int = 0
    incorrect: int = 0
    discarded: int = 0
    no_forecast: int = 0
    sum_spread: int = 0
    sum_distance: int = 0
    labelled: bool = True

    @property
    def scored(self) -> int:
        return self.correct + self.incorrect

    @property
    def precision(self) -> float | None:
        return self.correct / self.scored if self.scored else None

    @property
    def precision_gt(self) -> float | None:
        if not self.labelled:
            return None
        return self.correct_gt / self.scored if self.scored else None

    @property
    def mean_spread(self) -> float | None:
        return self.sum_spread / self.issued if self.issued else None

    @property
    def mean_distance(self) -> float | None:
        return self.sum_distance / self.issued if self.issued else None


class StatsAccumulator:
    """Per-state counters, kept as flat lists for the engine's hot loop."""

    def __init__(self, n_states: int):
        self.n_states = n_states
        self.issued = [0] * n_states
        self.correct = [0] * n_states
        self.correct_gt = [0] * n_states
        self.incorrect = [0] * n_states
        self.discarded = [0] * n_states
        self.no_forecast = [0] * n_states
        self.matches = 0
        self.labelled = 0  # matches that carried a ground-truth label
        self.events = 0

    def merge(self, other: "StatsAccumulator") -> "StatsAccumulator":
        if other.n_states != self.n_states:
            raise ValueError("cannot merge statistics of different models")
        out = StatsAccumulator(self.n_states)
        for name in ("issued", "correct", "correct_gt", "incorrect", "discarded", "no_forecast"):
            setattr(out, name, [a + b for a, b in zip(getattr(self, name), getattr(other, name))])
        out.matches = self.matches + other.matches
        out.labelled = self.labelled + other.labelled
        out.events = self.events + other.events
        return out

    def state_stats(self, table: ForecastTable) -> list[StateStats]:
        starts, ends = table.lookup_arrays()
        out = []
        for q in range(self.n_states):
            n = self.issued[q]
            spread = ends[q] - starts[q] if starts[q] > 0 else 0
            out.append(
                StateStats(
                    q,
                    issued=n,
                    correct=self.correct[q],
                    correct_gt=self.correct_gt[q],
                    incorrect=self.incorrect[q],
                    discarded=self.discarded[q],
                    no_forecast=self.no_forecast[q],
                    sum_spread=n * spread,
                    sum_distance=n * max(starts[q], 0),
                    labelled=self.labelled > 0,
                )
            )
        return out


def score_match(
    pending: Sequence[tuple[int, int]],
    match_index: int,
    table: ForecastTable,
    ground_truth: bool | None = None,
    stats: StatsAccumulator | None = None,
) -> list[bool]:
    """Score ``(issued_at, issuing_state)`` forecasts against a full match.

    A forecast ``(s, e)`` issued at ``t`` is correct iff
    ``s <= match_index - t <= e``.  ``ground_truth`` is the match's label,
    or None for unlabelled streams.
    """
    verdicts = []
    if stats is not None and ground_truth is not None:
        stats.labelled += 1
    for issued_at, state in pending:
        iv = table[state]
        lag = match_index - issued_at
        ok = iv.start <= lag <= iv.end
        verdicts.append(ok)
        if stats is not None:
            if ok:
                stats.correct[state] += 1
                if ground_truth:
                    stats.correct_gt[state] += 1
            else:
                stats.incorrect[state] += 1
    return verdicts


def _mean(total: float, n: int) -> float | None:
    return total / n if n else None


@dataclass
class MetricsReport:
    states: list[StateStats]
    origins: list[int]
    tags: list[str]
    issued: int = 0
    correct: int = 0
    correct_gt: int = 0
    incorrect: int = 0
    discarded: int = 0
    matches: int = 0
    events: int = 0
    precision: float | None = None
    precision_gt: float | None = None
    mean_spread: float | None = None
    mean_distance: float | None = None
    state_mean_spread: float | None = None
    state_mean_distance: float | None = None
    dead_zones: list[int] = field(default_factory=list)

    def grouped(self) -> dict[int, list[StateStats]]:
        """Per-state rows grouped by the original state they duplicate."""
        out: dict[int, list[StateStats]] = {}
        for st in self.states:
            out.setdefault(self.origins[st.state], []).append(st)
        return dict(sorted(out.items()))


def report(stats: StatsAccumulator, table: ForecastTable, dfa) -> MetricsReport:
    rows = [s for s in stats.state_stats(table) if s.state not in dfa.finals]
    rep = MetricsReport(
        rows,
        list(dfa.origin),
        [dfa.tag_text(q) for q in range(stats.n_states)],
        matches=stats.matches,
        events=stats.events,
    )
    for s in rows:
        rep.issued += s.issued
        rep.correct += s.correct
        rep.correct_gt += s.correct_gt
        rep.incorrect += s.incorrect
        rep.discarded += s.discarded
    scored = rep.correct + rep.incorrect
    rep.precision = _mean(rep.correct, scored)
    rep.precision_gt = _mean(rep.correct_gt, scored) if stats.labelled else None
    rep.mean_spread = _mean(sum(s.sum_spread for s in rows), rep.issued)
    rep.mean_distance = _mean(sum(s.sum_distance for s in rows), rep.issued)
    active = [s for s in rows if s.issued]
    rep.state_mean_spread = _mean(sum(s.mean_spread for s in active), len(active))
    rep.state_mean_distance = _mean(sum(s.mean_distance for s in active), len(active))
    rep.dead_zones = [s.state for s in rows if s.issued == 0]
    return rep


def format_value(value) -> str:
    if value is None:
        return "N/A"
    if isinstance(value, float):
        return repr(value)
    return str(value)


REPORT_HEADER = ["p_fc", "scope", "state", "origin", "suffix", "metric", "value"]

_STATE_METRICS = (
    "issued", "correct", "correct_gt", "incorrect", "discarded", "no_forecast",
    "precision", "precision_gt", "mean_spread", "mean_distance",
)
_AGG_METRICS = (
    "events", "matches", "issued", "correct", "correct_gt", "incorrect", "discarded",
    "precision", "precision_gt", "mean_spread", "mean_distance",
    "state_mean_spread", "state_mean_distance",
)


def report_rows(rep: MetricsReport, p_fc: float) -> list[list[str]]:
    rows = []
    for origin, group in rep.grouped().items():
        for s in group:
            dead = "1" if s.issued == 0 else "0"
            for name in _STATE_METRICS:
                rows.append([format_value(p_fc), "state", str(s.state), str(origin),
                             rep.tags[s.state], name, format_value(getattr(s, name))])
            rows.append([format_value(p_fc), "state", str(s.state), str(origin),
                         rep.tags[s.state], "dead_zone", dead])
    for name in _AGG_METRICS:
        rows.append([format_value(p_fc), "aggregate", "", "", "", name, format_value(getattr(rep, name))])
    return rows


def write_report(reports: Sequence[tuple[float, MetricsReport]], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for p_fc, rep in reports:
        writer.writerows(report_rows(rep, p_fc))


def read_report(fh) -> list[dict[str, str]]:
    return list(csv.DictReader(fh))


def report_text(reports: Sequence[tuple[float, MetricsReport]]) -> str:
    buf = io.StringIO()
    write_report(reports, buf)
    return buf.getvalue()
