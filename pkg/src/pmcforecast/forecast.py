"""Forecast intervals from waiting-time distributions."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .pmc import Pmc, WaitingTimeDistribution, waiting_times

# Every finite double in [0, 1] is an integer multiple of 2**-1074, so window
# sums over these integers are exact and never drift during the sweep.
_SHIFT = 1074
_ONE = 1 << _SHIFT


def _exact(x: float) -> int:
    num, den = float(x).as_integer_ratio()
    return num * (_ONE // den)


def _to_float(n: int) -> float:
    return float(Fraction(n, _ONE))


@dataclass(frozen=True)
class ForecastInterval:
    """Full match expected between ``start`` and ``end`` events from now."""

    start: int
    end: int
    probability: float

    def __post_init__(self):
        if not 1 <= self.start <= self.end:
            raise ValueError(f"invalid interval ({self.start}, {self.end})")

    @property
    def spread(self) -> int:
        return self.end - self.start

    @property
    def distance(self) -> int:
        return self.start


def _probs(dist) -> Sequence[float]:
    return dist.probs if isinstance(dist, WaitingTimeDistribution) else dist


def interval_probability(dist, start: int, end: int) -> float:
    """Probability mass of ``[start, end]`` (inclusive, 1-based)."""
    probs = _probs(dist)
    if not 1 <= start <= end <= len(probs):
        raise ValueError(f"interval ({start}, {end}) outside [1, {len(probs)}]")
    return _to_float(sum(_exact(p) for p in probs[start - 1 : end]))


def _check_threshold(p_fc: float) -> None:
    if not 0.0 < p_fc <= 1.0:
        raise ValueError(f"forecast threshold {p_fc} not in (0, 1]")


def best_interval(
    dist, p_fc: float, ms: int | None = None
) -> ForecastInterval | None:
    """Shortest interval holding at least ``p_fc`` of the waiting-time mass.

    Ties on spread go to the higher probability, then to the earlier start.
    Returns ``None`` when no interval reaches the threshold, or when the
    shortest one is wider than ``ms``.

    Two-pointer sweep: for every end point the start is advanced as far as
    the threshold allows, which yields the shortest qualifying window ending
    there.  Any qualifying window of globally minimal length is the shortest
    one for its own end point, so all candidates are seen in one pass.
    """
    _check_threshold(p_fc)
    if ms is not None and ms < 0:
        raise ValueError("maximum spread must be non-negative")
    weights = [_exact(p) for p in _probs(dist)]
    need = _exact(p_fc)
    best = None  # (length, -mass, start)
    lo = 0
    mass = 0
    for hi, w in enumerate(weights):
        mass += w
        if mass < need:
            continue
        while mass - weights[lo] >= need:
            mass -= weights[lo]
            lo += 1
        cand = (hi - lo + 1, -mass, lo)
        if best is None or cand < best:
            best = cand
    if best is None:
        return None
    length, neg_mass, lo = best
    if ms is not None and length - 1 > ms:
        return None
    return ForecastInterval(lo + 1, lo + length, _to_float(-neg_mass))


@dataclass(frozen=True)
class ForecastTable:
    """Forecast (or ``None`` for no forecast) of every non-final state."""

    entries: Mapping[int, ForecastInterval | None]
    p_fc: float
    ms: int | None
    n_states: int

    def __getitem__(self, state: int) -> ForecastInterval | None:
        return self.entries[state]

    def lookup_arrays(self) -> tuple[list[int], list[int]]:
        """Per-state ``start``/``end`` lists; -1 marks final or no forecast."""
        starts = [-1] * self.n_states
        ends = [-1] * self.n_states
        for q, iv in self.entries.items():
            if iv is not None:
                starts[q] = iv.start
                ends[q] = iv.end
        return starts, ends


def build_forecast_table(
    pmc: Pmc,
    p_fc: float,
    ms: int | None = None,
    horizon: int = 200,
    distributions: Mapping[int, WaitingTimeDistribution] | None = None,
) -> ForecastTable:
    _check_threshold(p_fc)
    if distributions is None:
        distributions = waiting_times(pmc, horizon)
    entries = {q: best_interval(distributions[q], p_fc, ms) for q in pmc.nonfinal_index}
    return ForecastTable(entries, p_fc, ms, pmc.n_states)


def table_rows(table: ForecastTable, pmc: Pmc) -> list[list]:
    """Export rows: state, origin, suffix, start, end, probability."""
    rows = []
    for q in range(pmc.n_states):
        if q in pmc.absorbing:
            continue
        iv = table[q]
        base = [q, pmc.dfa.origin[q], pmc.dfa.tag_text(q)]
        if iv is None:
            rows.append(base + ["NO_FORECAST", "", ""])
        else:
            rows.append(base + [iv.start, iv.end, repr(iv.probability)])
    return rows
