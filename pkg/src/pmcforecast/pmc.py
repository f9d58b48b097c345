"""Pattern Markov Chains: learning the transition matrix and waiting times."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .automata import Dfa
from .pattern import Alphabet, UnknownSymbolError

log = logging.getLogger(__name__)

MODEL_FORMAT = "pmcforecast-model"
MODEL_VERSION = 1
ROW_TOL = 1e-9


class ModelFormatError(ValueError):
    pass


@dataclass
class CountMatrix:
    """Visit and transition tallies collected while running the DFA."""

    visits: np.ndarray
    transitions: np.ndarray
    last_states: tuple[int, ...] = ()
    events: int = 0

    @classmethod
    def zeros(cls, n_states: int) -> "CountMatrix":
        return cls(
            np.zeros(n_states, dtype=np.int64),
            np.zeros((n_states, n_states), dtype=np.int64),
        )


def _symbol_of(event) -> tuple[str, object]:
    if isinstance(event, str):
        return event, None
    return event.symbol, getattr(event, "partition_key", None)


def warm_up(dfa: Dfa, stream: Iterable, count: int) -> CountMatrix:
    """Run the DFA over the first ``count`` events, counting visits and moves.

    ``stream`` holds symbol names, alphabet positions, or events with
    ``symbol`` and ``partition_key`` attributes; each partition gets its own run starting at
    state 0.  After a full match the run restarts (non-overlapping matches):
    the move out of a final state goes to where the restarted run would be.
    Every run's starting state counts as a visit.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    counts = CountMatrix.zeros(dfa.n_states)
    rows = dfa.delta.tolist()
    index = dfa.alphabet._index
    finals = dfa.finals
    restart = dfa.restart
    visits = [0] * dfa.n_states
    trans: dict[tuple[int, int], int] = {}
    runs: dict[object, int] = {}
    seen = 0
    if isinstance(stream, np.ndarray):
        # alphabet positions of a single unpartitioned run
        stream = stream[:count].tolist()
    for event in stream:
        if seen >= count:
            break
        if isinstance(event, int):
            e, key = event, None
            if not 0 <= e < len(dfa.alphabet):
                raise UnknownSymbolError(str(event))
        else:
            symbol, key = _symbol_of(event)
            try:
                e = index[symbol]
            except KeyError:
                raise UnknownSymbolError(symbol) from None
        state = runs.get(key)
        if state is None:
            state = 0
            visits[0] += 1
        src = restart[state] if state in finals else state
        nxt = rows[src][e]
        visits[nxt] += 1
        trans[(state, nxt)] = trans.get((state, nxt), 0) + 1
        runs[key] = nxt
        seen += 1
    if seen < count:
        raise ValueError(f"stream has only {seen} events, warm-up needs {count}")
    counts.visits[:] = visits
    for (i, j), n in trans.items():
        counts.transitions[i, j] = n
    counts.last_states = tuple(runs.values())
    counts.events = seen
    return counts


@dataclass(eq=False)
class Pmc:
    """Row-stochastic chain over DFA states with final states absorbing."""

    dfa: Dfa
    pi: np.ndarray
    pattern: str = ""
    warmup_count: int = 0
    smoothing: float = 0.0
    absorbing: frozenset[int] = field(init=False)
    nonfinal_index: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        self.pi = np.array(self.pi, dtype=np.float64)
        self.absorbing = self.dfa.finals
        self.nonfinal_index = tuple(
            q for q in range(self.dfa.n_states) if q not in self.absorbing
        )
        check_pmc(self.dfa, self.pi)
        self.pi.setflags(write=False)

    @property
    def n_states(self) -> int:
        return self.dfa.n_states


def check_pmc(dfa: Dfa, pi: np.ndarray) -> None:
    n = dfa.n_states
    if pi.shape != (n, n):
        raise ModelFormatError(f"matrix shape {pi.shape} does not match {n} states")
    if not np.all(np.isfinite(pi)) or pi.min() < 0:
        raise ModelFormatError("matrix has negative or non-finite entries")
    sums = pi.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_TOL)
    if bad.size:
        raise ModelFormatError(f"row {int(bad[0])} sums to {sums[bad[0]]!r}, not 1")
    allowed = structural_mask(dfa)
    if np.any((pi > 0) & ~allowed):
        raise ModelFormatError("probability mass on a transition the DFA lacks")


def structural_mask(dfa: Dfa) -> np.ndarray:
    """Boolean matrix of allowed moves; final states only loop on themselves."""
    n = dfa.n_states
    mask = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), len(dfa.alphabet))
    mask[rows, dfa.delta.ravel()] = True
    for f in dfa.finals:
        mask[f, :] = False
        mask[f, f] = True
    return mask


def estimate_matrix(
    counts: CountMatrix,
    dfa: Dfa,
    smoothing: float = 0.0,
    pattern: str = "",
) -> Pmc:
    """Maximum-likelihood (optionally add-``smoothing``) transition matrix.

    Each non-final row is normalised over the moves the DFA allows from that
    state.  Rows with no observed departures fall back to uniform over the
    allowed successors.  Final states become absorbing whatever was counted.
    """
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    n = dfa.n_states
    allowed = structural_mask(dfa)
    pi = np.zeros((n, n), dtype=np.float64)
    unvisited = []
    for i in range(n):
        if i in dfa.finals:
            pi[i, i] = 1.0
            continue
        mask = allowed[i]
        observed = counts.transitions[i] * mask
        total = observed.sum() + smoothing * mask.sum()
        if observed.sum() == 0 or total == 0:
            unvisited.append(i)
            pi[i, mask] = 1.0 / mask.sum()
        else:
            pi[i, mask] = (observed[mask] + smoothing) / total
    if unvisited:
        shown = ", ".join(map(str, unvisited[:10])) + (" ..." if len(unvisited) > 10 else "")
        log.warning(
            "no departures observed from %d states [%s]; using uniform rows",
            len(unvisited), shown,
        )
    pi /= pi.sum(axis=1, keepdims=True)
    return Pmc(dfa, pi, pattern=pattern, warmup_count=counts.events, smoothing=smoothing)


def absorbing_partition(pmc: Pmc) -> tuple[np.ndarray, np.ndarray]:
    """Split the matrix into non-final→non-final (N) and non-final→final (C)."""
    nf = list(pmc.nonfinal_index)
    fin = sorted(pmc.absorbing)
    N = pmc.pi[np.ix_(nf, nf)]
    C = pmc.pi[np.ix_(nf, fin)]
    return N, C


@dataclass(frozen=True)
class WaitingTimeDistribution:
    """``probs[n - 1] = P(first full match after exactly n more events)``."""

    state: int
    probs: np.ndarray
    tail: float

    @property
    def horizon(self) -> int:
        return len(self.probs)

    def __getitem__(self, n: int) -> float:
        if not 1 <= n <= self.horizon:
            raise IndexError(n)
        return float(self.probs[n - 1])


def _finish(state: int, probs: np.ndarray) -> WaitingTimeDistribution:
    probs = np.clip(probs, 0.0, None)
    tail = 1.0 - float(np.sum(probs))
    if tail < -1e-12:
        raise ArithmeticError(f"waiting-time mass exceeds 1 by {-tail}")
    probs.setflags(write=False)
    return WaitingTimeDistribution(state, probs, max(tail, 0.0))


def waiting_time(pmc: Pmc, state: int, horizon: int) -> WaitingTimeDistribution:
    """Waiting-time distribution of one non-final state up to ``horizon``.

    Propagates the state's indicator vector through N one step at a time;
    the mass absorbed at step n is ``v_n · (I - N)·1``.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if state in pmc.absorbing:
        raise ValueError(f"state {state} is final")
    N, C = absorbing_partition(pmc)
    exit_mass = C.sum(axis=1)
    v = np.zeros(len(pmc.nonfinal_index))
    v[pmc.nonfinal_index.index(state)] = 1.0
    probs = np.empty(horizon)
    for n in range(horizon):
        probs[n] = v @ exit_mass
        v = v @ N
    return _finish(state, probs)


def waiting_times(
    pmc: Pmc, max_horizon: int = 200, mass: float = 0.9999
) -> dict[int, WaitingTimeDistribution]:
    """Waiting-time distributions of every non-final state at once.

    Iterates ``u_n = N^(n-1) (I - N)·1`` so one pass serves all states.  Each
    distribution is cut at the first n whose cumulative mass reaches ``mass``,
    or at ``max_horizon`` with the remainder reported as tail.
    """
    if max_horizon <= 0:
        raise ValueError("horizon must be positive")
    N, C = absorbing_partition(pmc)
    u = C.sum(axis=1)
    profile = np.empty((max_horizon, len(u)))
    for n in range(max_horizon):
        profile[n] = u
        u = N @ u
    cum = np.cumsum(profile, axis=0)
    out = {}
    for col, state in enumerate(pmc.nonfinal_index):
        reached = np.flatnonzero(cum[:, col] >= mass)
        h = int(reached[0]) + 1 if reached.size else max_horizon
        out[state] = _finish(state, profile[:h, col].copy())
    return out


def pattern_digest(pattern: str) -> str:
    return hashlib.sha256(pattern.encode()).hexdigest()[:16]


def dfa_to_dict(dfa: Dfa) -> dict:
    return {
        "states": dfa.n_states,
        "order": dfa.order,
        "finals": sorted(dfa.finals),
        "delta": dfa.delta.tolist(),
        "suffix_tags": [list(t) for t in dfa.suffix_tags],
        "origin": list(dfa.origin),
        "restart": [[f, dfa.restart[f]] for f in sorted(dfa.restart)],
    }


def dfa_from_dict(data: dict, alphabet: Alphabet) -> Dfa:
    delta = np.array(data["delta"], dtype=np.int64)
    if delta.shape != (data["states"], len(alphabet)):
        raise ModelFormatError("transition table shape mismatch")
    try:
        return Dfa(
            alphabet,
            delta,
            frozenset(data["finals"]),
            order=data["order"],
            suffix_tags=tuple(tuple(t) for t in data["suffix_tags"]),
            origin=tuple(data["origin"]),
            restart={int(f): int(r) for f, r in data["restart"]},
        )
    except AssertionError as exc:
        raise ModelFormatError(f"invalid automaton: {exc}") from None


def model_to_dict(dfa: Dfa, pattern: str, pmc: Pmc | None = None) -> dict:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "pattern": pattern,
        "pattern_digest": pattern_digest(pattern),
        "alphabet": list(dfa.alphabet.symbols),
        "order": dfa.order,
        "dfa": dfa_to_dict(dfa),
        "warmup_count": None,
        "smoothing": None,
        "pi": None,
    }
    if pmc is not None:
        doc["warmup_count"] = pmc.warmup_count
        doc["smoothing"] = repr(float(pmc.smoothing))
        doc["pi"] = [
            [[int(j), repr(float(pmc.pi[i, j]))] for j in np.flatnonzero(pmc.pi[i])]
            for i in range(pmc.n_states)
        ]
    return doc


def _atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def save_compiled(dfa: Dfa, pattern: str, path) -> None:
    _atomic_write(path, dump_json(model_to_dict(dfa, pattern)))


def save_model(pmc: Pmc, path) -> None:
    _atomic_write(path, dump_json(model_to_dict(pmc.dfa, pmc.pattern, pmc)))


def _read_doc(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a model file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: not a model file")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            f"{path}: model version {doc.get('version')} != {MODEL_VERSION}"
        )
    return doc


def load_compiled(path) -> tuple[Dfa, str]:
    return _compiled_from_doc(_read_doc(path), path)


def _compiled_from_doc(doc: dict, path) -> tuple[Dfa, str]:
    try:
        alphabet = Alphabet(doc["alphabet"])
        return dfa_from_dict(doc["dfa"], alphabet), doc["pattern"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model ({exc})") from None


def load_model(path) -> Pmc:
    doc = _read_doc(path)
    dfa, pattern = _compiled_from_doc(doc, path)
    if doc.get("pi") is None:
        raise ModelFormatError(f"{path}: compiled automaton without probabilities")
    try:
        n = dfa.n_states
        rows = doc["pi"]
        if len(rows) != n:
            raise ModelFormatError(f"{path}: {len(rows)} matrix rows for {n} states")
        pi = np.zeros((n, n))
        for i, row in enumerate(rows):
            for j, value in row:
                pi[i, int(j)] = float(value)
        return Pmc(
            dfa,
            pi,
            pattern=pattern,
            warmup_count=int(doc["warmup_count"]),
            smoothing=float(doc["smoothing"]),
        )
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ModelFormatError(f"{path}: malformed model ({exc})") from None
