"""Recognition automata for ``Σ*·R``.

Patterns are compiled by a Thompson construction into an NFA, determinized by
subset construction and optionally split so that every state remembers the
last ``m`` symbols that led to it.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .pattern import (
    Alphabet,
    Concat,
    Epsilon,
    PatternAst,
    Star,
    Symbol,
    Union,
    nullable,
    validate_ast,
)

log = logging.getLogger(__name__)


@dataclass
class Nfa:
    """Epsilon-NFA; a ``None`` label marks an epsilon move."""

    n_states: int
    transitions: dict[tuple[int, str | None], set[int]]
    start: int
    finals: set[int]

    def __post_init__(self):
        ok = range(self.n_states)
        assert self.start in ok
        for (src, _), dsts in self.transitions.items():
            assert src in ok and all(d in ok for d in dsts)

    def closure(self, states: Iterable[int]) -> frozenset[int]:
        stack = list(states)
        seen = set(stack)
        while stack:
            s = stack.pop()
            for t in self.transitions.get((s, None), ()):
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return frozenset(seen)

    def move(self, states: Iterable[int], symbol: str) -> frozenset[int]:
        out: set[int] = set()
        for s in states:
            out |= self.transitions.get((s, symbol), set())
        return self.closure(out)

    def accepts(self, word: Sequence[str]) -> bool:
        current = self.closure([self.start])
        for sym in word:
            current = self.move(current, sym)
        return bool(current & self.finals)


def build_nfa(ast: PatternAst, alphabet: Alphabet) -> Nfa:
    validate_ast(ast, alphabet)
    trans: dict[tuple[int, str | None], set[int]] = {}
    counter = [0]

    def new() -> int:
        counter[0] += 1
        return counter[0] - 1

    def edge(a: int, label: str | None, b: int) -> None:
        trans.setdefault((a, label), set()).add(b)

    def go(node: PatternAst) -> tuple[int, int]:
        if isinstance(node, Symbol):
            s, f = new(), new()
            edge(s, node.name, f)
            return s, f
        if isinstance(node, Epsilon):
            s = new()
            return s, s
        if isinstance(node, Concat):
            s1, f1 = go(node.left)
            s2, f2 = go(node.right)
            edge(f1, None, s2)
            return s1, f2
        if isinstance(node, Union):
            s, f = new(), new()
            s1, f1 = go(node.left)
            s2, f2 = go(node.right)
            edge(s, None, s1)
            edge(s, None, s2)
            edge(f1, None, f)
            edge(f2, None, f)
            return s, f
        if isinstance(node, Star):
            s = new()
            s1, f1 = go(node.child)
            edge(s, None, s1)
            edge(f1, None, s)
            return s, s
        raise TypeError(f"not a pattern node: {node!r}")

    start, final = go(ast)
    return Nfa(counter[0], trans, start, {final})


def sigma_union(alphabet: Alphabet) -> PatternAst:
    node: PatternAst = Symbol(alphabet.symbols[-1])
    for sym in reversed(alphabet.symbols[:-1]):
        node = Union(Symbol(sym), node)
    return node


def prefix_any(ast: PatternAst, alphabet: Alphabet) -> PatternAst:
    """AST of ``Σ*·R``: every string ending with a word of ``R``."""
    return Concat(Star(sigma_union(alphabet)), ast)


@dataclass(eq=False)
class Dfa:
    """Total DFA with start state 0.

    ``delta`` is a ``(n_states, |Σ|)`` integer table.  When ``order > 0`` each
    state carries the suffix of (up to) ``order`` symbols that reaches it and
    the id of the undisambiguated state it copies.  ``restart`` gives, for each
    final state, the start-state copy a run returns to after a full match.
    """

    alphabet: Alphabet
    delta: np.ndarray
    finals: frozenset[int]
    order: int = 0
    suffix_tags: tuple[tuple[str, ...], ...] | None = None
    origin: tuple[int, ...] | None = None
    restart: dict[int, int] | None = None
    _rows: list = field(init=False, repr=False)

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=np.int64)
        self.delta.setflags(write=False)
        n, k = self.delta.shape
        assert k == len(self.alphabet)
        assert n >= 1
        assert self.delta.min() >= 0 and self.delta.max() < n
        assert all(0 <= f < n for f in self.finals)
        self.finals = frozenset(int(f) for f in self.finals)
        if self.origin is None:
            self.origin = tuple(range(n))
        if self.suffix_tags is None:
            self.suffix_tags = tuple(() for _ in range(n))
        if self.restart is None:
            self.restart = {f: 0 for f in sorted(self.finals)}
        assert set(self.restart) == set(self.finals)
        self._rows = self.delta.tolist()

    @property
    def n_states(self) -> int:
        return self.delta.shape[0]

    def is_final(self, state: int) -> bool:
        return state in self.finals

    def step(self, state: int, symbol: str) -> int:
        return self._rows[state][self.alphabet.index(symbol)]

    def run(self, word: Sequence[str], state: int = 0) -> int:
        for sym in word:
            state = self.step(state, sym)
        return state

    def accepts(self, word: Sequence[str]) -> bool:
        return self.run(word) in self.finals

    def successors(self, state: int) -> list[int]:
        """Distinct successor states, in first-seen alphabet order."""
        return list(dict.fromkeys(self._rows[state]))

    def tag_text(self, state: int) -> str:
        sep = "" if all(len(s) == 1 for s in self.alphabet) else " "
        return sep.join(self.suffix_tags[state])

    def clusters(self) -> dict[int, list[int]]:
        """Map each original state to its copies."""
        out: dict[int, list[int]] = {}
        for q, o in enumerate(self.origin):
            out.setdefault(o, []).append(q)
        return out


def determinize(nfa: Nfa, alphabet: Alphabet) -> Dfa:
    """Subset construction with unreachable subsets never generated.

    States are numbered breadth-first from the start, ties by alphabet order.
    """
    # subsets agreeing on states with symbol moves and on acceptance behave
    # identically, so they share one DFA state
    important = {src for (src, label) in nfa.transitions if label is not None}

    def key(subset: frozenset[int]) -> tuple[frozenset[int], bool]:
        return subset & important, bool(subset & nfa.finals)

    start = nfa.closure([nfa.start])
    ids = {key(start): 0}
    order = [start]
    rows: list[list[int]] = []
    queue = deque([start])
    while queue:
        subset = queue.popleft()
        row = []
        for sym in alphabet:
            nxt = nfa.move(subset, sym)
            k = key(nxt)
            if k not in ids:
                ids[k] = len(order)
                order.append(nxt)
                queue.append(nxt)
            row.append(ids[k])
        rows.append(row)
    finals = frozenset(i for i, s in enumerate(order) if s & nfa.finals)
    return Dfa(alphabet, np.array(rows, dtype=np.int64), finals)


def check_no_dead_states(dfa: Dfa) -> None:
    """Assert every state can still reach a final state."""
    reverse: dict[int, set[int]] = {}
    for q, row in enumerate(dfa.delta.tolist()):
        for t in row:
            reverse.setdefault(t, set()).add(q)
    alive = set(dfa.finals)
    stack = list(alive)
    while stack:
        t = stack.pop()
        for q in reverse.get(t, ()):
            if q not in alive:
                alive.add(q)
                stack.append(q)
    assert len(alive) == dfa.n_states, "dead state in Σ*·R automaton"


def disambiguate(dfa: Dfa, m: int) -> Dfa:
    """Split states until each one determines the last ``m`` symbols read.

    Works on the product of ``dfa`` with a window of the last ``m`` symbols:
    every pair ``(q, w)`` with ``|w| == m`` reachable from the start becomes a
    copy of ``q`` tagged ``w``, so a state is duplicated exactly once per
    distinct reaching suffix.  Pairs with a shorter window exist only during
    the first ``m - 1`` steps; they are folded into a full-window copy of the
    same state when one exists.  Restart targets ``(0, w)`` of final states
    are added so a run that resets after a match keeps its symbol history.
    """
    if m < 0:
        raise ValueError("order must be non-negative")
    if m == 0:
        return dfa
    rows = dfa.delta.tolist()
    k = len(dfa.alphabet)
    start = (0, ())
    seen = {start}
    queue = deque([start])
    edges: dict[tuple, list[tuple]] = {}
    while queue:
        node = queue.popleft()
        q, w = node
        succ = []
        for e in range(k):
            nxt = (rows[q][e], (w + (e,))[-m:])
            succ.append(nxt)
        extra = [(0, w)] if q in dfa.finals else []
        edges[node] = succ
        for nxt in succ + extra:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)

    full: dict[int, list[tuple[int, ...]]] = {}
    for q, w in seen:
        if len(w) == m:
            full.setdefault(q, []).append(w)
    for ws in full.values():
        ws.sort()

    def canon(node):
        q, w = node
        if len(w) == m:
            return node
        for cand in full.get(q, ()):
            if cand[len(cand) - len(w):] == w:
                return (q, cand)
        if q in full:
            return (q, full[q][0])
        return node

    # number canonical nodes breadth-first from the start, restart targets last
    ids: dict[tuple, int] = {}
    numbered: list[tuple] = []

    def visit(root):
        root = canon(root)
        if root in ids:
            return
        ids[root] = len(numbered)
        numbered.append(root)
        queue = deque([root])
        while queue:
            node = queue.popleft()
            for nxt in edges[node]:
                nxt = canon(nxt)
                if nxt not in ids:
                    ids[nxt] = len(numbered)
                    numbered.append(nxt)
                    queue.append(nxt)

    visit(start)
    i = 0
    while i < len(numbered):
        q, w = numbered[i]
        if q in dfa.finals:
            visit((0, w))
        i += 1

    new_rows = [[ids[canon(nxt)] for nxt in edges[node]] for node in numbered]
    finals = frozenset(i for i, (q, _) in enumerate(numbered) if q in dfa.finals)
    names = dfa.alphabet.symbols
    tags = tuple(tuple(names[e] for e in w) for _, w in numbered)
    origin = tuple(dfa.origin[q] for q, _ in numbered)
    restart = {
        i: ids[canon((0, w))] for i, (q, w) in enumerate(numbered) if q in dfa.finals
    }
    return Dfa(
        dfa.alphabet,
        np.array(new_rows, dtype=np.int64),
        finals,
        order=m,
        suffix_tags=tags,
        origin=origin,
        restart=restart,
    )


def compile_pattern(ast: PatternAst, alphabet: Alphabet, m: int = 0) -> Dfa:
    """Build the (m-unambiguous) DFA recognizing ``Σ*·R``."""
    validate_ast(ast, alphabet)
    if nullable(ast):
        log.warning("pattern accepts the empty word: every event is a full match")
    dfa = determinize(build_nfa(prefix_any(ast, alphabet), alphabet), alphabet)
    check_no_dead_states(dfa)
    return disambiguate(dfa, m)
