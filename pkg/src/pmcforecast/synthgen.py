"""Reproducible synthetic streams from a known g-order Markov source.

Algorithm (identifier ``pcg64-inverse-cdf-v1``): sub-stream ``i`` draws
uniforms from ``numpy.random.Generator(PCG64(SeedSequence([seed, i])))``, one
per event.  The first ``g`` events use ``floor(u * |Σ|)``; every later event
picks the first symbol whose cumulative conditional probability, given the
previous ``g`` symbols, exceeds ``u``.  ``generate`` is sub-stream 0.
"""

from __future__ import annotations

import itertools
import json
from bisect import bisect_right
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .engine import Event

ALGORITHM = "pcg64-inverse-cdf-v1"


@dataclass(frozen=True)
class GeneratorSpec:
    alphabet: tuple[str, ...]
    order: int
    table: Mapping[tuple[str, ...], tuple[float, ...]]
    seed: int
    length: int
    algorithm: str = ALGORITHM

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(
            self,
            "table",
            {tuple(k): tuple(float(p) for p in v) for k, v in self.table.items()},
        )
        if self.algorithm != ALGORITHM:
            raise ValueError(f"unsupported generator algorithm {self.algorithm!r}")
        if self.order < 0:
            raise ValueError("order must be non-negative")
        if self.length < 0:
            raise ValueError("length must be non-negative")
        k = len(self.alphabet)
        for ctx in itertools.product(self.alphabet, repeat=self.order):
            probs = self.table.get(ctx)
            if probs is None:
                raise ValueError(f"no distribution for context {ctx}")
            if len(probs) != k or min(probs) < 0 or abs(sum(probs) - 1) > 1e-9:
                raise ValueError(f"bad distribution for context {ctx}: {probs}")
        if len(self.table) != k**self.order:
            raise ValueError("table has contexts outside the alphabet")

    def conditional(self, context: Sequence[str]) -> tuple[float, ...]:
        return self.table[tuple(context)]

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "alphabet": list(self.alphabet),
            "order": self.order,
            "seed": self.seed,
            "length": self.length,
            "table": [
                {"context": list(ctx), "probs": list(self.table[ctx])}
                for ctx in itertools.product(self.alphabet, repeat=self.order)
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "GeneratorSpec":
        table = data["table"]
        if isinstance(table, Mapping):
            # shorthand: {"a b": [..]} or {"": [...]} keyed by space-joined context
            table = {tuple(k.split()): v for k, v in table.items()}
        else:
            table = {tuple(row["context"]): row["probs"] for row in table}
        return cls(
            alphabet=tuple(data["alphabet"]),
            order=int(data["order"]),
            table=table,
            seed=int(data["seed"]),
            length=int(data["length"]),
            algorithm=data.get("algorithm", ALGORITHM),
        )

    @classmethod
    def load(cls, path) -> "GeneratorSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _codes(spec: GeneratorSpec, stream_id: int, length: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([spec.seed, stream_id])))
    u = rng.random(length)
    k = len(spec.alphabet)
    g = spec.order
    out = np.empty(length, dtype=np.int64)
    head = min(g, length)
    out[:head] = np.minimum((u[:head] * k).astype(np.int64), k - 1)
    if g == 0:
        cum = np.cumsum(spec.table[()])
        out[:] = np.minimum(np.searchsorted(cum, u, side="right"), k - 1)
        return out
    # context id = base-k number of the last g symbols
    cums = [None] * (k**g)
    for ctx in itertools.product(range(k), repeat=g):
        cid = 0
        for c in ctx:
            cid = cid * k + c
        cums[cid] = list(itertools.accumulate(spec.table[tuple(spec.alphabet[c] for c in ctx)]))
    cid = 0
    for c in out[:head].tolist():
        cid = cid * k + c
    mod = k ** (g - 1)
    uu = u.tolist()
    codes = out.tolist()
    for i in range(head, length):
        e = min(bisect_right(cums[cid], uu[i]), k - 1)
        codes[i] = e
        cid = (cid % mod) * k + e
    return np.array(codes, dtype=np.int64)


def generate_codes(spec: GeneratorSpec, stream_id: int = 0) -> np.ndarray:
    """Alphabet positions of the generated stream."""
    return _codes(spec, stream_id, spec.length)


def generate(spec: GeneratorSpec) -> list[Event]:
    names = spec.alphabet
    return [Event(names[c], None, i) for i, c in enumerate(generate_codes(spec).tolist())]


def generate_partitioned(
    spec: GeneratorSpec, keys: Sequence[str], interleave_seed: int
) -> list[Event]:
    """``spec.length`` events per key from independent sources, shuffled together."""
    if not keys:
        raise ValueError("need at least one partition key")
    names = spec.alphabet
    per_key = [generate_codes(spec, i).tolist() for i in range(len(keys))]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([interleave_seed])))
    order = rng.permutation(np.repeat(np.arange(len(keys)), spec.length)).tolist()
    cursor = [0] * len(keys)
    events = []
    for i in order:
        j = cursor[i]
        cursor[i] += 1
        events.append(Event(names[per_key[i][j]], keys[i], j))
    return events


def uniform_spec(alphabet: Sequence[str], seed: int, length: int) -> GeneratorSpec:
    k = len(alphabet)
    return GeneratorSpec(tuple(alphabet), 0, {(): tuple([1.0 / k] * k)}, seed, length)
