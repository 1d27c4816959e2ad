"""Core data model for acyclic (levelled) probabilistic finite automata.

An :class:`Apfa` is a levelled directed multigraph: every edge joins a state at
level ``i`` to a state at level ``i + 1``, there is a single root at level 0 and
a single sink at level ``p``.  Edges leaving a state carry distinct symbols, so
``(source, symbol)`` identifies an edge.  Symbols are 1-based integer codes and
level ``i`` (``1 <= i <= p``) uses the symbols ``1..alphabets[i - 1]``.

Values are immutable; every operation that changes a model returns a new one.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ModelError, SizeGuardError

PROB_TOL = 1e-12
DEFAULT_MAX_NEW_STATES = 100_000


@dataclass(frozen=True, slots=True)
class Edge:
    source: int
    target: int
    symbol: int
    count: int | None = None
    prob: float | None = None
    synthetic: bool = False

    @property
    def key(self) -> tuple[int, int]:
        return (self.source, self.symbol)


@dataclass(frozen=True)
class Apfa:
    """A levelled automaton with optional edge counts and probabilities.

    ``levels`` maps each state id to its level and ``alphabets[i - 1]`` is the
    number of symbols available at level ``i``.  The constructor normalizes
    ordering but does not validate; use :func:`validate` for diagnostics.
    """

    alphabets: tuple[int, ...]
    levels: dict[int, int]
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "alphabets", tuple(int(k) for k in self.alphabets))
        object.__setattr__(
            self, "levels", {int(v): int(lv) for v, lv in sorted(self.levels.items())}
        )
        object.__setattr__(
            self, "edges", tuple(sorted(self.edges, key=lambda e: (e.source, e.symbol, e.target)))
        )

    __hash__ = None  # type: ignore[assignment]

    # -- construction -------------------------------------------------

    @classmethod
    def from_edges(cls, alphabets: Sequence[int], edges: Iterable[Edge]) -> "Apfa":
        """Build an automaton, inferring levels from the unique source-only state."""
        edges = tuple(edges)
        nodes = {e.source for e in edges} | {e.target for e in edges}
        targets = {e.target for e in edges}
        roots = sorted(nodes - targets)
        if len(roots) != 1:
            raise ModelError(f"expected exactly one root, found {roots}")
        out: dict[int, list[int]] = {}
        for e in edges:
            out.setdefault(e.source, []).append(e.target)
        levels = {roots[0]: 0}
        queue = deque(roots)
        while queue:
            v = queue.popleft()
            for t in out.get(v, ()):
                if t in levels:
                    if levels[t] != levels[v] + 1:
                        raise ModelError(f"state {t} is reached at two different levels")
                else:
                    levels[t] = levels[v] + 1
                    queue.append(t)
        return cls(tuple(alphabets), levels, edges)

    # -- structural views ---------------------------------------------

    @property
    def p(self) -> int:
        return len(self.alphabets)

    @cached_property
    def states(self) -> list[int]:
        return list(self.levels)

    @cached_property
    def out(self) -> dict[int, dict[int, Edge]]:
        table: dict[int, dict[int, Edge]] = {v: {} for v in self.levels}
        for e in self.edges:
            table.setdefault(e.source, {})[e.symbol] = e
        return table

    @cached_property
    def inc(self) -> dict[int, list[Edge]]:
        table: dict[int, list[Edge]] = {v: [] for v in self.levels}
        for e in self.edges:
            table.setdefault(e.target, []).append(e)
        return table

    @cached_property
    def by_level(self) -> list[list[int]]:
        top = max([self.p, *self.levels.values()], default=self.p)
        rows: list[list[int]] = [[] for _ in range(top + 1)]
        for v, lv in self.levels.items():
            if lv >= 0:
                rows[lv].append(v)
        return rows

    @property
    def root(self) -> int:
        roots = [v for v in self.by_level[0] if not self.inc[v]]
        if len(roots) != 1:
            raise ModelError("automaton does not have a unique root")
        return roots[0]

    @property
    def sink(self) -> int:
        sinks = [v for v in self.by_level[self.p] if not self.out[v]]
        if len(sinks) != 1:
            raise ModelError("automaton does not have a unique sink")
        return sinks[0]

    @property
    def is_counted(self) -> bool:
        return bool(self.edges) and all(e.count is not None for e in self.edges)

    @property
    def has_probs(self) -> bool:
        return bool(self.edges) and all(e.prob is not None for e in self.edges)

    def successor(self, state: int, symbol: int) -> int | None:
        e = self.out[state].get(symbol)
        return None if e is None else e.target

    def edge(self, source: int, symbol: int) -> Edge:
        return self.out[source][symbol]

    @cached_property
    def state_counts(self) -> dict[int, int]:
        """n(v): the root gets the total of its out-edges, others their in-edges."""
        if not self.is_counted:
            raise ModelError("automaton carries no edge counts")
        counts = {v: 0 for v in self.levels}
        for e in self.edges:
            counts[e.target] += e.count
        try:
            root = self.root
        except ModelError:
            return counts
        counts[root] = sum(e.count for e in self.out[root].values())
        return counts

    @property
    def total(self) -> int:
        return self.state_counts[self.root]

    # -- derived models -------------------------------------------------

    def with_edges(self, edges: Iterable[Edge]) -> "Apfa":
        return Apfa(self.alphabets, self.levels, tuple(edges))

    def stripped(self, counts: bool = True, probs: bool = True) -> "Apfa":
        """Drop counts and/or probabilities from every edge."""
        return self.with_edges(
            replace(
                e,
                count=None if counts else e.count,
                prob=None if probs else e.prob,
            )
            for e in self.edges
        )

    def canonical_ids(self) -> dict[int, int]:
        """Dense level-major renumbering: old id -> new id, starting at 1.

        Within a level, states are ordered by first discovery when parents are
        scanned in their new order and symbols ascending.
        """
        mapping: dict[int, int] = {}
        next_id = 1
        try:
            frontier = [self.root]
        except ModelError:
            frontier = sorted(self.by_level[0])
        for v in frontier:
            mapping[v] = next_id
            next_id += 1
        while frontier:
            nxt = []
            for v in frontier:
                for sym in sorted(self.out[v]):
                    t = self.out[v][sym].target
                    if t not in mapping:
                        mapping[t] = next_id
                        next_id += 1
                        nxt.append(t)
            frontier = nxt
        for v in self.levels:
            if v not in mapping:
                mapping[v] = next_id
                next_id += 1
        return mapping

    def relabel(self, mapping: dict[int, int]) -> "Apfa":
        levels = {mapping[v]: lv for v, lv in self.levels.items()}
        edges = (
            replace(e, source=mapping[e.source], target=mapping[e.target]) for e in self.edges
        )
        return Apfa(self.alphabets, levels, tuple(edges))

    def renumbered(self) -> "Apfa":
        return self.relabel(self.canonical_ids())


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    states: tuple[int, ...] = ()
    edges: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def __bool__(self) -> bool:
        return bool(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def __len__(self) -> int:
        return len(self.violations)


def validate(a: Apfa, prob_tol: float = PROB_TOL) -> ValidationReport:
    """List every violated structural, probability and count invariant."""
    found: list[Violation] = []
    p = a.p
    if p < 1:
        found.append(Violation("levels", "an automaton needs at least one level"))
    for i, k in enumerate(a.alphabets, start=1):
        if k < 1:
            found.append(Violation("alphabet", f"level {i} has an empty alphabet"))

    bad_levels = tuple(v for v, lv in a.levels.items() if lv < 0 or lv > p)
    if bad_levels:
        found.append(Violation("level-range", "state level outside 0..p", bad_levels))

    known = set(a.levels)
    for e in a.edges:
        if e.source not in known or e.target not in known:
            found.append(Violation("unknown-state", "edge refers to an unknown state", (), (e.key,)))

    roots = [v for v, lv in a.levels.items() if lv == 0 and not a.inc.get(v)]
    if len(roots) != 1 or len(a.by_level[0]) != 1:
        found.append(
            Violation("root", "need exactly one level-0 state without incoming edges", tuple(roots))
        )
    sinks = [v for v, lv in a.levels.items() if lv == p and not a.out.get(v)]
    if len(sinks) != 1 or (p < len(a.by_level) and len(a.by_level[p]) != 1):
        found.append(
            Violation("sink", "need exactly one level-p state without outgoing edges", tuple(sinks))
        )

    for e in a.edges:
        ls, lt = a.levels.get(e.source), a.levels.get(e.target)
        if ls is None or lt is None:
            continue
        if lt != ls + 1:
            found.append(
                Violation("levelled", f"edge joins level {ls} to level {lt}", (e.source, e.target), (e.key,))
            )
        elif ls < p and not 1 <= e.symbol <= a.alphabets[ls]:
            found.append(
                Violation("symbol", f"symbol {e.symbol} outside alphabet of level {ls + 1}", (e.source,), (e.key,))
            )

    seen: dict[tuple[int, int], int] = {}
    for e in a.edges:
        seen[e.key] = seen.get(e.key, 0) + 1
    dup = tuple(k for k, n in seen.items() if n > 1)
    if dup:
        found.append(Violation("symbol", "outgoing edges share a symbol", tuple({s for s, _ in dup}), dup))

    for v, lv in a.levels.items():
        if 0 < lv < p and (not a.inc.get(v) or not a.out.get(v)):
            found.append(Violation("dangling", "inner state lacks an incoming or outgoing edge", (v,)))
        if lv == 0 and not a.out.get(v) and p >= 1:
            found.append(Violation("dangling", "root has no outgoing edge", (v,)))

    if a.edges and any(e.prob is not None for e in a.edges):
        for e in a.edges:
            if e.prob is None or not (0.0 <= e.prob <= 1.0) or math.isnan(e.prob):
                found.append(Violation("prob-range", "edge probability missing or outside [0, 1]", (e.source,), (e.key,)))
        for v, edges in a.out.items():
            if not edges:
                continue
            total = math.fsum(e.prob for e in edges.values() if e.prob is not None)
            if abs(total - 1.0) > prob_tol:
                found.append(Violation("prob-sum", f"outgoing probabilities sum to {total!r}", (v,)))

    if a.edges and any(e.count is not None for e in a.edges):
        if any(e.count is None or e.count < 0 for e in a.edges):
            found.append(Violation("count", "edge counts must be present and nonnegative"))
        else:
            n_in = {v: 0 for v in a.levels}
            for e in a.edges:
                n_in[e.target] = n_in.get(e.target, 0) + e.count
            for v, lv in a.levels.items():
                if 0 < lv < p and a.out.get(v):
                    n_out = sum(e.count for e in a.out[v].values())
                    if n_out != n_in[v]:
                        found.append(
                            Violation("count", f"state passes {n_in[v]} in but {n_out} out", (v,))
                        )
    return ValidationReport(tuple(found))


def require_valid(a: Apfa) -> None:
    report = validate(a)
    if report:
        first = report.violations[0]
        raise ModelError(f"invalid automaton ({first.kind}): {first.message}")


def is_complete(a: Apfa) -> bool:
    """True when every non-sink state has an edge for every next-level symbol."""
    return all(
        len(a.out[v]) == a.alphabets[lv] for v, lv in a.levels.items() if lv < a.p
    )


def _tree_size(alphabets: Sequence[int], level: int) -> int:
    """States in a complete tree hanging at ``level`` (down to level p - 1)."""
    p = len(alphabets)
    total, width = 0, 1
    for lv in range(level, p):
        total += width
        if lv < p - 1:
            width *= alphabets[lv]
    return total


def completion_size(a: Apfa) -> int:
    """Number of states :func:`complete` would add, computed without building them."""
    added = 0
    for v, lv in a.levels.items():
        if lv >= a.p - 1:
            continue
        missing = a.alphabets[lv] - len(a.out[v])
        if missing:
            added += missing * _tree_size(a.alphabets, lv + 1)
    return added


def completed_state_counts(a: Apfa) -> list[int]:
    """Per-level state counts of the completion (levels 0..p)."""
    real = [len(states) for states in a.by_level[: a.p + 1]]
    counts = [real[0]]
    virtual = 0
    for lv in range(a.p - 1):
        missing = sum(a.alphabets[lv] - len(a.out[v]) for v in a.by_level[lv])
        virtual = virtual * a.alphabets[lv] + missing
        counts.append(real[lv + 1] + virtual)
    counts.append(1)
    return counts


def complete(a: Apfa, max_new_states: int = DEFAULT_MAX_NEW_STATES) -> Apfa:
    """Return the completion: add zero-count edges and fresh tree states.

    Added edges are flagged ``synthetic``.  Edges added to existing states get
    count 0 and probability 0; edges inside the fresh subtrees get count 0 and
    uniform probabilities (those states are unreachable with positive mass).
    """
    n_new = completion_size(a)
    if n_new > max_new_states:
        raise SizeGuardError(f"completion needs {n_new} new states (limit {max_new_states})")
    if n_new == 0 and is_complete(a):
        return a
    p = a.p
    sink = a.sink
    counted = a.is_counted
    with_probs = a.has_probs
    levels = dict(a.levels)
    edges = list(a.edges)
    next_id = max(levels) + 1

    def add_edge(src, tgt, sym, fresh_source):
        if with_probs:
            prob = 1.0 / a.alphabets[levels[src]] if fresh_source else 0.0
        else:
            prob = None
        edges.append(Edge(src, tgt, sym, 0 if counted else None, prob, True))

    def grow(state):
        nonlocal next_id
        queue = deque([state])
        while queue:
            v = queue.popleft()
            lv = levels[v]
            for sym in range(1, a.alphabets[lv] + 1):
                if lv == p - 1:
                    add_edge(v, sink, sym, True)
                else:
                    t = next_id
                    next_id += 1
                    levels[t] = lv + 1
                    add_edge(v, t, sym, True)
                    queue.append(t)

    for v in list(a.states):
        lv = a.levels[v]
        if lv >= p:
            continue
        for sym in range(1, a.alphabets[lv] + 1):
            if sym in a.out[v]:
                continue
            if lv == p - 1:
                add_edge(v, sink, sym, False)
            else:
                t = next_id
                next_id += 1
                levels[t] = lv + 1
                add_edge(v, t, sym, False)
                grow(t)
    return Apfa(a.alphabets, levels, tuple(edges))


def _check_alphabets(alphabets: Sequence[int]) -> tuple[int, ...]:
    alphabets = tuple(int(k) for k in alphabets)
    if not alphabets:
        raise ModelError("need at least one level")
    if any(k < 1 for k in alphabets):
        raise ModelError("every alphabet needs at least one symbol")
    return alphabets


def maximal_apfa(alphabets: Sequence[int], max_states: int = DEFAULT_MAX_NEW_STATES) -> Apfa:
    """The unrestricted automaton: one state per distinct prefix."""
    alphabets = _check_alphabets(alphabets)
    p = len(alphabets)
    size = _tree_size(alphabets, 0) + 1
    if size > max_states:
        raise SizeGuardError(f"maximal automaton has {size} states (limit {max_states})")
    levels = {1: 0}
    edges = []
    frontier = [1]
    next_id = 2
    sink = size
    for lv in range(p):
        nxt = []
        for v in frontier:
            for sym in range(1, alphabets[lv] + 1):
                if lv == p - 1:
                    edges.append(Edge(v, sink, sym))
                else:
                    levels[next_id] = lv + 1
                    edges.append(Edge(v, next_id, sym))
                    nxt.append(next_id)
                    next_id += 1
        frontier = nxt
    levels[sink] = p
    return Apfa(alphabets, levels, tuple(edges))


def minimal_apfa(alphabets: Sequence[int]) -> Apfa:
    """Complete independence: a single state per level."""
    alphabets = _check_alphabets(alphabets)
    p = len(alphabets)
    levels = {lv + 1: lv for lv in range(p + 1)}
    edges = tuple(
        Edge(lv + 1, lv + 2, sym) for lv in range(p) for sym in range(1, alphabets[lv] + 1)
    )
    return Apfa(alphabets, levels, edges)


def _check_outcome(a: Apfa, x: Sequence[int]) -> tuple[int, ...]:
    x = tuple(int(v) for v in x)
    if len(x) != a.p:
        raise ModelError(f"outcome has length {len(x)}, expected {a.p}")
    return x


def path_for(a: Apfa, x: Sequence[int]) -> tuple[Edge, ...] | None:
    """The root-to-sink edge sequence generating ``x``, or None."""
    x = _check_outcome(a, x)
    v = a.root
    path = []
    for sym in x:
        e = a.out[v].get(sym)
        if e is None:
            return None
        path.append(e)
        v = e.target
    return tuple(path)


def probability_of(a: Apfa, x: Sequence[int]) -> float:
    if not a.has_probs:
        raise ModelError("edge probabilities are not set")
    path = path_for(a, x)
    if path is None:
        return 0.0
    return math.prod(e.prob for e in path)


def outcomes(a: Apfa) -> Iterator[tuple[tuple[int, ...], tuple[Edge, ...]]]:
    """Enumerate the sample space with the generating paths, depth first."""
    stack = [(a.root, (), ())]
    while stack:
        v, x, path = stack.pop()
        if len(x) == a.p:
            yield x, path
            continue
        for sym in sorted(a.out[v], reverse=True):
            e = a.out[v][sym]
            stack.append((e.target, x + (sym,), path + (e,)))


def isomorphism(
    a: Apfa, b: Apfa, *, compare_counts: bool = False, compare_probs: bool = False
) -> dict[int, int] | None:
    """State bijection preserving levels, symbols and adjacency, if one exists.

    Since an edge is fixed by its source and symbol, matching walks from the two
    roots determine the only candidate map.
    """
    if a.alphabets != b.alphabets or len(a.levels) != len(b.levels) or len(a.edges) != len(b.edges):
        return None
    mapping = {a.root: b.root}
    inverse = {b.root: a.root}
    queue = deque([a.root])
    while queue:
        x = queue.popleft()
        y = mapping[x]
        ox, oy = a.out[x], b.out[y]
        if ox.keys() != oy.keys():
            return None
        for sym, ex in ox.items():
            ey = oy[sym]
            if compare_counts and ex.count != ey.count:
                return None
            if compare_probs and not (
                ex.prob == ey.prob
                or (ex.prob is not None and ey.prob is not None and math.isclose(ex.prob, ey.prob, rel_tol=1e-12, abs_tol=1e-15))
            ):
                return None
            tx, ty = ex.target, ey.target
            if tx in mapping:
                if mapping[tx] != ty:
                    return None
            elif ty in inverse:
                return None
            else:
                mapping[tx] = ty
                inverse[ty] = tx
                queue.append(tx)
    if len(mapping) != len(a.levels):
        return None
    return mapping


def simulate(a: Apfa, n: int, seed: int | None = None):
    """Draw ``n`` independent root-to-sink walks; returns a Dataset."""
    from .dataset import Dataset

    if not a.has_probs:
        raise ModelError("edge probabilities are not set")
    require_valid(a)
    rng = np.random.default_rng(seed)
    rows = np.zeros((n, a.p), dtype=np.int64)
    state = np.full(n, a.root, dtype=np.int64)
    for lv in range(a.p):
        for v in a.by_level[lv]:
            idx = np.flatnonzero(state == v)
            if idx.size == 0:
                continue
            choices = sorted(a.out[v].values(), key=lambda e: e.symbol)
            probs = np.array([e.prob for e in choices], dtype=float)
            probs = probs / probs.sum()
            pick = rng.choice(len(choices), size=idx.size, p=probs)
            rows[idx, lv] = np.array([e.symbol for e in choices])[pick]
            state[idx] = np.array([e.target for e in choices])[pick]
    return Dataset(rows, a.alphabets)
