"""Independence statements of automata and their relation to graphical models.

Reaching a level-i state ``w`` says that the past lies in the set ``C(w)`` of
prefixes leading to ``w``, and the future is independent of the past given
that event.  When every level-i state is pinned down by the values of one
fixed set ``A(i)`` of past coordinates, the statements become ordinary
conditional independences and the automaton is equivalent to a decomposable
graphical model with ``pa(i + 1) = A(i)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

from .automaton import Apfa, Edge
from .errors import ModelError, SizeGuardError

MAX_LISTED_PREFIXES = 10_000

CONTEXT_SPECIFIC = "context_specific"
MARGINAL = "marginal"
CONDITIONAL = "conditional"


def _vars(idx: Sequence[int]) -> str:
    if len(idx) == 1:
        return f"X{idx[0]}"
    return "(" + ",".join(f"X{j}" for j in idx) + ")"


@dataclass(frozen=True)
class IndependenceStatement:
    """``X_future`` independent of ``X_past`` given the stated condition.

    For context-specific statements ``event`` lists the prefixes
    ``x_1..x_level`` that reach ``state`` (None when too many to list);
    conditional statements condition on ``X_given``.
    """

    kind: str
    level: int
    past: tuple[int, ...]
    future: tuple[int, ...]
    given: tuple[int, ...] = ()
    state: int | None = None
    event: frozenset[tuple[int, ...]] | None = None
    event_size: int | None = None

    def __str__(self) -> str:
        head = f"{_vars(self.future)} ⊥ {_vars(self.past)}"
        if self.kind == MARGINAL:
            return head
        if self.kind == CONDITIONAL:
            return f"{head} | {_vars(self.given)}"
        if self.event is None:
            return f"{head} | X≤{self.level} reaches state {self.state} ({self.event_size} prefixes)"
        listed = ",".join("(" + ",".join(map(str, x)) + ")" for x in sorted(self.event))
        return f"{head} | X≤{self.level} ∈ {{{listed}}}"


def path_counts(a: Apfa) -> dict[int, int]:
    """Number of root paths into each state."""
    counts = {a.root: 1}
    for lv in range(1, a.p + 1):
        for v in a.by_level[lv]:
            counts[v] = sum(counts[e.source] for e in a.inc[v])
    return counts


def prefix_sets(a: Apfa, level: int, limit: int = MAX_LISTED_PREFIXES) -> dict[int, frozenset]:
    """Prefixes reaching each state of ``level``; SizeGuardError beyond ``limit`` per level."""
    sets = {a.root: {()}}
    for lv in range(1, level + 1):
        nxt = {}
        for v in a.by_level[lv]:
            acc = set()
            for e in a.inc[v]:
                acc.update(x + (e.symbol,) for x in sets[e.source])
            nxt[v] = acc
        if sum(len(s) for s in nxt.values()) > limit:
            raise SizeGuardError(f"more than {limit} prefixes at level {lv}")
        sets = nxt
    return {v: frozenset(s) for v, s in sets.items()}


_MANY = object()


def constant_coordinates(a: Apfa) -> list[dict[int, dict[int, int]]]:
    """Per level, per state: coordinate -> value for coordinates constant over all its prefixes."""
    out: list[dict[int, dict[int, int]]] = [{a.root: {}}]
    for lv in range(1, a.p):
        level_map = {}
        for v in a.by_level[lv]:
            merged: dict[int, object] | None = None
            for e in a.inc[v]:
                vals = dict(out[lv - 1][e.source])
                vals[lv] = e.symbol
                if merged is None:
                    merged = vals
                    continue
                for j in list(merged):
                    if merged[j] is _MANY:
                        continue
                    if vals.get(j, _MANY) != merged[j]:
                        merged[j] = _MANY
            level_map[v] = {j: x for j, x in merged.items() if x is not _MANY}
        out.append(level_map)
    return out


def property_q(a: Apfa) -> dict[int, frozenset[int]] | None:
    """Maximal conditioning sets A(1..p-1), or None when some level has none.

    A(i) is the set of coordinates constant within every level-i state; it
    works iff distinct states then carry distinct values on it.
    """
    consts = constant_coordinates(a)
    sets = {}
    for lv in range(1, a.p):
        states = a.by_level[lv]
        common = set(range(1, lv + 1))
        for v in states:
            common &= consts[lv][v].keys()
        A = tuple(sorted(common))
        seen = set()
        for v in states:
            key = tuple(consts[lv][v][j] for j in A)
            if key in seen:
                return None
            seen.add(key)
        sets[lv] = frozenset(A)
    return sets


def extract_statements(a: Apfa, limit: int = MAX_LISTED_PREFIXES) -> list[IndependenceStatement]:
    """Context-specific, marginal and (where a level allows) conditional statements.

    States reached by a single prefix carry no constraint and are skipped.
    """
    n_paths = path_counts(a)
    consts = constant_coordinates(a)
    out = []
    for lv in range(1, a.p):
        states = a.by_level[lv]
        past = tuple(range(1, lv + 1))
        future = tuple(range(lv + 1, a.p + 1))
        if len(states) == 1:
            out.append(IndependenceStatement(MARGINAL, lv, past, future))
            continue
        try:
            listed = prefix_sets(a, lv, limit)
        except SizeGuardError:
            listed = None
        for v in states:
            if n_paths[v] > 1:
                event = listed[v] if listed is not None else None
                out.append(
                    IndependenceStatement(CONTEXT_SPECIFIC, lv, past, future, (), v, event, n_paths[v])
                )
        common = set(past)
        for v in states:
            common &= consts[lv][v].keys()
        A = tuple(sorted(common))
        keys = {tuple(consts[lv][v][j] for j in A) for v in states}
        B = tuple(j for j in past if j not in common)
        if len(keys) == len(states) and B:
            out.append(IndependenceStatement(CONDITIONAL, lv, B, future, A))
    return out


@dataclass(frozen=True)
class Dag:
    """Directed graph on 1..p with edges only from lower to higher labels."""

    p: int
    parents: tuple[frozenset[int], ...]

    def __post_init__(self):
        parents = tuple(frozenset(int(j) for j in ps) for ps in self.parents)
        if len(parents) != self.p:
            raise ModelError(f"expected parent sets for {self.p} nodes, got {len(parents)}")
        for i, ps in enumerate(parents, start=1):
            if any(not 1 <= j < i for j in ps):
                raise ModelError(f"parents of node {i} must lie in 1..{i - 1}")
        object.__setattr__(self, "parents", parents)

    @classmethod
    def from_parents(cls, p: int, parents: dict[int, Iterable[int]]) -> "Dag":
        return cls(p, tuple(frozenset(parents.get(i, ())) for i in range(1, p + 1)))

    def pa(self, i: int) -> frozenset[int]:
        return self.parents[i - 1]

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted((j, i) for i in range(1, self.p + 1) for j in self.pa(i))

    def skeleton(self) -> "UndirectedGraph":
        return UndirectedGraph.from_edges(self.p, self.edges)

    def to_dict(self) -> dict:
        return {"p": self.p, "parents": {str(i): sorted(self.pa(i)) for i in range(1, self.p + 1)}}


@dataclass(frozen=True)
class UndirectedGraph:
    p: int
    adjacency: tuple[frozenset[int], ...]

    def __post_init__(self):
        adj = tuple(frozenset(int(j) for j in a) for a in self.adjacency)
        if len(adj) != self.p:
            raise ModelError(f"expected adjacency sets for {self.p} nodes")
        for i, a in enumerate(adj, start=1):
            for j in a:
                if not 1 <= j <= self.p or j == i:
                    raise ModelError(f"invalid neighbour {j} of node {i}")
                if i not in adj[j - 1]:
                    raise ModelError(f"adjacency is not symmetric between {i} and {j}")
        object.__setattr__(self, "adjacency", adj)

    @classmethod
    def from_edges(cls, p: int, edges: Iterable[tuple[int, int]]) -> "UndirectedGraph":
        adj = [set() for _ in range(p)]
        for i, j in edges:
            if not (1 <= i <= p and 1 <= j <= p) or i == j:
                raise ModelError(f"invalid edge ({i}, {j})")
            adj[i - 1].add(j)
            adj[j - 1].add(i)
        return cls(p, tuple(frozenset(a) for a in adj))

    def adj(self, i: int) -> frozenset[int]:
        return self.adjacency[i - 1]

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted((i, j) for i in range(1, self.p + 1) for j in self.adj(i) if i < j)

    def oriented(self) -> Dag:
        """Direct every edge from the lower to the higher label."""
        return Dag(self.p, tuple(frozenset(j for j in self.adj(i) if j < i) for i in range(1, self.p + 1)))

    def to_dict(self) -> dict:
        return {"p": self.p, "edges": [list(e) for e in self.edges]}


def apfa_to_dag(a: Apfa) -> Dag:
    sets = property_q(a)
    if sets is None:
        raise ModelError("the automaton has no fixed conditioning set at some level")
    parents = [frozenset()] + [sets[i - 1] for i in range(2, a.p + 1)]
    return Dag(a.p, tuple(parents))


def check_parent_growth(g: Dag) -> None:
    """Each parent set may only add the immediately preceding node: pa(i) ⊆ pa(i-1) ∪ {i-1}."""
    for i in range(2, g.p + 1):
        extra = g.pa(i) - g.pa(i - 1) - {i - 1}
        if extra:
            raise ModelError(
                f"node {i}: parents {sorted(extra)} are neither parents of node {i - 1} "
                f"nor node {i - 1} itself, so no automaton has this structure"
            )


def dag_to_apfa(g: Dag, alphabets: Sequence[int]) -> Apfa:
    """Complete automaton whose level-i states are the values of x over pa(i + 1).

    States are numbered level by level in lexicographic order of those values.
    """
    alphabets = tuple(alphabets)
    if len(alphabets) != g.p:
        raise ModelError(f"{len(alphabets)} alphabets for {g.p} nodes")
    check_parent_growth(g)
    p = g.p
    A = [()] + [tuple(sorted(g.pa(i + 1))) for i in range(1, p)]
    ids = {(0, ()): 1}
    next_id = 2
    prev = [()]
    edges = []
    for i in range(1, p):
        values = sorted(product(*(range(1, alphabets[j - 1] + 1) for j in A[i])))
        for x in values:
            ids[(i, x)] = next_id
            next_id += 1
        for u in prev:
            known = dict(zip(A[i - 1], u))
            for s in range(1, alphabets[i - 1] + 1):
                known[i] = s
                key = tuple(known[j] for j in A[i])
                edges.append(Edge(ids[(i - 1, u)], ids[(i, key)], s))
        prev = values
    sink = next_id
    for u in prev:
        for s in range(1, alphabets[p - 1] + 1):
            edges.append(Edge(ids[(p - 1, u)], sink, s))
    return Apfa.from_edges(alphabets, edges)


def ug_to_apfa(u: UndirectedGraph, alphabets: Sequence[int]) -> Apfa:
    return dag_to_apfa(u.oriented(), alphabets)


@dataclass(frozen=True)
class EquivalenceReport:
    sets: dict[int, frozenset[int]] | None
    dag: Dag | None
    ug: UndirectedGraph | None
    statements: tuple[IndependenceStatement, ...]

    def to_dict(self) -> dict:
        return {
            "property_q": self.sets is not None,
            "conditioning_sets": None
            if self.sets is None
            else {str(i): sorted(s) for i, s in sorted(self.sets.items())},
            "dag": None if self.dag is None else self.dag.to_dict(),
            "ug": None if self.ug is None else self.ug.to_dict(),
            "statements": [
                {"kind": s.kind, "level": s.level, "text": str(s)} for s in self.statements
            ],
        }


def equivalence_report(a: Apfa) -> EquivalenceReport:
    sets = property_q(a)
    dag = apfa_to_dag(a) if sets is not None else None
    return EquivalenceReport(sets, dag, dag.skeleton() if dag else None, tuple(extract_statements(a)))
