"""State merging, merge-lists, submodel partitions and the nesting check.

Two independent routes compute the states fused by a merge:

* :func:`merge_list` sweeps level by level: the classes at level ``j + 1`` are
  the connected components of "reached by the same symbol from members of one
  class at level ``j``".
* :meth:`MergeWorkspace.merge` performs the redirect-and-deduplicate procedure
  with a union-find and a FIFO work queue, recording what it fused.

Merging is purely structural.  Counts of fused edges are summed; probabilities
are dropped and must be refitted.
"""

from __future__ import annotations

from array import array
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .automaton import DEFAULT_MAX_NEW_STATES, Apfa, Edge, complete, isomorphism
from .errors import ModelError, NotNestedError


@dataclass(frozen=True)
class MergeList:
    """The seed set followed by every other set of states fused with it."""

    level: int
    groups: tuple[tuple[int, ...], ...]
    group_levels: tuple[int, ...]

    @property
    def seed(self) -> tuple[int, ...]:
        return self.groups[0]

    def as_sets(self) -> set[frozenset[int]]:
        return {frozenset(g) for g in self.groups}

    def __iter__(self):
        return iter(self.groups)

    def __len__(self) -> int:
        return len(self.groups)


class MergeWorkspace:
    """Mutable union-find view of an automaton for cascaded merges.

    States are dense indices; ``child[v * K + s]`` holds the (possibly stale)
    target of the edge with symbol ``s + 1`` or -1, and ``load`` the matching
    edge counts, one slot per covariate group.  Stale targets are resolved with
    :meth:`find`.  The surviving index of a fused set is its minimum, and
    indices follow the external id order, so the minimum id survives.
    """

    def __init__(self, alphabets, ids, levels, child, load, synthetic=None, groups=1, counted=True):
        self.alphabets = tuple(alphabets)
        self.p = len(self.alphabets)
        self.K = max(self.alphabets)
        self.G = groups
        self.ids = list(ids)
        self.index = {v: i for i, v in enumerate(self.ids)}
        self.level = list(levels)
        self.child = child
        self.load = load
        self.counted = counted
        self.synthetic = synthetic
        self.parent = list(range(len(self.ids)))
        self.alive: list[set[int]] = [set() for _ in range(self.p + 1)]
        for i, lv in enumerate(self.level):
            self.alive[lv].add(i)
        self.members: dict[int, list[int]] | None = None

    # -- construction -------------------------------------------------

    @classmethod
    def from_apfa(cls, a: Apfa) -> "MergeWorkspace":
        ids = sorted(a.levels)
        index = {v: i for i, v in enumerate(ids)}
        K = max(a.alphabets)
        n = len(ids)
        child = array("q", [-1]) * (n * K)
        counted = a.is_counted
        load = array("q", [0]) * (n * K)
        synthetic = bytearray(n * K)
        for e in a.edges:
            slot = index[e.source] * K + e.symbol - 1
            child[slot] = index[e.target]
            if counted:
                load[slot] = e.count
            synthetic[slot] = e.synthetic
        return cls(a.alphabets, ids, [a.levels[v] for v in ids], child, load, synthetic, counted=counted)

    @classmethod
    def from_prefixes(cls, alphabets, prefix_levels, group_of_row=None, n_groups=1) -> "MergeWorkspace":
        """Sample automaton straight from grouped prefixes, without Edge objects.

        Ids coincide with those of :func:`apfa_lab.ingest.sample_apfa`.
        """
        p = len(alphabets)
        K = max(alphabets)
        G = n_groups
        sizes = [1] + [len(lv.count) for lv in prefix_levels[:-1]] + [1]
        offsets = np.cumsum([0] + sizes[:-1])
        n = int(sum(sizes))
        child = np.full(n * K, -1, dtype=np.int64)
        load = np.zeros(n * K * G, dtype=np.int64)
        levels = np.repeat(np.arange(p + 1), sizes)
        for q, lv in enumerate(prefix_levels):
            src = offsets[q] + lv.parent
            slot = src * K + lv.symbol - 1
            if q == p - 1:
                child[slot] = n - 1
            else:
                child[slot] = offsets[q + 1] + np.arange(len(lv.count))
            if G == 1:
                load[slot] = lv.count
            else:
                per_group = np.bincount(
                    lv.row_index * G + group_of_row, minlength=len(lv.count) * G
                ).reshape(len(lv.count), G)
                load[(slot[:, None] * G + np.arange(G)[None, :]).ravel()] = per_group.ravel()
        ws = cls(
            alphabets,
            range(1, n + 1),
            levels.tolist(),
            array("q", child.tobytes()),
            array("q", load.tobytes()),
            None,
            G,
        )
        return ws

    # -- union-find -----------------------------------------------------

    def find(self, v: int) -> int:
        parent = self.parent
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    def track_members(self) -> None:
        self.members = {v: [v] for lv in self.alive for v in lv}

    def live(self, level: int) -> list[int]:
        return sorted(self.alive[level])

    def children(self, v: int) -> list[tuple[int, int]]:
        """(symbol, live target) pairs of a live state."""
        lv = self.level[v]
        if lv >= self.p:
            return []
        base = v * self.K
        out = []
        for s in range(self.alphabets[lv]):
            t = self.child[base + s]
            if t >= 0:
                out.append((s + 1, self.find(t)))
        return out

    def edge_load(self, v: int, symbol: int, group: int = 0) -> int:
        slot = v * self.K + symbol - 1
        if self.child[slot] < 0:
            return 0
        return self.load[slot * self.G + group]

    def table(self, states: Sequence[int], group: int = 0) -> list[list[int]]:
        """Node-symbol table: one row per state, one column per next symbol."""
        width = self.alphabets[self.level[states[0]]]
        K, G, child, load = self.K, self.G, self.child, self.load
        rows = []
        for x in states:
            base = x * K
            rows.append(
                [load[(base + s) * G + group] if child[base + s] >= 0 else 0 for s in range(width)]
            )
        return rows

    # -- the two merge routes --------------------------------------------

    def cascade(self, seed: Iterable[int]) -> list[list[int]]:
        """Level sweep: classes of live states fused by merging ``seed``."""
        find = self.find
        first = sorted({find(v) for v in seed})
        classes = [first]
        current = [first] if len(first) > 1 else []
        K, child = self.K, self.child
        while current:
            lv = self.level[current[0][0]]
            if lv >= self.p - 1:
                break
            width = self.alphabets[lv]
            uf: dict[int, int] = {}

            def root(u):
                while uf[u] != u:
                    uf[u] = uf[uf[u]]
                    u = uf[u]
                return u

            for cls in current:
                for s in range(width):
                    first_kid = -1
                    for x in cls:
                        t = child[x * K + s]
                        if t < 0:
                            continue
                        t = find(t)
                        if t not in uf:
                            uf[t] = t
                        if first_kid < 0:
                            first_kid = t
                        else:
                            ra, rb = root(first_kid), root(t)
                            if ra != rb:
                                if rb < ra:
                                    ra, rb = rb, ra
                                uf[rb] = ra
            comps: dict[int, list[int]] = {}
            for u in uf:
                comps.setdefault(root(u), []).append(u)
            current = sorted(sorted(c) for c in comps.values() if len(c) > 1)
            classes.extend(current)
        return classes

    def pair_cascade(self, v: int, w: int) -> list[tuple[int, int]] | None:
        """Classes of merging two states when every class is a pair.

        Walks corresponding descendants in lockstep.  Returns None as soon as a
        state turns up in two pairs; :meth:`cascade` is then needed.
        """
        K, p = self.K, self.p
        child, parent, level, alph, find = self.child, self.parent, self.level, self.alphabets, self.find
        seen = set()
        pairs = []
        stack = [(v, w)]
        while stack:
            x, y = stack.pop()
            if x in seen or y in seen:
                return None
            seen.add(x)
            seen.add(y)
            pairs.append((x, y) if x < y else (y, x))
            lv = level[x]
            if lv >= p - 1:
                continue
            bx, by = x * K, y * K
            for s in range(alph[lv]):
                tx = child[bx + s]
                if tx < 0:
                    continue
                ty = child[by + s]
                if ty < 0:
                    continue
                if parent[tx] != tx:
                    tx = find(tx)
                if parent[ty] != ty:
                    ty = find(ty)
                if tx != ty:
                    stack.append((tx, ty))
        return pairs

    def merge(self, seed: Iterable[int], collect: bool = True):
        """Redirect-and-deduplicate merge.

        Returns the fused sets it produced, ordered by level with the seed
        first, or only the number of states removed when ``collect`` is false.
        """
        find = self.find
        seed = sorted({find(v) for v in seed})
        queue = deque((seed[0], v) for v in seed[1:])
        fused: dict[int, list[int]] = {}
        removed = 0
        K, G, p = self.K, self.G, self.p
        child, load, syn = self.child, self.load, self.synthetic
        parent, level, alive, members = self.parent, self.level, self.alive, self.members
        while queue:
            x, y = queue.popleft()
            if parent[x] != x:
                x = find(x)
            if parent[y] != y:
                y = find(y)
            if x == y:
                continue
            if y < x:
                x, y = y, x
            parent[y] = x
            removed += 1
            lv = level[x]
            alive[lv].discard(y)
            if collect:
                grp = fused.setdefault(x, [x])
                grp.extend(fused.pop(y, [y]))
            if members is not None:
                members[x].extend(members.pop(y))
            if lv >= p:
                continue
            bx, by = x * K, y * K
            for s in range(self.alphabets[lv]):
                ty = child[by + s]
                if ty < 0:
                    continue
                tx = child[bx + s]
                if G == 1:
                    if tx < 0:
                        child[bx + s] = ty
                        load[bx + s] = load[by + s]
                    else:
                        load[bx + s] += load[by + s]
                        queue.append((tx, ty))
                else:
                    sx, sy = (bx + s) * G, (by + s) * G
                    if tx < 0:
                        child[bx + s] = ty
                        load[sx:sx + G] = load[sy:sy + G]
                    else:
                        for g in range(G):
                            load[sx + g] += load[sy + g]
                        queue.append((tx, ty))
                if syn is not None:
                    syn[bx + s] = syn[by + s] if tx < 0 else (syn[bx + s] and syn[by + s])
                child[by + s] = -1
        if not collect:
            return removed
        groups = sorted(tuple(sorted(g)) for g in fused.values())
        return sorted(groups, key=lambda g: (self.level[g[0]], g != tuple(seed), g))

    # -- export -----------------------------------------------------------

    def to_apfa(self) -> Apfa:
        levels = {}
        edges = []
        K, G = self.K, self.G
        for lv, states in enumerate(self.alive):
            for v in states:
                levels[self.ids[v]] = lv
                if lv >= self.p:
                    continue
                for s in range(self.alphabets[lv]):
                    slot = v * K + s
                    t = self.child[slot]
                    if t < 0:
                        continue
                    count = None
                    if self.counted:
                        count = sum(self.load[slot * G + g] for g in range(G))
                    edges.append(
                        Edge(
                            self.ids[v],
                            self.ids[self.find(t)],
                            s + 1,
                            count,
                            None,
                            bool(self.synthetic[slot]) if self.synthetic is not None else False,
                        )
                    )
        return Apfa(self.alphabets, levels, tuple(edges))


def _check_seed(a: Apfa, s: Iterable[int]) -> tuple[int, ...]:
    seed = tuple(sorted(set(s)))
    if len(seed) < 2:
        raise ModelError("a merge needs at least two distinct states")
    unknown = [v for v in seed if v not in a.levels]
    if unknown:
        raise ModelError(f"unknown states {unknown}")
    lvls = {a.levels[v] for v in seed}
    if len(lvls) != 1:
        raise ModelError("only states at the same level can be merged")
    lv = lvls.pop()
    if lv == 0:
        raise ModelError("the root cannot be merged")
    if lv >= a.p:
        raise ModelError("the sink cannot be merged")
    return seed


def merge_list(a: Apfa, s: Iterable[int]) -> MergeList:
    """All sets of states fused when merging ``s`` (level sweep)."""
    seed = _check_seed(a, s)
    ws = MergeWorkspace.from_apfa(a)
    classes = ws.cascade(ws.index[v] for v in seed)
    groups = tuple(tuple(ws.ids[i] for i in c) for c in classes)
    return MergeList(a.levels[seed[0]], groups, tuple(a.levels[g[0]] for g in groups))


def merge(c: Apfa, s: Iterable[int]) -> Apfa:
    """Merge the states ``s`` and everything that cascades from them.

    The minimum id of each fused set survives; other ids disappear.
    """
    merged, _ = merge_with_groups(c, s)
    return merged


def merge_with_groups(c: Apfa, s: Iterable[int]) -> tuple[Apfa, tuple[tuple[int, ...], ...]]:
    """:func:`merge` plus the fused sets recorded by the recursive procedure."""
    seed = _check_seed(c, s)
    ws = MergeWorkspace.from_apfa(c)
    groups = ws.merge(ws.index[v] for v in seed)
    return ws.to_apfa(), tuple(tuple(ws.ids[i] for i in g) for g in groups)


@dataclass(frozen=True)
class Partition:
    """Per-level blocks of the larger model's states; block k maps to ``targets[k]``."""

    blocks: dict[int, tuple[tuple[int, ...], ...]]
    image: dict[int, int]

    def nontrivial(self) -> list[tuple[int, ...]]:
        return [b for lv in sorted(self.blocks) for b in self.blocks[lv] if len(b) > 1]

    def level_blocks(self, level: int) -> tuple[tuple[int, ...], ...]:
        return self.blocks.get(level, ())


def submodel_partition(a: Apfa, a0: Apfa, require_inclusion: bool = False) -> Partition:
    """Blocks of ``a`` whose merging yields ``a0`` up to isomorphism.

    With ``require_inclusion`` the raw graphs must also be nested as models:
    every member of a block must already have all outgoing symbols of its
    merged state (no support is gained).  Without it, any congruent partition
    is accepted, which for incomplete graphs corresponds to nesting of the
    completions.  Raises NotNestedError otherwise.
    """
    if a.alphabets != a0.alphabets:
        raise ModelError("models differ in number of levels or alphabets")
    image = {a.root: a0.root}
    queue = deque([a.root])
    while queue:
        x = queue.popleft()
        u = image[x]
        for sym, e in a.out[x].items():
            e0 = a0.out[u].get(sym)
            if e0 is None:
                raise NotNestedError(f"state {u} of the submodel lacks symbol {sym} present at {x}")
            t = e.target
            if t in image:
                if image[t] != e0.target:
                    raise NotNestedError(f"state {t} would have to map to two submodel states")
            else:
                image[t] = e0.target
                queue.append(t)
    if set(image.values()) != set(a0.levels):
        raise NotNestedError("some submodel states are not the image of any state")
    preimage: dict[int, list[int]] = {}
    for x, u in image.items():
        preimage.setdefault(u, []).append(x)
    for u, xs in preimage.items():
        union = set()
        for x in xs:
            union |= a.out[x].keys()
        if union != a0.out[u].keys():
            raise NotNestedError(f"outgoing symbols of submodel state {u} do not match its block")
        if require_inclusion and any(a.out[x].keys() != union for x in xs):
            raise NotNestedError(
                f"merging block {sorted(xs)} adds support absent from some members"
            )
    blocks: dict[int, list[tuple[int, ...]]] = {}
    for u, xs in preimage.items():
        blocks.setdefault(a0.levels[u], []).append(tuple(sorted(xs)))
    return Partition({lv: tuple(sorted(bs)) for lv, bs in sorted(blocks.items())}, image)


@dataclass(frozen=True)
class NestingEvidence:
    isomorphic: bool
    mapping: dict[int, int] | None
    merged_completion: Apfa
    completed_merge: Apfa


def check_nesting(c: Apfa, s: Iterable[int], max_new_states: int = DEFAULT_MAX_NEW_STATES) -> NestingEvidence:
    """Compare merge-then-complete with complete-then-merge.

    Both sides are built explicitly (bounded by ``max_new_states``) and
    compared as labelled levelled multigraphs, including edge counts.
    """
    seed = _check_seed(c, s)
    lhs = merge(complete(c, max_new_states), seed)
    rhs = complete(merge(c, seed), max_new_states)
    counts = c.is_counted
    mapping = isomorphism(lhs, rhs, compare_counts=counts)
    return NestingEvidence(mapping is not None, mapping, lhs, rhs)
