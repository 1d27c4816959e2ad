"""Sample trees and sample automata built from observed data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .automaton import Apfa, Edge
from .dataset import Dataset
from .errors import DataError


@dataclass(frozen=True)
class PrefixLevel:
    """Distinct prefixes of one length, in lexicographic order.

    ``parent[k]`` is the index (within the previous level) of prefix ``k`` minus
    its last symbol, ``symbol[k]`` that last symbol, ``count[k]`` the number of
    rows sharing the prefix and ``row_index[r]`` the prefix index of row ``r``.
    """

    parent: np.ndarray
    symbol: np.ndarray
    count: np.ndarray
    row_index: np.ndarray


def prefix_levels(rows: np.ndarray) -> list[PrefixLevel]:
    """Group rows by prefix, level by level, in O(N p log N)."""
    rows = np.asarray(rows, dtype=np.int64)
    n, p = rows.shape
    base = int(rows.max()) + 1 if rows.size else 1
    parent = np.zeros(n, dtype=np.int64)
    out = []
    for q in range(p):
        key = parent * base + rows[:, q]
        uniq, inverse, counts = np.unique(key, return_inverse=True, return_counts=True)
        out.append(PrefixLevel(uniq // base, uniq % base, counts, inverse.reshape(-1)))
        parent = inverse.reshape(-1)
    return out


def _prefix_automaton(d: Dataset, contract_leaves: bool) -> Apfa:
    if d.n == 0:
        raise DataError("cannot build a sample tree from an empty dataset")
    levels_data = prefix_levels(d.rows)
    levels = {1: 0}
    edges = []
    prev_offset = 1  # id of prefix k at the previous level is prev_offset + k
    next_id = 2
    for q, lv in enumerate(levels_data):
        last = q == d.p - 1
        if last and contract_leaves:
            sink = next_id
            levels[sink] = d.p
            for par, sym, cnt in zip(lv.parent.tolist(), lv.symbol.tolist(), lv.count.tolist()):
                edges.append(Edge(prev_offset + par, sink, sym, cnt))
            break
        offset = next_id
        for k, (par, sym, cnt) in enumerate(zip(lv.parent.tolist(), lv.symbol.tolist(), lv.count.tolist())):
            levels[offset + k] = q + 1
            edges.append(Edge(prev_offset + par, offset + k, sym, cnt))
        next_id = offset + len(lv.count)
        prev_offset = offset
    return Apfa(d.alphabets, levels, tuple(edges))


def sample_tree(d: Dataset) -> Apfa:
    """The prefix tree of the data with edge counts; leaves stay distinct.

    States are numbered level by level, in lexicographic order of the prefix
    they represent, starting from 1 at the root.
    """
    return _prefix_automaton(d, contract_leaves=False)


def sample_apfa(d: Dataset) -> Apfa:
    """The prefix tree with all leaves contracted into a single sink."""
    return _prefix_automaton(d, contract_leaves=True)


def route(a: Apfa, d: Dataset) -> np.ndarray:
    """State visited by each row at each level: an ``(N, p + 1)`` array.

    Raises DataError naming the first row whose outcome has no path.
    """
    if d.p != a.p:
        raise DataError(f"dataset has {d.p} columns but the model has {a.p} levels")
    states = np.empty((d.n, a.p + 1), dtype=np.int64)
    states[:, 0] = a.root
    base = max(a.alphabets) + 1
    for q in range(a.p):
        cur = states[:, q]
        key = cur * base + d.rows[:, q]
        uniq, inverse = np.unique(key, return_inverse=True)
        targets = np.empty(len(uniq), dtype=np.int64)
        for k, kv in enumerate(uniq.tolist()):
            e = a.out[kv // base].get(kv % base)
            if e is None:
                r = int(np.flatnonzero(inverse.reshape(-1) == k)[0])
                raise DataError(f"outcome {tuple(d.rows[r].tolist())} has no path in the model", row=r + 1)
            targets[k] = e.target
        states[:, q + 1] = targets[inverse.reshape(-1)]
    return states


def count_data(a: Apfa, d: Dataset) -> Apfa:
    """Attach to every edge the number of rows whose path uses it."""
    states = route(a, d)
    counts: dict[tuple[int, int], int] = {}
    for q in range(a.p):
        keys, cnts = np.unique(
            np.stack([states[:, q], d.rows[:, q]], axis=1), axis=0, return_counts=True
        ) if d.n else (np.empty((0, 2), dtype=np.int64), np.empty(0, dtype=np.int64))
        for (v, sym), c in zip(keys.tolist(), cnts.tolist()):
            counts[(v, sym)] = c
    return a.with_edges(
        Edge(e.source, e.target, e.symbol, counts.get(e.key, 0), None, e.synthetic) for e in a.edges
    )
