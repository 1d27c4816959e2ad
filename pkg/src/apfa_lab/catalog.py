"""Small reference datasets and automata used in examples and tests."""

from __future__ import annotations

from itertools import product

from .automaton import Apfa, Edge
from .dataset import Dataset
from .ingest import sample_apfa
from .merging import merge

# 70 observations of three binary variables, every outcome present
FULL_SUPPORT_COUNTS = {
    (1, 1, 1): 2, (1, 1, 2): 3, (1, 2, 1): 9, (1, 2, 2): 22,
    (2, 1, 1): 16, (2, 1, 2): 16, (2, 2, 1): 1, (2, 2, 2): 1,
}

# 70 observations where X1 = 2 never occurs together with X2 = 2
MISSING_CELL_COUNTS = {
    (1, 1, 1): 3, (1, 1, 2): 2, (1, 2, 1): 9, (1, 2, 2): 22,
    (2, 1, 1): 17, (2, 1, 2): 17,
}


def full_support_data() -> Dataset:
    return Dataset.from_counts(FULL_SUPPORT_COUNTS, (2, 2, 2))


def missing_cell_data() -> Dataset:
    return Dataset.from_counts(MISSING_CELL_COUNTS, (2, 2, 2))


def full_support_tree() -> Apfa:
    """Counted sample automaton of :func:`full_support_data` (the maximal model)."""
    return sample_apfa(full_support_data())


def full_support_merged() -> Apfa:
    """:func:`full_support_tree` with its two level-1 states merged."""
    return merge(full_support_tree(), (2, 3))


def missing_cell_tree() -> Apfa:
    return sample_apfa(missing_cell_data())


def missing_cell_merged() -> Apfa:
    return merge(missing_cell_tree(), (2, 3))


def _build(alphabets, spec) -> Apfa:
    return Apfa.from_edges(alphabets, [Edge(s, t, sym, None, prob) for s, t, sym, prob in spec])


def shared_future_example() -> Apfa:
    """Four binary variables; outcomes (1,2) and (2,2) of the first two share a future."""
    return _build(
        (2, 2, 2, 2),
        [
            (1, 2, 1, 0.4), (1, 3, 2, 0.6),
            (2, 4, 1, 0.7), (2, 5, 2, 0.3),
            (3, 4, 1, 0.2), (3, 5, 2, 0.8),
            (4, 6, 1, 0.5), (4, 7, 2, 0.5),
            (5, 6, 1, 1.0),
            (6, 8, 1, 0.25), (6, 8, 2, 0.75),
            (7, 8, 1, 0.8), (7, 8, 2, 0.2),
        ],
    )


# Probability of wheezing (symbol 2) at age 7 given no wheezing at age 6.  The
# published figure does not print this value; it is an illustrative placeholder.
WHEEZE_AFTER_NONE = 0.10


def wheeze_model() -> Apfa:
    """Four annual binary wheeze indicators (1 = absent, 2 = present).

    Memory: the first year, then "wheezed in both previous years", "in
    neither", or mixed.
    """
    q = WHEEZE_AFTER_NONE
    return _build(
        (2, 2, 2, 2),
        [
            (1, 2, 1, 0.84), (1, 3, 2, 0.16),
            (2, 4, 1, 1 - q), (2, 5, 2, q),
            (3, 5, 1, 0.53), (3, 6, 2, 0.47),
            (4, 7, 1, 0.93), (4, 8, 2, 0.07),
            (5, 8, 1, 0.30), (5, 8, 2, 0.70),
            (6, 8, 1, 0.34), (6, 9, 2, 0.66),
            (7, 10, 1, 0.96), (7, 10, 2, 0.04),
            (8, 10, 1, 0.21), (8, 10, 2, 0.79),
            (9, 10, 1, 0.33), (9, 10, 2, 0.67),
        ],
    )


def keyed_automaton(alphabets, step) -> Apfa:
    """Complete automaton whose level-i states are memory keys.

    ``step(i, key, symbol)`` gives the level-i key reached from a level
    ``i - 1`` key by ``symbol``; the root key is ``()``.  States are numbered
    level by level in sorted key order, the sink last.
    """
    alphabets = tuple(alphabets)
    p = len(alphabets)
    ids = {(0, ()): 1}
    keys = [()]
    next_id = 2
    moves = []
    for i in range(1, p):
        reached = {(k, s): step(i, k, s) for k in keys for s in range(1, alphabets[i - 1] + 1)}
        keys = sorted(set(reached.values()))
        for k in keys:
            ids[(i, k)] = next_id
            next_id += 1
        moves.extend((ids[(i - 1, k)], ids[(i, t)], s) for (k, s), t in reached.items())
    sink = next_id
    moves.extend((ids[(p - 1, k)], sink, s) for k in keys for s in range(1, alphabets[-1] + 1))
    return Apfa.from_edges(alphabets, [Edge(u, v, s) for u, v, s in moves])


def independence_chain(p: int = 4) -> Apfa:
    """Mutually independent binary variables: one state per level."""
    return keyed_automaton((2,) * p, lambda i, k, s: ())


def first_order_chain(p: int = 5) -> Apfa:
    return keyed_automaton((2,) * p, lambda i, k, s: (s,))


def second_order_chain(p: int = 5) -> Apfa:
    return keyed_automaton((2,) * p, lambda i, k, s: k[-1:] + (s,))


def variable_length_chain(p: int = 5) -> Apfa:
    """Memory of one step after symbol 1 and two steps after symbol 2."""
    return keyed_automaton((2,) * p, lambda i, k, s: (s,) if i == 1 or s == 1 else (k[-1], s))


def memory_gap_chain() -> Apfa:
    """Three binary variables; the third depends on the first only."""
    return keyed_automaton((2, 2, 2), lambda i, k, s: (s,) if i == 1 else k)


def all_outcomes(alphabets) -> list[tuple[int, ...]]:
    return list(product(*(range(1, k + 1) for k in alphabets)))
