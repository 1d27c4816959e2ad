"""Random automata and datasets shared by the test modules."""

from __future__ import annotations

import math

import numpy as np

from apfa_lab.automaton import Apfa, Edge, probability_of, simulate
from apfa_lab.dataset import Dataset
from apfa_lab.ingest import count_data


def random_apfa(rng, p, max_width=3, alphabets=None, full=False) -> Apfa:
    """Levelled automaton with random widths, supports, targets and probabilities.

    Ids are level-major.  Every state below the root is hit by at least one
    edge, so the result is always valid.
    """
    alphabets = tuple(alphabets) if alphabets is not None else (2,) * p
    by_level = [[1]]
    next_id = 2
    edges = []
    for lv in range(p):
        slots = []
        for v in by_level[lv]:
            k = alphabets[lv]
            if full:
                syms = list(range(1, k + 1))
            else:
                m = int(rng.integers(1, k + 1))
                syms = sorted(rng.choice(np.arange(1, k + 1), size=m, replace=False).tolist())
            slots.extend((v, s) for s in syms)
        if lv == p - 1:
            width = 1
        else:
            width = min(int(rng.integers(1, max_width + 1)), len(slots))
        targets = list(range(next_id, next_id + width))
        next_id += width
        by_level.append(targets)
        order = rng.permutation(len(slots))
        assigned = {}
        for j, idx in enumerate(order):
            assigned[slots[idx]] = targets[j] if j < width else targets[int(rng.integers(width))]
        for v in by_level[lv]:
            mine = [(s, assigned[(u, s)]) for (u, s) in slots if u == v]
            probs = rng.dirichlet(np.ones(len(mine)))
            edges.extend(Edge(v, t, s, None, float(q)) for (s, t), q in zip(mine, probs))
    levels = {v: lv for lv, states in enumerate(by_level) for v in states}
    return Apfa(alphabets, levels, tuple(edges))


def random_counted(rng, p, n=200, **kwargs) -> tuple[Apfa, Dataset]:
    """Random model with counts from data simulated under it."""
    a = random_apfa(rng, p, **kwargs)
    d = simulate(a, n, int(rng.integers(2**31)))
    return count_data(a.stripped(), d), d


def random_dataset(rng, p_max=5, k_max=3, n_max=500, n_min=1) -> Dataset:
    """Rows drawn from a random sparse joint distribution."""
    p = int(rng.integers(1, p_max + 1))
    alphabets = tuple(int(k) for k in rng.integers(1, k_max + 1, size=p))
    n = int(rng.integers(n_min, n_max + 1))
    space = int(np.prod(alphabets))
    support = rng.choice(space, size=int(rng.integers(1, min(space, 30) + 1)), replace=False)
    weights = rng.dirichlet(np.ones(len(support)))
    flat = rng.choice(support, size=n, p=weights)
    rows = np.array(np.unravel_index(flat, alphabets)).T + 1
    return Dataset(rows.reshape(n, p), alphabets)


def brute_loglik(model: Apfa, d: Dataset) -> float:
    """Sum of per-row log probabilities under a model with probabilities."""
    return math.fsum(math.log(probability_of(model, row)) for row in d.rows.tolist())


def random_pair(rng, a: Apfa):
    """Two distinct states of a random inner level, or None."""
    levels = [lv for lv in range(1, a.p) if len(a.by_level[lv]) >= 2]
    if not levels:
        return None
    lv = levels[int(rng.integers(len(levels)))]
    v, w = rng.choice(a.by_level[lv], size=2, replace=False)
    return int(v), int(w)
