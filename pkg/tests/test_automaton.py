import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from apfa_lab.automaton import (
    Apfa,
    Edge,
    complete,
    completed_state_counts,
    completion_size,
    is_complete,
    isomorphism,
    maximal_apfa,
    minimal_apfa,
    outcomes,
    path_for,
    probability_of,
    require_valid,
    simulate,
    validate,
)
from apfa_lab.catalog import all_outcomes, full_support_tree, shared_future_example
from apfa_lab.errors import ModelError, SizeGuardError

from .helpers import random_apfa


def tiny():
    return Apfa.from_edges(
        (2, 2),
        [Edge(1, 2, 1, 3, 0.3), Edge(1, 3, 2, 7, 0.7), Edge(2, 4, 1, 3, 1.0), Edge(3, 4, 2, 7, 1.0)],
    )


def test_valid_examples_pass():
    for a in (tiny(), maximal_apfa((2, 3, 2)), minimal_apfa((3, 2)), shared_future_example(), full_support_tree()):
        assert validate(a).ok


def test_root_sink_and_levels():
    a = tiny()
    assert a.root == 1 and a.sink == 4
    assert a.by_level == [[1], [2, 3], [4]]
    assert a.state_counts == {1: 10, 2: 3, 3: 7, 4: 10}
    assert a.total == 10


def test_levels_inferred_from_edges_reject_skips():
    with pytest.raises(ModelError, match="two different levels"):
        Apfa.from_edges((2, 2), [Edge(1, 2, 1), Edge(2, 3, 1), Edge(1, 3, 2)])


@pytest.mark.parametrize(
    "edges, levels, kind",
    [
        ([Edge(1, 2, 1), Edge(2, 3, 1), Edge(1, 3, 2)], {1: 0, 2: 1, 3: 2}, "levelled"),
        ([Edge(1, 2, 1), Edge(1, 3, 1), Edge(2, 4, 1), Edge(3, 4, 1)], {1: 0, 2: 1, 3: 1, 4: 2}, "symbol"),
        ([Edge(1, 2, 3), Edge(2, 3, 1)], {1: 0, 2: 1, 3: 2}, "symbol"),
        ([Edge(1, 3, 1), Edge(2, 3, 1), Edge(3, 4, 1)], {1: 0, 2: 0, 3: 1, 4: 2}, "root"),
        ([Edge(1, 2, 1), Edge(1, 3, 2), Edge(2, 4, 1)], {1: 0, 2: 1, 3: 1, 4: 2}, "dangling"),
        ([Edge(1, 2, 1), Edge(2, 3, 1)], {1: 0, 2: 1, 3: 2, 9: 5}, "level-range"),
    ],
)
def test_validate_reports_each_violation(edges, levels, kind):
    report = validate(Apfa((2, 2), levels, tuple(edges)))
    assert kind in report.kinds()
    with pytest.raises(ModelError):
        require_valid(Apfa((2, 2), levels, tuple(edges)))


def test_validate_probability_and_count_invariants():
    a = tiny()
    bad_sum = a.with_edges([e if e.key != (1, 1) else Edge(1, 2, 1, 3, 0.4) for e in a.edges])
    assert "prob-sum" in validate(bad_sum).kinds()
    bad_range = a.with_edges([e if e.key != (2, 1) else Edge(2, 4, 1, 3, 1.5) for e in a.edges])
    assert "prob-range" in validate(bad_range).kinds()
    bad_flow = a.with_edges([e if e.key != (2, 1) else Edge(2, 4, 1, 4, 1.0) for e in a.edges])
    assert "count" in validate(bad_flow).kinds()


def test_completion_counts_and_flags():
    a = tiny().stripped()
    c = complete(a)
    assert is_complete(c) and validate(c).ok
    assert len(c.levels) - len(a.levels) == completion_size(a) == 0  # no new states at the last level
    assert sum(e.synthetic for e in c.edges) == 2

    partial = Apfa.from_edges((2, 2, 2), [Edge(1, 2, 1), Edge(2, 3, 2), Edge(3, 4, 1)])
    full = complete(partial)
    assert completion_size(partial) == len(full.levels) - len(partial.levels) == 4
    assert completed_state_counts(partial) == [len(s) for s in full.by_level]
    assert len(full.edges) == 2 + 4 + 8  # complete binary tree with a shared sink
    assert is_complete(full)


def test_completion_keeps_distribution():
    a = shared_future_example()
    c = complete(a)
    assert validate(c).ok
    for x in all_outcomes(a.alphabets):
        assert probability_of(c, x) == pytest.approx(probability_of(a, x), abs=1e-15)


def test_completion_size_guard():
    a = Apfa.from_edges((2,) * 12, [Edge(i, i + 1, 1) for i in range(1, 13)])
    assert completion_size(a) == 2**12 - 2 - 11 + 1 - 1
    with pytest.raises(SizeGuardError):
        complete(a, max_new_states=100)


def test_maximal_and_minimal_sizes():
    m = maximal_apfa((2, 3, 2))
    assert len(m.levels) == 1 + 2 + 6 + 1
    assert [len(s) for s in m.by_level] == [1, 2, 6, 1]
    assert len(minimal_apfa((2, 3, 2)).levels) == 4
    with pytest.raises(SizeGuardError):
        maximal_apfa((2,) * 30)
    with pytest.raises(ModelError):
        minimal_apfa(())


def test_paths_and_probabilities():
    a = tiny()
    assert [e.key for e in path_for(a, (2, 2))] == [(1, 2), (3, 2)]
    assert path_for(a, (1, 2)) is None
    assert probability_of(a, (1, 2)) == 0.0
    assert probability_of(a, (2, 2)) == pytest.approx(0.7)
    with pytest.raises(ModelError):
        path_for(a, (1,))
    with pytest.raises(ModelError):
        probability_of(a.stripped(), (1, 1))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(1, 4))
def test_outcome_probabilities_sum_to_one(seed, p):
    rng = np.random.default_rng(seed)
    a = random_apfa(rng, p, alphabets=tuple(rng.integers(1, 4, size=p)))
    assert validate(a).ok
    total = math.fsum(math.prod(e.prob for e in path) for _, path in outcomes(a))
    assert total == pytest.approx(1.0, abs=1e-12)
    # each path generates exactly its own outcome
    for x, path in outcomes(a):
        assert path_for(a, x) == path


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(1, 4))
def test_isomorphism_survives_relabelling(seed, p):
    rng = np.random.default_rng(seed)
    a = random_apfa(rng, p)
    ids = list(a.levels)
    perm = dict(zip(ids, (np.array(rng.permutation(len(ids))) + 100).tolist()))
    b = a.relabel(perm)
    mapping = isomorphism(a, b, compare_probs=True)
    assert mapping == perm
    assert isomorphism(b.renumbered(), a.renumbered(), compare_probs=True) is not None
    assert b.renumbered().levels == a.renumbered().levels


def test_isomorphism_detects_differences():
    a = tiny()
    assert isomorphism(a, a.stripped()) is not None
    assert isomorphism(a, a.stripped(), compare_counts=True) is None
    other = Apfa.from_edges((2, 2), [Edge(1, 2, 1), Edge(1, 2, 2), Edge(2, 3, 1), Edge(2, 3, 2)])
    assert isomorphism(a, other) is None


def test_simulate_reproducible_and_faithful():
    a = shared_future_example()
    d1, d2 = simulate(a, 40_000, seed=5), simulate(a, 40_000, seed=5)
    assert np.array_equal(d1.rows, d2.rows)
    assert not np.array_equal(d1.rows, simulate(a, 40_000, seed=6).rows)
    freq = {}
    for row in map(tuple, d1.rows.tolist()):
        freq[row] = freq.get(row, 0) + 1
    for x in all_outcomes(a.alphabets):
        q = probability_of(a, x)
        se = math.sqrt(q * (1 - q) / d1.n)
        assert abs(freq.get(x, 0) / d1.n - q) <= 5 * se + 1e-12


def test_simulate_needs_probabilities():
    with pytest.raises(ModelError):
        simulate(tiny().stripped(), 5)


def test_canonical_ids_level_major():
    a = tiny().relabel({1: 10, 2: 30, 3: 20, 4: 5})
    assert a.renumbered().levels == {1: 0, 2: 1, 3: 1, 4: 2}
    assert isomorphism(a.renumbered(), tiny(), compare_counts=True) == {1: 1, 2: 2, 3: 3, 4: 4}
