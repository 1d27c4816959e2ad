import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from apfa_lab.automaton import Apfa, Edge, isomorphism, validate
from apfa_lab.catalog import (
    full_support_tree,
    missing_cell_merged,
    missing_cell_tree,
    second_order_chain,
    variable_length_chain,
)
from apfa_lab.errors import ModelError, NotNestedError
from apfa_lab.ingest import sample_apfa
from apfa_lab.merging import (
    MergeWorkspace,
    check_nesting,
    merge,
    merge_list,
    merge_with_groups,
    submodel_partition,
)

from .helpers import random_apfa, random_counted, random_dataset, random_pair


def test_full_support_merge_list():
    ml = merge_list(full_support_tree(), (3, 2))
    assert ml.level == 1
    assert ml.groups == ((2, 3), (4, 6), (5, 7))
    assert ml.group_levels == (1, 2, 2)
    assert ml.seed == (2, 3)


def test_full_support_merge_counts():
    m = merge(full_support_tree(), (2, 3))
    assert validate(m).ok
    assert sorted(m.levels) == [1, 2, 4, 5, 8]
    assert m.edge(1, 1).target == m.edge(1, 2).target == 2
    assert (m.edge(2, 1).count, m.edge(2, 2).count) == (37, 33)
    assert (m.edge(4, 1).count, m.edge(4, 2).count) == (18, 19)
    assert (m.edge(5, 1).count, m.edge(5, 2).count) == (10, 23)


def test_merge_of_missing_cell_tree():
    ml = merge_list(missing_cell_tree(), (2, 3))
    assert ml.groups == ((2, 3), (4, 6))
    m = missing_cell_merged()
    assert validate(m).ok
    assert len(m.by_level[2]) == 2


@pytest.mark.parametrize("seed_states, match", [((1,), "two"), ((8, 8), "two"), ((1, 2), "same level"), ((2, 4), "same level"), ((2,), "two"), ((2, 99), "unknown")])
def test_invalid_seeds(seed_states, match):
    with pytest.raises(ModelError, match=match):
        merge(full_support_tree(), seed_states)


def _normalized(groups):
    return sorted(tuple(sorted(g)) for g in groups)


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(2, 5))
def test_level_sweep_and_recursive_merge_agree(seed, p):
    rng = np.random.default_rng(seed)
    a = random_apfa(rng, p, max_width=4, alphabets=tuple(rng.integers(1, 4, size=p)))
    pair = random_pair(rng, a)
    if pair is None:
        return
    ml = merge_list(a, pair)
    merged, groups = merge_with_groups(a, pair)
    assert _normalized(ml.groups) == _normalized(groups)
    assert ml.groups[0] == tuple(sorted(pair)) and groups[0] == tuple(sorted(pair))
    # fused sets are disjoint and each lies within one level
    seen = set()
    for g in ml.groups:
        assert len({a.levels[v] for v in g}) == 1
        assert not seen & set(g)
        seen |= set(g)
    assert len(merged.levels) == len(a.levels) - sum(len(g) - 1 for g in ml.groups)
    assert validate(merged).kinds() <= {"prob-sum"}
    # the minimum id of each fused set survives
    for g in ml.groups:
        assert min(g) in merged.levels and not (set(g) - {min(g)}) & set(merged.levels)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(2, 5))
def test_merge_preserves_counts_and_is_a_submodel(seed, p):
    rng = np.random.default_rng(seed)
    c, _ = random_counted(rng, p, n=100, max_width=4)
    pair = random_pair(rng, c)
    if pair is None:
        return
    m = merge(c, pair)
    assert validate(m).ok
    assert m.total == c.total
    part = submodel_partition(c, m)
    assert _normalized(part.nontrivial()) == _normalized(merge_list(c, pair).groups)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_pair_fast_path_matches_general_cascade(seed):
    rng = np.random.default_rng(seed)
    d = random_dataset(rng, p_max=5, k_max=3, n_max=60)
    a = sample_apfa(d)
    pair = random_pair(rng, a)
    if pair is None:
        return
    ws = MergeWorkspace.from_apfa(a)
    v, w = ws.index[pair[0]], ws.index[pair[1]]
    classes = ws.cascade((v, w))
    pairs = ws.pair_cascade(v, w)
    if pairs is not None:
        assert sorted(tuple(sorted(pq)) for pq in pairs) == sorted(tuple(c) for c in classes)
    # merging through the workspace equals the module-level merge
    ws.merge((v, w))
    assert isomorphism(ws.to_apfa(), merge(a, pair), compare_counts=True) is not None


def test_check_nesting_on_examples():
    assert check_nesting(full_support_tree(), (2, 3)).isomorphic
    ev = check_nesting(missing_cell_tree(), (2, 3))
    assert ev.isomorphic and ev.mapping is not None
    assert isomorphism(ev.merged_completion, ev.completed_merge, compare_counts=True) is not None


def test_submodel_partition_between_chains():
    part = submodel_partition(second_order_chain(), variable_length_chain())
    assert part.nontrivial() == [(4, 6), (8, 10), (12, 14)]


def test_submodel_partition_failures():
    with pytest.raises(NotNestedError):
        submodel_partition(variable_length_chain(), second_order_chain())
    with pytest.raises(ModelError):
        submodel_partition(second_order_chain(4), variable_length_chain(5))
    # support grows when {2,3} merge, so inclusion of the raw graphs fails
    with pytest.raises(NotNestedError, match="support"):
        submodel_partition(missing_cell_tree(), missing_cell_merged(), require_inclusion=True)
    assert submodel_partition(missing_cell_tree(), missing_cell_merged()).nontrivial() == [(2, 3), (4, 6)]


def test_corresponding_descendants_are_closed_transitively():
    # 4~5 via symbol 1 and 5~6 via symbol 2, so 4, 5 and 6 all fuse
    a = Apfa.from_edges(
        (2, 2, 1),
        [Edge(1, 2, 1), Edge(1, 3, 2), Edge(2, 4, 1), Edge(2, 5, 2), Edge(3, 5, 1), Edge(3, 6, 2),
         Edge(4, 7, 1), Edge(5, 7, 1), Edge(6, 7, 1)],
    )
    assert merge_list(a, (2, 3)).groups == ((2, 3), (4, 5, 6))
    merged, groups = merge_with_groups(a, (2, 3))
    assert groups == ((2, 3), (4, 5, 6))
    assert sorted(merged.levels) == [1, 2, 4, 7]


def test_merging_parallel_edges_fuses_targets():
    # merging 2 and 3 forces their successors by symbol 1 together
    a = Apfa.from_edges(
        (2, 2, 1),
        [Edge(1, 2, 1), Edge(1, 3, 2), Edge(2, 4, 1), Edge(2, 5, 2), Edge(3, 5, 1), Edge(3, 4, 2),
         Edge(4, 6, 1), Edge(5, 6, 1)],
    )
    assert merge_list(a, (2, 3)).groups == ((2, 3), (4, 5))
    m = merge(a, (2, 3))
    assert sorted(m.levels) == [1, 2, 4, 6]
    assert m.edge(2, 1).target == m.edge(2, 2).target == 4
