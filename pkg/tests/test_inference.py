import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from apfa_lab.catalog import (
    full_support_data,
    full_support_merged,
    full_support_tree,
    missing_cell_tree,
)
from apfa_lab.errors import ModelError
from apfa_lab.estimation import fit_mle
from apfa_lab.inference import (
    chi2_upper_tail,
    deviance,
    g2_independence,
    local_lrt,
    merge_test,
    nested_test,
    node_symbol_table,
    outdegree_df,
)
from apfa_lab.ingest import sample_apfa
from apfa_lab.merging import merge

from .helpers import random_dataset, random_pair


def test_g2_matches_scipy_log_likelihood_statistic():
    table = [[12, 5, 9], [3, 14, 8]]
    g2, df = g2_independence(table)
    ref, _, ref_df, _ = stats.chi2_contingency(table, correction=False, lambda_="log-likelihood")
    assert g2 == pytest.approx(ref, rel=1e-12)
    assert df == ref_df == 2


def test_g2_proportional_rows_is_exactly_zero():
    assert g2_independence([[3, 6, 9], [1, 2, 3]]) == (0.0, 2)
    assert g2_independence([[0.5, 1.5], [1, 3]])[0] == 0.0


def test_g2_zero_rows_and_columns_drop_out_of_df():
    g2, df = g2_independence([[4, 0, 6], [0, 0, 0], [5, 0, 1]])
    ref, _ = g2_independence([[4, 6], [5, 1]])
    assert (g2, df) == (ref, 1)
    assert g2_independence([[5, 0], [7, 0]]) == (0.0, 0)


@pytest.mark.parametrize("table", [[], [[]], [[1, 2], [3]], [[0, 0], [0, 0]], [[1, -1], [2, 2]]])
def test_g2_rejects_bad_tables(table):
    with pytest.raises(ValueError):
        g2_independence(table)


@settings(max_examples=100, deadline=None)
@given(
    cells=st.lists(st.lists(st.integers(0, 40), min_size=3, max_size=3), min_size=2, max_size=4),
    k=st.integers(2, 5),
)
def test_g2_invariances(cells, k):
    if sum(map(sum, cells)) == 0:
        return
    g2, df = g2_independence(cells)
    assert g2 >= 0.0
    # row and column permutations leave it unchanged
    swapped = [list(reversed(r)) for r in reversed(cells)]
    assert g2_independence(swapped)[0] == pytest.approx(g2, abs=1e-9)
    # replicating every observation k times multiplies it by k
    assert g2_independence([[k * x for x in r] for r in cells]) == (pytest.approx(k * g2, abs=1e-8), df)


@pytest.mark.parametrize("x, df", [(0.5, 1), (3.84, 1), (7.36, 15), (53.12, 3), (0.0, 4), (120.0, 7)])
def test_chi2_tail_against_numerical_integration(x, df):
    k = df / 2.0
    density = lambda t: t ** (k - 1) * math.exp(-t / 2) / (2**k * math.gamma(k))
    ref = 1.0 - integrate.quad(density, 0.0, x, limit=200)[0] if x < df else integrate.quad(density, x, math.inf, limit=200)[0]
    assert chi2_upper_tail(x, df) == pytest.approx(ref, rel=1e-7, abs=1e-14)


def test_chi2_tail_edge_cases():
    assert chi2_upper_tail(1.0, 0) is None
    assert chi2_upper_tail(0.0, 3) == 1.0
    with pytest.raises(ValueError):
        chi2_upper_tail(-1.0, 2)


def test_node_symbol_table_and_local_test():
    t = node_symbol_table(full_support_tree(), (3, 2))
    assert t.states == (2, 3) and t.symbols == (1, 2)
    assert t.cells == ((5, 31), (32, 2))
    assert "X=1" in t.format()
    g2, df = local_lrt(full_support_tree(), (2, 3))
    assert g2 == pytest.approx(52.587, abs=1e-3) and df == 1
    with pytest.raises(ModelError):
        node_symbol_table(full_support_tree(), (2, 4))
    with pytest.raises(ModelError):
        node_symbol_table(full_support_tree().stripped(), (2, 3))


def test_merge_test_full_support():
    r = merge_test(full_support_tree(), (2, 3))
    assert r.g2 == pytest.approx(53.1228, abs=1e-3)
    assert (r.df_adjusted, r.df_unadjusted) == (3, 3)
    assert [p.group for p in r.parts] == [(2, 3), (4, 6), (5, 7)]
    assert r.p_value == pytest.approx(stats.chi2.sf(r.g2, 3), rel=1e-9)
    ll_big = fit_mle(full_support_tree()).loglik
    ll_small = fit_mle(full_support_merged()).loglik
    assert r.g2 == pytest.approx(deviance(ll_big, ll_small), abs=1e-9)
    d = r.to_dict()
    assert d["df_adjusted"] == 3 and len(d["parts"]) == 3
    assert "total" in r.format_table()


def test_merge_test_missing_cell():
    r = merge_test(missing_cell_tree(), (2, 3))
    assert r.g2 == pytest.approx(67.288, abs=1e-2)
    assert [(p.group, p.df) for p in r.parts] == [((2, 3), 1), ((4, 6), 1)]
    assert r.parts[0].g2 == pytest.approx(67.112, abs=5e-3)
    assert r.parts[1].g2 == pytest.approx(0.176, abs=5e-3)
    assert (r.df_adjusted, r.df_unadjusted) == (2, 3)


def test_nested_test_equals_merge_test():
    r = nested_test(full_support_tree(), full_support_merged())
    m = merge_test(full_support_tree(), (2, 3))
    assert r.g2 == m.g2 and r.df_adjusted == m.df_adjusted and r.df_unadjusted == m.df_unadjusted


def test_nested_test_requires_matching_counts():
    from apfa_lab.dataset import Dataset
    from apfa_lab.ingest import count_data

    fewer = Dataset(full_support_data().rows[:60], (2, 2, 2))
    small = count_data(full_support_merged().stripped(), fewer)
    with pytest.raises(ModelError):
        nested_test(full_support_tree(), small)
    with pytest.raises(ModelError):
        nested_test(full_support_tree().stripped(), full_support_merged())


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_nested_test_is_additive_over_merge_order(seed):
    rng = np.random.default_rng(seed)
    d = random_dataset(rng, p_max=5, k_max=3, n_max=300)
    big = sample_apfa(d)
    first = random_pair(rng, big)
    if first is None:
        return
    mid = merge(big, first)
    second = random_pair(rng, mid)
    if second is None:
        return
    small = merge(mid, second)
    direct = nested_test(big, small)
    stepwise = nested_test(big, mid).g2 + nested_test(mid, small).g2
    ll = [fit_mle(x).loglik for x in (big, mid, small)]
    assert direct.g2 == pytest.approx(deviance(ll[0], ll[2]), abs=1e-9)
    assert direct.g2 == pytest.approx(stepwise, abs=1e-9)
    assert direct.g2 == math.fsum(p.g2 for p in direct.parts)
    assert direct.df_unadjusted == nested_test(big, mid).df_unadjusted + nested_test(mid, small).df_unadjusted


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_outdegree_route_to_adjusted_df_on_full_support_data(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(2, 5))
    alphabets = tuple(int(k) for k in rng.integers(2, 4, size=p))
    # every outcome occurs, so all tables are full and every fused set is a pair
    cells = np.array(np.meshgrid(*[np.arange(1, k + 1) for k in alphabets], indexing="ij")).reshape(p, -1).T
    reps = rng.integers(1, 6, size=len(cells))
    from apfa_lab.dataset import Dataset

    d = Dataset(np.repeat(cells, reps, axis=0), alphabets)
    a = sample_apfa(d)
    pair = random_pair(rng, a)
    if pair is None:
        return
    r = merge_test(a, pair)
    assert outdegree_df(a, pair) == r.df_adjusted == r.df_unadjusted
