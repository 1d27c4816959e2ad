"""Automata whose edge probabilities depend on a baseline covariate.

A categorical covariate gives every covariate level its own set of edge
probabilities on one shared graph.  A continuous covariate enters a logistic
model per state for binary variables:
``log(pi / (1 - pi)) = a + b * z`` with ``pi`` the probability of symbol 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import special

from .automaton import Apfa
from .dataset import CATEGORICAL, CONTINUOUS, Dataset
from .errors import DataError, ModelError
from .estimation import completed_dimension, fit_mle
from .inference import TestPart, TestResult, _result, local_lrt, merge_test
from .ingest import count_data, prefix_levels, route, sample_apfa
from .merging import MergeWorkspace, merge, merge_list
from .selection import (
    PENALIZED,
    PairScore,
    PenalizedScorer,
    SelectionConfig,
    SelectionResult,
    greedy_merge,
    sample_loglik_dim,
    select,
)

MAX_ITER = 50
GRAD_TOL = 1e-8


def _require_covariate(d: Dataset, kind: str) -> None:
    if d.covariate is None:
        raise DataError("dataset has no covariate column")
    if d.covariate_kind != kind:
        raise DataError(f"a {kind} covariate is required, found {d.covariate_kind}")


def covariate_levels(d: Dataset) -> tuple:
    _require_covariate(d, CATEGORICAL)
    return tuple(int(z) for z in np.unique(d.covariate))


# -- categorical covariate -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class GroupedCounts:
    """Edge counts of one graph, split by covariate level."""

    apfa: Apfa
    labels: tuple
    groups: dict
    fits: dict

    @property
    def loglik(self) -> float:
        return math.fsum(f.loglik for f in self.fits.values())

    @property
    def dim(self) -> int:
        return sum(f.dim for f in self.fits.values())

    @property
    def n(self) -> int:
        return self.apfa.total

    def probabilities(self, label) -> Apfa:
        return self.fits[label].apfa

    def information_criterion(self, alpha: float) -> float:
        if alpha < 0:
            raise ValueError("penalty weight must be nonnegative")
        return -2.0 * self.loglik + alpha * self.dim


def fit_grouped(c: Apfa, d: Dataset, labels: Iterable | None = None) -> GroupedCounts:
    """Within-level relative frequencies on the graph ``c``.

    ``labels`` may list covariate levels explicitly; a listed level without
    rows is an error.
    """
    _require_covariate(d, CATEGORICAL)
    labels = tuple(labels) if labels is not None else covariate_levels(d)
    groups = {}
    for z in labels:
        sub = d.subset(d.covariate == z)
        if sub.n == 0:
            raise DataError(f"covariate level {z} has no rows")
        groups[z] = count_data(c, sub)
    total = count_data(c, d.without_covariate())
    if sum(g.total for g in groups.values()) != total.total:
        raise DataError("covariate levels do not cover every row")
    return GroupedCounts(total, labels, groups, {z: fit_mle(g) for z, g in groups.items()})


def conditional_local_lrt(g: GroupedCounts, group: Iterable[int]) -> tuple[float, int]:
    group = tuple(group)
    terms, df = [], 0
    for z in g.labels:
        g2, k = local_lrt(g.groups[z], group)
        terms.append(g2)
        df += k
    return math.fsum(terms), df


def conditional_merge_test(g: GroupedCounts, s: Iterable[int]) -> TestResult:
    ml = merge_list(g.apfa, s)
    parts = []
    for grp, lv in zip(ml.groups, ml.group_levels):
        for z in g.labels:
            g2, k = local_lrt(g.groups[z], grp)
            parts.append(TestPart(grp, lv, g2, k, z))
    drop = completed_dimension(g.apfa) - completed_dimension(merge(g.apfa, ml.seed))
    return _result(parts, drop * len(g.labels))


def covariate_global_test(d: Dataset) -> TestResult:
    """Test equality of the outcome distribution across covariate levels.

    The covariate is placed in front of the outcomes as an extra first
    variable and all level-1 states of the resulting sample automaton are
    merged.
    """
    labels = covariate_levels(d)
    if len(labels) < 2:
        raise DataError("the covariate takes a single value; nothing to compare")
    codes = np.searchsorted(np.asarray(labels), d.covariate) + 1
    rows = np.column_stack([codes, d.rows])
    aug = Dataset(rows, (len(labels),) + d.alphabets)
    c = sample_apfa(aug)
    level1 = c.by_level[1]
    if len(level1) < 2:
        raise DataError("only one covariate level is observed")
    return merge_test(c, level1)


# -- logistic edge models ------------------------------------------------------


@dataclass(frozen=True)
class LogisticFit:
    """Fit of ``logit P(symbol 2) = a + b z`` for one state.

    ``a`` and ``b`` are None when the data are separated (no finite maximum);
    ``loglik`` is then the supremum of the log-likelihood.
    """

    n: int
    a: float | None
    b: float | None
    se_a: float | None
    se_b: float | None
    loglik: float
    iterations: int
    converged: bool
    max_gradient: float
    separated: str | None = None
    slope_estimable: bool = True

    def prob(self, z) -> np.ndarray:
        if self.a is None:
            raise ModelError("no finite estimate under separation")
        return special.expit(self.a + self.b * np.asarray(z, dtype=float))


def logistic_loglik(a: float, b: float, z, y) -> float:
    eta = a + b * np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def logistic_score(a: float, b: float, z, y) -> np.ndarray:
    """Gradient of :func:`logistic_loglik` with respect to (a, b)."""
    z = np.asarray(z, dtype=float)
    r = np.asarray(y, dtype=float) - special.expit(a + b * z)
    return np.array([r.sum(), (r * z).sum()])


def _xlogx_ratio(k: int, m: int) -> float:
    return 0.0 if k == 0 else k * math.log(k / m)


def separation(z: np.ndarray, y: np.ndarray) -> tuple[str | None, float]:
    """Kind of separation (None, "complete" or "quasi") and the supremum log-likelihood."""
    if y.all() or not y.any():
        return "complete", 0.0
    z0, z1 = z[~y], z[y]
    lo0, hi0, lo1, hi1 = z0.min(), z0.max(), z1.min(), z1.max()
    if hi0 < lo1 or hi1 < lo0:
        return "complete", 0.0
    if hi0 == lo1 or hi1 == lo0:
        t = hi0 if hi0 == lo1 else hi1
        if lo0 == hi0 == lo1 == hi1:
            return None, 0.0
        tied = z == t
        m = int(tied.sum())
        k = int(y[tied].sum())
        return "quasi", _xlogx_ratio(k, m) + _xlogx_ratio(m - k, m)
    return None, 0.0


def fit_logistic(z, y, max_iter: int = MAX_ITER, tol: float = GRAD_TOL) -> LogisticFit:
    """Newton-Raphson on a standardized covariate; estimates on the original scale.

    ``y`` is True where the modelled symbol (2) occurred.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=bool)
    n = len(y)
    if n == 0:
        raise ModelError("no observations to fit")
    sep, sup = separation(z, y)
    if sep is not None:
        return LogisticFit(n, None, None, None, None, sup, 0, False, 0.0, sep)
    mean = float(z.mean())
    sd = float(z.std())
    constant = not sd > 0
    yf = y.astype(float)
    if constant:
        X = np.ones((n, 1))
    else:
        X = np.column_stack([np.ones(n), (z - mean) / sd])
    beta = np.zeros(X.shape[1])
    ybar = yf.mean()
    beta[0] = math.log(ybar / (1 - ybar))
    converged = False
    max_grad = math.inf
    it = 0
    H = None
    for it in range(1, max_iter + 1):
        pi = special.expit(X @ beta)
        g = X.T @ (yf - pi)
        g_orig = g if constant else np.array([g[0], sd * g[1] + mean * g[0]])
        max_grad = float(np.max(np.abs(g_orig)))
        W = pi * (1 - pi)
        H = X.T @ (X * W[:, None])
        if max_grad < tol:
            converged = True
            break
        beta = beta + np.linalg.solve(H, g)
    if not converged:
        pi = special.expit(X @ beta)
        g = X.T @ (yf - pi)
        g_orig = g if constant else np.array([g[0], sd * g[1] + mean * g[0]])
        max_grad = float(np.max(np.abs(g_orig)))
        H = X.T @ (X * (pi * (1 - pi))[:, None])
        converged = max_grad < tol
    cov = np.linalg.inv(H)
    if constant:
        a, b = float(beta[0]), 0.0
        se_a, se_b = float(math.sqrt(cov[0, 0])), None
    else:
        J = np.array([[1.0, -mean / sd], [0.0, 1.0 / sd]])
        a, b = J @ beta
        cov_o = J @ cov @ J.T
        se_a, se_b = float(math.sqrt(cov_o[0, 0])), float(math.sqrt(cov_o[1, 1]))
    ll = float(np.sum(yf * (X @ beta) - np.logaddexp(0.0, X @ beta)))
    return LogisticFit(n, float(a), float(b), se_a, se_b, ll, it, converged, max_grad, None, not constant)


@dataclass(frozen=True, eq=False)
class LogisticEdgeModel:
    apfa: Apfa
    fits: dict
    covariate: np.ndarray
    rows: np.ndarray
    states: np.ndarray

    @property
    def loglik(self) -> float:
        return math.fsum(f.loglik for f in self.fits.values())

    @property
    def dim(self) -> int:
        return 2 * len(self.fits)

    def prob(self, state: int, symbol: int, z) -> np.ndarray:
        p2 = self.fits[state].prob(z)
        return p2 if symbol == 2 else 1.0 - p2

    def rows_of(self, group: Iterable[int]) -> np.ndarray:
        group = list(group)
        lv = self.apfa.levels[group[0]]
        return np.flatnonzero(np.isin(self.states[:, lv], group))

    def fit_group(self, group: Iterable[int]) -> LogisticFit:
        group = list(group)
        lv = self.apfa.levels[group[0]]
        idx = self.rows_of(group)
        if idx.size == 0:
            raise ModelError(f"states {group} have no observations")
        return fit_logistic(self.covariate[idx], self.rows[idx, lv] == 2)


def _require_binary(alphabets, levels) -> None:
    bad = [i + 1 for i in levels if alphabets[i] != 2]
    if bad:
        raise ModelError(f"logistic edge models need binary variables; X{bad[0]} is not binary")


def fit_logistic_edges(c: Apfa, d: Dataset) -> LogisticEdgeModel:
    _require_covariate(d, CONTINUOUS)
    _require_binary(c.alphabets, range(c.p))
    states = route(c, d)
    fits = {}
    for v, lv in sorted(c.levels.items()):
        if lv >= c.p:
            continue
        idx = np.flatnonzero(states[:, lv] == v)
        if idx.size == 0:
            raise ModelError(f"state {v} has no observations")
        fits[v] = fit_logistic(d.covariate[idx], d.rows[idx, lv] == 2)
    counted = count_data(c, d.without_covariate())
    return LogisticEdgeModel(counted, fits, d.covariate, d.rows, states)


def _logistic_parts(groups, levels, fit_one, fit_many):
    parts = []
    flags = set()
    for grp, lv in zip(groups, levels):
        singles = [fit_one(x) for x in grp]
        pooled = fit_many(grp)
        g2 = max(0.0, 2.0 * (math.fsum(f.loglik for f in singles) - pooled.loglik))
        for f in singles + [pooled]:
            if f.separated:
                flags.add("separation: df counts parameters without a finite estimate")
            elif not f.converged:
                flags.add("logistic fit did not converge")
            elif not f.slope_estimable:
                flags.add("covariate constant within a state: slope not estimable")
        parts.append(TestPart(tuple(grp), lv, g2, 2 * (len(grp) - 1)))
    return parts, sorted(flags)


def logistic_merge_test(model: LogisticEdgeModel, v: int, w: int) -> TestResult:
    """Separate logistic fits against one common fit, over the merge-list of {v, w}."""
    ml = merge_list(model.apfa, (v, w))
    parts, flags = _logistic_parts(
        ml.groups, ml.group_levels, lambda x: model.fits[x] if x in model.fits else model.fit_group([x]), model.fit_group
    )
    return _result(parts, None, flags)


class LogisticScorer:
    """Penalized score with logistic transition models in the selection sweep."""

    def __init__(self, ws: MergeWorkspace, d: Dataset, node_of_row, alpha: float):
        self.ws = ws
        self.d = d
        self.node_of_row = node_of_row
        self.alpha = alpha
        self._cache: dict[tuple, LogisticFit] = {}

    def fit_members(self, members: tuple, level: int) -> LogisticFit:
        key = (level, members)
        f = self._cache.get(key)
        if f is None:
            idx = np.flatnonzero(np.isin(self.node_of_row[level], members))
            f = fit_logistic(self.d.covariate[idx], self.d.rows[idx, level] == 2)
            self._cache[key] = f
        return f

    def state_fit(self, x: int) -> LogisticFit:
        return self.fit_members(tuple(sorted(self.ws.members[x])), self.ws.level[x])

    def __call__(self, v: int, w: int) -> PairScore:
        ws = self.ws
        classes = ws.cascade((v, w))
        levels = [ws.level[c[0]] for c in classes]
        parts, flags = _logistic_parts(
            classes,
            levels,
            self.state_fit,
            lambda grp: self.fit_members(
                tuple(sorted(m for x in grp for m in ws.members[x])), ws.level[grp[0]]
            ),
        )
        g2 = math.fsum(p.g2 for p in parts)
        df = sum(p.df for p in parts)
        return PairScore(g2 - self.alpha * df, g2, df, df, tuple(flags))


def _node_of_row(levels, p: int) -> list[np.ndarray]:
    sizes = [1] + [len(lv.count) for lv in levels[:-1]]
    offsets = np.cumsum([0] + sizes)
    out = [np.zeros(len(levels[0].row_index), dtype=np.int64)]
    for q in range(p - 1):
        out.append(offsets[q + 1] + levels[q].row_index)
    return out


def conditional_select(d: Dataset, config: SelectionConfig | None = None) -> SelectionResult:
    """Greedy selection with covariate-dependent transition probabilities."""
    config = config or SelectionConfig()
    if d.covariate is None:
        raise DataError("dataset has no covariate column")
    if config.score != PENALIZED:
        raise ModelError("covariate models support the penalized-likelihood score only")
    if d.n < 1:
        raise DataError("model selection needs at least one observation")
    alpha = config.alpha_for(d.n)
    levels = prefix_levels(d.rows)
    if d.covariate_kind == CATEGORICAL:
        labels = covariate_levels(d)
        if len(labels) == 1:
            result = select(d.without_covariate(), config)
            grouped = fit_grouped(result.apfa.stripped(), d, labels)
            return SelectionResult(result.fitted, result.trace, config, alpha, result.ic, result.sample_ic, {"grouped": grouped})
        codes = np.searchsorted(np.asarray(labels), d.covariate)
        ws = MergeWorkspace.from_prefixes(d.alphabets, levels, codes, len(labels))
        loglik, dim = sample_loglik_dim(d, levels, codes, len(labels))
        ic0 = -2.0 * loglik + alpha * dim
        scorer = PenalizedScorer(ws, alpha)
        steps = greedy_merge(
            ws, scorer, lambda s: s.score < 0 or s.df == 0, alpha=alpha, ic_start=ic0,
            threads=config.threads, reuse_scores=config.reuse_scores, record=config.trace,
        )
        final = ws.to_apfa().renumbered()
        grouped = fit_grouped(final.stripped(), d, labels)
        fitted = fit_mle(final)
        return SelectionResult(
            fitted, tuple(steps), config, alpha, grouped.information_criterion(alpha), ic0, {"grouped": grouped}
        )
    _require_covariate(d, CONTINUOUS)
    _require_binary(d.alphabets, range(d.p))
    ws = MergeWorkspace.from_prefixes(d.alphabets, levels)
    ws.track_members()
    scorer = LogisticScorer(ws, d, _node_of_row(levels, d.p), alpha)
    fits = [scorer.state_fit(x) for lv in range(d.p) for x in ws.live(lv)]
    ic0 = -2.0 * math.fsum(f.loglik for f in fits) + alpha * 2 * len(fits)
    steps = greedy_merge(
        ws, scorer, lambda s: s.score < 0 or s.df == 0, alpha=alpha, ic_start=ic0,
        threads=config.threads, reuse_scores=config.reuse_scores, record=config.trace,
    )
    final = ws.to_apfa().renumbered()
    model = fit_logistic_edges(final.stripped(), d)
    ic = -2.0 * model.loglik + alpha * model.dim
    return SelectionResult(fit_mle(final), tuple(steps), config, alpha, ic, ic0, {"logistic": model})
