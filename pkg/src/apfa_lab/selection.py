"""Greedy level-wise model selection by state merging.

Starting from the sample automaton, each level is processed in turn: the most
similar pair of states is merged (with its cascade) until every remaining pair
is dissimilar.  Two similarity scores are available:

* penalized likelihood: ``G2 - alpha * df`` of the merge, where df counts only
  estimable parameters.  Pairs merge when this is negative, which means the
  information criterion ``-2 loglik + alpha * dim`` drops, or when df is zero
  (no parameter is at stake, so the smaller model is kept).
* max difference: the largest absolute difference of estimated transition
  probabilities over corresponding descendants; pairs merge below ``mu``.

Scores of untouched pairs are reused after a merge.  While a level is being
processed every state below it has a single parent, so a merge only changes
the subtrees of the two merged states and reuse is exact.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .automaton import Apfa
from .dataset import Dataset
from .errors import DataError, ModelError
from .estimation import FittedApfa, fit_mle, information_criterion
from .ingest import prefix_levels
from .merging import MergeWorkspace, merge

PENALIZED = "penalized"
MAX_DIFFERENCE = "max_difference"


@dataclass(frozen=True)
class SelectionConfig:
    """``alpha`` is a number, ``"bic"`` or ``"aic"``; give ``mu`` instead for the max-difference score."""

    alpha: float | str | None = "bic"
    mu: float | None = None
    tie_break: str = "lexicographic"
    trace: bool = True
    threads: int = 1
    reuse_scores: bool = True

    def __post_init__(self):
        if self.mu is not None:
            object.__setattr__(self, "alpha", None)
            if not 0 < self.mu <= 1:
                raise ValueError("mu must lie in (0, 1]")
        elif self.alpha is None:
            raise ValueError("give either alpha or mu")
        elif isinstance(self.alpha, str):
            if self.alpha.lower() not in ("bic", "aic"):
                raise ValueError(f"unknown penalty {self.alpha!r}")
            object.__setattr__(self, "alpha", self.alpha.lower())
        elif not self.alpha >= 0:
            raise ValueError("alpha must be nonnegative")
        if self.tie_break != "lexicographic":
            raise ValueError(f"unknown tie-break policy {self.tie_break!r}")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    @property
    def score(self) -> str:
        return MAX_DIFFERENCE if self.mu is not None else PENALIZED

    def alpha_for(self, n: int) -> float | None:
        if self.alpha is None:
            return None
        if self.alpha == "bic":
            return math.log(n)
        if self.alpha == "aic":
            return 2.0
        return float(self.alpha)

    def to_dict(self) -> dict:
        d = {"score": self.score, "tie_break": self.tie_break}
        if self.mu is not None:
            d["mu"] = self.mu
        else:
            d["alpha"] = self.alpha
        return d


def default_threads() -> int:
    env = os.environ.get("APFA_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"APFA_LAB_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


@dataclass(frozen=True)
class PairScore:
    score: float
    g2: float | None = None
    df: int | None = None
    dim_drop: int = 0
    flags: tuple[str, ...] = ()

    @property
    def parsimony(self) -> bool:
        return self.df == 0


@dataclass(frozen=True)
class TraceStep:
    level: int
    pair: tuple[int, int]
    score: float
    g2: float | None
    df: int | None
    ic_before: float | None
    ic_after: float | None
    kind: str
    fused_states: int
    seconds: float | None = None

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "level": self.level,
            "pair": list(self.pair),
            "score": self.score,
            "g2": self.g2,
            "df": self.df,
            "ic_before": self.ic_before,
            "ic_after": self.ic_after,
            "kind": self.kind,
            "fused_states": self.fused_states,
        }
        if timing and self.seconds is not None:
            d["seconds"] = self.seconds
        return d


@dataclass(frozen=True, eq=False)
class SelectionResult:
    fitted: FittedApfa
    trace: tuple[TraceStep, ...]
    config: SelectionConfig
    alpha: float | None
    ic: float | None
    sample_ic: float | None
    extra: dict = field(default_factory=dict)

    @property
    def apfa(self) -> Apfa:
        return self.fitted.apfa


# -- scorers ---------------------------------------------------------------


def _g2_counts(table: Sequence[Sequence[int]]) -> tuple[float, int]:
    """G2 and df of a nonnegative integer table (no validation)."""
    width = len(table[0])
    row_tot = [sum(r) for r in table]
    col_tot = [0] * width
    for r in table:
        for j, x in enumerate(r):
            col_tot[j] += x
    n = sum(row_tot)
    terms = []
    log = math.log
    for i, r in enumerate(table):
        ri = row_tot[i]
        for j, x in enumerate(r):
            if x:
                terms.append(x * log((x * n) / (ri * col_tot[j])))
    nz_rows = sum(1 for t in row_tot if t)
    nz_cols = sum(1 for t in col_tot if t)
    return max(0.0, 2.0 * math.fsum(terms)), (nz_rows - 1) * (nz_cols - 1)


class PenalizedScorer:
    """``G2 - alpha * df`` summed over the cascade and over covariate groups."""

    def __init__(self, ws: MergeWorkspace, alpha: float):
        self.ws = ws
        self.alpha = alpha

    def __call__(self, v: int, w: int) -> PairScore:
        ws = self.ws
        pairs = ws.pair_cascade(v, w)
        if pairs is None:
            g2, df, dim_drop = self._general(v, w)
        else:
            g2, df, dim_drop = self._pairs(pairs)
        return PairScore(g2 - self.alpha * df, g2, df, dim_drop)

    def _general(self, v: int, w: int) -> tuple[float, int, int]:
        ws = self.ws
        terms = []
        df = 0
        dim_drop = 0
        for cls in ws.cascade((v, w)):
            width = ws.alphabets[ws.level[cls[0]]]
            for g in range(ws.G):
                table = ws.table(cls, g)
                positive = sum(1 for r in table if any(r))
                if positive == 0:
                    continue
                dim_drop += (positive - 1) * (width - 1)
                if positive < 2:
                    continue
                g2, k = _g2_counts(table)
                terms.append(g2)
                df += k
        return math.fsum(terms), df, dim_drop

    def _pairs(self, pairs) -> tuple[float, int, int]:
        """Same sums as :meth:`_general` for two-row tables, unrolled."""
        ws = self.ws
        K, G, load, level, alph = ws.K, ws.G, ws.load, ws.level, ws.alphabets
        log, fsum = math.log, math.fsum
        terms = []
        df = 0
        dim_drop = 0
        for x, y in pairs:
            width = alph[level[x]]
            for g in range(G):
                a = [load[(x * K + s) * G + g] for s in range(width)]
                b = [load[(y * K + s) * G + g] for s in range(width)]
                na, nb = sum(a), sum(b)
                if na == 0 or nb == 0:
                    continue
                dim_drop += width - 1
                n = na + nb
                cell_terms = []
                cols = 0
                for s in range(width):
                    ai, bi = a[s], b[s]
                    c = ai + bi
                    if c:
                        cols += 1
                        if ai:
                            cell_terms.append(ai * log((ai * n) / (na * c)))
                        if bi:
                            cell_terms.append(bi * log((bi * n) / (nb * c)))
                terms.append(max(0.0, 2.0 * fsum(cell_terms)))
                df += cols - 1
        return fsum(terms), df, dim_drop


class MaxDifferenceScorer:
    """Largest |difference| of estimated transition probabilities over
    corresponding descendants (same symbol path from each member of the pair).
    Absent edges count as probability zero."""

    def __init__(self, ws: MergeWorkspace):
        self.ws = ws

    def _probs(self, x: int, width: int) -> list[float]:
        ws = self.ws
        counts = [sum(ws.edge_load(x, s, g) for g in range(ws.G)) for s in range(1, width + 1)]
        n = sum(counts)
        return [c / n if n else 0.0 for c in counts]

    def __call__(self, v: int, w: int) -> PairScore:
        ws = self.ws
        best = 0.0
        stack = [(v, w)]
        seen = set()
        K = ws.K
        while stack:
            x, y = stack.pop()
            if x == y or (x, y) in seen:
                continue
            seen.add((x, y))
            lv = ws.level[x]
            if lv >= ws.p:
                continue
            width = ws.alphabets[lv]
            px, py = self._probs(x, width), self._probs(y, width)
            for s in range(width):
                best = max(best, abs(px[s] - py[s]))
                tx, ty = ws.child[x * K + s], ws.child[y * K + s]
                if tx >= 0 and ty >= 0:
                    stack.append((ws.find(tx), ws.find(ty)))
        return PairScore(best)


# -- engine ------------------------------------------------------------------


Scorer = Callable[[int, int], PairScore]


def greedy_merge(
    ws: MergeWorkspace,
    scorer: Scorer,
    eligible: Callable[[PairScore], bool],
    *,
    alpha: float | None,
    ic_start: float | None,
    threads: int = 1,
    reuse_scores: bool = True,
    record: bool = True,
    kind: str = PENALIZED,
) -> list[TraceStep]:
    """Run the level sweep on ``ws`` in place; returns the merge log."""
    steps: list[TraceStep] = []
    ic = ic_start
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for level in range(1, ws.p):
            cache: dict[tuple[int, int], PairScore] = {}
            while True:
                t0 = time.perf_counter()
                live = ws.live(level)
                if len(live) < 2:
                    break
                pairs = list(combinations(live, 2))
                todo = [pq for pq in pairs if pq not in cache] if reuse_scores else pairs
                if pool is not None and len(todo) > 1:
                    results = list(pool.map(lambda pq: scorer(*pq), todo))
                else:
                    results = [scorer(*pq) for pq in todo]
                if reuse_scores:
                    cache.update(zip(todo, results))
                    scored = [(pq, cache[pq]) for pq in pairs]
                else:
                    scored = list(zip(pairs, results))
                best = None
                for pq, sc in scored:
                    if eligible(sc) and (best is None or sc.score < best[1].score):
                        best = (pq, sc)
                if best is None:
                    break
                (v, w), sc = best
                fused = ws.merge((v, w), collect=False)
                # only pairs touching the survivor or the absorbed state change
                for pq in [pq for pq in cache if v in pq or w in pq]:
                    del cache[pq]
                ic_after = None
                if ic is not None and sc.g2 is not None:
                    ic_after = ic + sc.g2 - alpha * sc.dim_drop
                if record:
                    step_kind = "parsimony" if kind == PENALIZED and sc.parsimony and sc.score >= 0 else kind
                    steps.append(
                        TraceStep(
                            level,
                            (ws.ids[v], ws.ids[w]),
                            sc.score,
                            sc.g2,
                            sc.df,
                            ic,
                            ic_after,
                            step_kind,
                            fused,
                            time.perf_counter() - t0,
                        )
                    )
                ic = ic_after
    finally:
        if pool is not None:
            pool.shutdown()
    return steps


def sample_loglik_dim(d: Dataset, levels=None, group_of_row=None, n_groups: int = 1) -> tuple[float, int]:
    """Maximized log-likelihood and dimension of the (grouped) sample automaton."""
    levels = levels if levels is not None else prefix_levels(d.rows)
    terms = []
    dim = 0
    prev = None
    for q, lv in enumerate(levels):
        width = d.alphabets[q]
        if n_groups == 1:
            parent_n = np.full(len(lv.count), d.n) if prev is None else prev[lv.parent]
            terms.append(float(np.sum(lv.count * np.log(lv.count / parent_n))))
            n_states = 1 if prev is None else len(prev)
            dim += n_states * (width - 1)
            prev = lv.count
        else:
            k = len(lv.count)
            per = np.bincount(lv.row_index * n_groups + group_of_row, minlength=k * n_groups).reshape(k, n_groups)
            if prev is None:
                parent = np.bincount(group_of_row, minlength=n_groups)[None, :].repeat(k, axis=0)
                dim += int(np.count_nonzero(np.bincount(group_of_row, minlength=n_groups))) * (width - 1)
            else:
                parent = prev[lv.parent]
                dim += int(np.count_nonzero(prev)) * (width - 1)
            mask = per > 0
            terms.append(float(np.sum(per[mask] * np.log(per[mask] / parent[mask]))))
            prev = per
    return math.fsum(terms), dim


def _check_data(d: Dataset) -> None:
    if d.n < 1:
        raise DataError("model selection needs at least one observation")


def select(d: Dataset, config: SelectionConfig | None = None) -> SelectionResult:
    """Select an automaton for ``d`` by greedy merging from its sample automaton."""
    config = config or SelectionConfig()
    _check_data(d)
    levels = prefix_levels(d.rows)
    ws = MergeWorkspace.from_prefixes(d.alphabets, levels)
    alpha = config.alpha_for(d.n)
    if config.score == PENALIZED:
        loglik, dim = sample_loglik_dim(d, levels)
        ic0 = -2.0 * loglik + alpha * dim
        scorer = PenalizedScorer(ws, alpha)
        steps = greedy_merge(
            ws, scorer, lambda s: s.score < 0 or s.df == 0, alpha=alpha, ic_start=ic0,
            threads=config.threads, reuse_scores=config.reuse_scores, record=config.trace,
        )
    else:
        ic0 = None
        scorer = MaxDifferenceScorer(ws)
        mu = config.mu
        steps = greedy_merge(
            ws, scorer, lambda s: s.score < mu, alpha=None, ic_start=None,
            threads=config.threads, reuse_scores=config.reuse_scores, record=config.trace,
            kind=MAX_DIFFERENCE,
        )
    final = ws.to_apfa().renumbered()
    fitted = fit_mle(final)
    ic = information_criterion(fitted, alpha) if alpha is not None else None
    return SelectionResult(fitted, tuple(steps), config, alpha, ic, ic0)


def selection_trace(result: SelectionResult) -> tuple[TraceStep, ...]:
    if not result.config.trace:
        raise ModelError("selection was run without a trace")
    return result.trace


def replay(start: Apfa, steps: Sequence[TraceStep]) -> Apfa:
    """Apply logged merges in order to the sample automaton; renumbered result."""
    a = start
    for step in steps:
        a = merge(a, step.pair)
    return a.renumbered()
