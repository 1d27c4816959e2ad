"""Maximum likelihood fitting, marginals, dimension and information criteria."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .automaton import Apfa, completed_state_counts
from .errors import ModelError


def xlogy_ratio(n: int, total: int) -> float:
    """n * log(n / total) with 0 log 0 = 0."""
    if n == 0:
        return 0.0
    return n * math.log(n / total)


@dataclass(frozen=True, eq=False)
class FittedApfa:
    apfa: Apfa
    loglik: float
    dim: int
    n: int
    inestimable: frozenset[int]
    state_loglik: dict[int, float]

    @property
    def aic(self) -> float:
        return information_criterion(self, 2.0)

    @property
    def bic(self) -> float:
        return information_criterion(self, math.log(self.n)) if self.n > 0 else float("nan")


def _state_terms(a: Apfa) -> dict[int, float]:
    terms = {}
    for v, edges in a.out.items():
        if not edges:
            continue
        nv = sum(e.count for e in edges.values())
        terms[v] = math.fsum(xlogy_ratio(e.count, nv) for e in edges.values())
    return terms


def loglik_of_counts(c: Apfa) -> float:
    """Maximized log-likelihood of a counted automaton without refitting it."""
    if not c.is_counted:
        raise ModelError("automaton carries no edge counts")
    return math.fsum(_state_terms(c).values())


def fit_mle(c: Apfa) -> FittedApfa:
    """Relative-frequency estimates per state.

    States without observations (e.g. completion states) get uniform
    probabilities and are listed in ``inestimable``.
    """
    if not c.is_counted:
        raise ModelError("automaton carries no edge counts")
    edges = []
    inestimable = set()
    for v, out in c.out.items():
        if not out:
            continue
        nv = sum(e.count for e in out.values())
        if nv == 0:
            inestimable.add(v)
            edges.extend(replace(e, prob=1.0 / len(out)) for e in out.values())
        else:
            edges.extend(replace(e, prob=e.count / nv) for e in out.values())
    fitted = c.with_edges(edges)
    terms = _state_terms(c)
    return FittedApfa(
        apfa=fitted,
        loglik=math.fsum(terms.values()),
        dim=dimension(c),
        n=c.total,
        inestimable=frozenset(inestimable),
        state_loglik=terms,
    )


def log_likelihood(f: FittedApfa | Apfa) -> float:
    if isinstance(f, FittedApfa):
        return f.loglik
    return loglik_of_counts(f)


def marginals(f: FittedApfa) -> tuple[dict[int, float], dict[tuple[int, int], float]]:
    """Sample proportions of rows passing through each state and edge."""
    a = f.apfa
    n = f.n
    if n < 1:
        raise ModelError("marginals need at least one observation")
    nodes = {v: cnt / n for v, cnt in a.state_counts.items()}
    edges = {e.key: e.count / n for e in a.edges}
    return nodes, edges


def dimension(a: Apfa) -> int:
    """Free parameters over the states that carry information.

    Each non-sink state contributes ``|next alphabet| - 1``; on a counted model
    states with zero count are skipped as inestimable.  Absent edges are read as
    random zeros, so an incomplete state still contributes its full alphabet.
    """
    counted = a.is_counted
    counts = a.state_counts if counted else None
    total = 0
    for v, lv in a.levels.items():
        if lv >= a.p:
            continue
        if counted and counts[v] == 0:
            continue
        total += a.alphabets[lv] - 1
    return total


def outdegree_dimension(a: Apfa) -> int:
    """Sum over non-sink states of (outdegree - 1)."""
    return sum(len(a.out[v]) - 1 for v, lv in a.levels.items() if lv < a.p)


def completed_dimension(a: Apfa) -> int:
    """Dimension of the completion, counted without building it."""
    per_level = completed_state_counts(a)
    return sum(per_level[lv] * (a.alphabets[lv] - 1) for lv in range(a.p))


def information_criterion(f: FittedApfa, alpha: float) -> float:
    """-2 loglik + alpha * dim; alpha = 2 is AIC, alpha = log N is BIC."""
    if alpha < 0:
        raise ValueError("penalty weight must be nonnegative")
    return -2.0 * f.loglik + alpha * f.dim
