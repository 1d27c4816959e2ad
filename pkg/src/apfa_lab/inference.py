"""Likelihood-ratio tests between nested automata.

The deviance between an automaton and one obtained from it by merging splits
into independence tests on small contingency tables, one per fused set of
states, whose rows are the fused states and whose columns are the symbols of
the next variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from scipy import special

from .automaton import Apfa
from .errors import ModelError
from .estimation import completed_dimension
from .merging import _check_seed, merge, merge_list, submodel_partition


def _exact(x):
    if isinstance(x, int):
        return x
    f = float(x)
    if f < 0 or math.isnan(f):
        raise ValueError("table cells must be nonnegative")
    return int(f) if f.is_integer() else f


def g2_independence(table: Sequence[Sequence[float]]) -> tuple[float, int]:
    """Likelihood-ratio statistic for independence of rows and columns.

    Empty rows and columns add nothing to the statistic and are dropped from the
    degrees of freedom.  Integer ratios are formed exactly, so tables with
    proportional rows give exactly zero.
    """
    cells = [[_exact(x) for x in row] for row in table]
    if not cells or not cells[0]:
        raise ValueError("empty table")
    width = len(cells[0])
    if any(len(r) != width for r in cells):
        raise ValueError("ragged table")
    if any(x < 0 for r in cells for x in r):
        raise ValueError("table cells must be nonnegative")
    row_tot = [sum(r) for r in cells]
    col_tot = [sum(r[j] for r in cells) for j in range(width)]
    n = sum(row_tot)
    if n <= 0:
        raise ValueError("table has no observations")
    terms = []
    for i, r in enumerate(cells):
        for j, x in enumerate(r):
            if x:
                terms.append(x * math.log((x * n) / (row_tot[i] * col_tot[j])))
    g2 = max(0.0, 2.0 * math.fsum(terms))
    nz_rows = sum(1 for t in row_tot if t)
    nz_cols = sum(1 for t in col_tot if t)
    return g2, (nz_rows - 1) * (nz_cols - 1)


@dataclass(frozen=True)
class NodeSymbolTable:
    states: tuple[int, ...]
    symbols: tuple[int, ...]
    cells: tuple[tuple[int, ...], ...]

    def row_totals(self) -> tuple[int, ...]:
        return tuple(sum(r) for r in self.cells)

    def format(self) -> str:
        width = max(6, *(len(str(x)) + 1 for r in self.cells for x in r))
        head = "state".rjust(7) + "".join(f"{'X=' + str(s):>{width}}" for s in self.symbols)
        lines = [head]
        for v, r in zip(self.states, self.cells):
            lines.append(str(v).rjust(7) + "".join(f"{x:>{width}}" for x in r))
        return "\n".join(lines)


def node_symbol_table(c: Apfa, group: Iterable[int]) -> NodeSymbolTable:
    if not c.is_counted:
        raise ModelError("automaton carries no edge counts")
    states = tuple(sorted(set(group)))
    if not states:
        raise ModelError("empty state group")
    unknown = [v for v in states if v not in c.levels]
    if unknown:
        raise ModelError(f"unknown states {unknown}")
    lvls = {c.levels[v] for v in states}
    if len(lvls) != 1:
        raise ModelError("states of a node-symbol table must share a level")
    lv = lvls.pop()
    if lv >= c.p:
        raise ModelError("the sink has no outgoing edges")
    symbols = tuple(range(1, c.alphabets[lv] + 1))
    cells = tuple(
        tuple(c.out[v][s].count if s in c.out[v] else 0 for s in symbols) for v in states
    )
    return NodeSymbolTable(states, symbols, cells)


def local_lrt(c: Apfa, group: Iterable[int]) -> tuple[float, int]:
    t = node_symbol_table(c, group)
    if sum(t.row_totals()) == 0:
        return 0.0, 0
    return g2_independence(t.cells)


@dataclass(frozen=True)
class TestPart:
    group: tuple[int, ...]
    level: int
    g2: float
    df: int
    covariate_level: object = None


@dataclass(frozen=True)
class TestResult:
    g2: float
    df_adjusted: int
    df_unadjusted: int | None
    p_value: float | None
    parts: tuple[TestPart, ...] = ()
    flags: tuple[str, ...] = field(default=())

    # not a pytest test class despite the name
    __test__ = False

    def to_dict(self) -> dict:
        d = {
            "g2": self.g2,
            "df_adjusted": self.df_adjusted,
            "df_unadjusted": self.df_unadjusted,
            "p_value": self.p_value,
            "parts": [
                {"group": list(p.group), "level": p.level, "g2": p.g2, "df": p.df}
                | ({} if p.covariate_level is None else {"covariate_level": p.covariate_level})
                for p in self.parts
            ],
        }
        if self.flags:
            d["flags"] = list(self.flags)
        return d

    def format_table(self) -> str:
        lines = [f"{'level':>5}  {'states':<24}{'G2':>12}{'df':>5}"]
        for p in self.parts:
            label = "{" + ",".join(map(str, p.group)) + "}"
            if p.covariate_level is not None:
                label += f" z={p.covariate_level}"
            lines.append(f"{p.level:>5}  {label:<24}{p.g2:>12.4f}{p.df:>5}")
        lines.append(f"{'total':>5}  {'':<24}{self.g2:>12.4f}{self.df_adjusted:>5}")
        if self.df_unadjusted is not None:
            lines.append(f"unadjusted df: {self.df_unadjusted}")
        if self.p_value is not None:
            lines.append(f"p-value (adjusted df): {self.p_value:.4g}")
        for f in self.flags:
            lines.append(f"note: {f}")
        return "\n".join(lines)


def chi2_upper_tail(g2: float, df: int) -> float | None:
    """Upper-tail chi-square probability; None when df < 1."""
    if df < 1:
        return None
    if g2 < 0:
        raise ValueError("statistic must be nonnegative")
    return float(special.gammaincc(df / 2.0, g2 / 2.0))


def _result(parts: list[TestPart], df_unadjusted: int | None, flags=()) -> TestResult:
    g2 = math.fsum(p.g2 for p in parts)
    df = sum(p.df for p in parts)
    return TestResult(g2, df, df_unadjusted, chi2_upper_tail(g2, df), tuple(parts), tuple(flags))


def merge_test(c: Apfa, s: Iterable[int]) -> TestResult:
    """Deviance of merging ``s``, as a sum of local tests over its merge-list.

    The unadjusted degrees of freedom are the drop in dimension of the
    completed models, counted without building the completions.
    """
    if not c.is_counted:
        raise ModelError("automaton carries no edge counts")
    ml = merge_list(c, s)
    parts = []
    for group, lv in zip(ml.groups, ml.group_levels):
        g2, df = local_lrt(c, group)
        parts.append(TestPart(group, lv, g2, df))
    df_un = completed_dimension(c) - completed_dimension(merge(c, ml.seed))
    return _result(parts, df_un)


def outdegree_df(c: Apfa, s: Iterable[int]) -> int:
    """Adjusted df of a pair merge read off the merged model.

    Sum of (outdegree - 1) over the states that result from fusions.  Agrees
    with the table-based count when each fused set holds two states with
    positive counts on every edge, as in sample automata.
    """
    seed = _check_seed(c, s)
    ml = merge_list(c, seed)
    merged = merge(c, seed)
    return sum(len(merged.out[min(g)]) - 1 for g in ml.groups if c.levels[g[0]] < c.p)


def nested_test(big: Apfa, small: Apfa) -> TestResult:
    """Deviance between a counted model and a counted submodel of it.

    Both must carry counts from the same data.  The statistic is decomposed
    over every block of the partition that maps ``big`` onto ``small``.
    """
    if not (big.is_counted and small.is_counted):
        raise ModelError("both automata need edge counts")
    if big.total != small.total:
        raise ModelError("models were counted on different numbers of observations")
    part = submodel_partition(big, small)
    parts = []
    for lv, blocks in part.blocks.items():
        if lv >= big.p:
            continue
        for b in blocks:
            if len(b) < 2:
                continue
            g2, df = local_lrt(big, b)
            parts.append(TestPart(b, lv, g2, df))
    df_un = completed_dimension(big) - completed_dimension(small)
    return _result(parts, df_un)


def deviance(big_loglik: float, small_loglik: float) -> float:
    return -2.0 * (small_loglik - big_loglik)

