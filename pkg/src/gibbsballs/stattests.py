"""Small statistical helpers shared by the checks and the acceptance suite."""
from __future__ import annotations

import numpy as np
from scipy import stats


def _merge_sparse(table: np.ndarray, min_expected: float = 5.0) -> np.ndarray:
    """Merge adjacent columns until every expected cell count reaches the floor."""
    cols = [table[:, i].astype(float) for i in range(table.shape[1])]
    total = table.sum()
    row_share = table.sum(axis=1) / total

    def small(col):
        return np.any(row_share * col.sum() < min_expected)

    merged = []
    acc = None
    for col in cols:
        acc = col if acc is None else acc + col
        if not small(acc):
            merged.append(acc)
            acc = None
    if acc is not None:
        if merged:
            merged[-1] = merged[-1] + acc
        else:
            merged.append(acc)
    return np.column_stack(merged)


def count_table_test(a, b, min_expected: float = 5.0):
    """Chi-square homogeneity test of two samples of non-negative integers.

    Returns ``(statistic, p_value, dof)``; sparse tail bins are merged.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    top = int(max(a.max(initial=0), b.max(initial=0)))
    table = np.vstack([np.bincount(a, minlength=top + 1), np.bincount(b, minlength=top + 1)])
    table = _merge_sparse(table, min_expected)
    if table.shape[1] < 2:
        return 0.0, 1.0, 0
    res = stats.chi2_contingency(table, correction=False)
    return float(res[0]), float(res[1]), int(res[2])


def poisson_gof(counts, mean: float, min_expected: float = 5.0):
    """Chi-square goodness of fit of integer counts to Poisson(mean)."""
    counts = np.asarray(counts, dtype=np.int64)
    n = len(counts)
    top = int(counts.max(initial=0))
    k = np.arange(top + 1)
    obs = np.bincount(counts, minlength=top + 1).astype(float)
    p = stats.poisson.pmf(k, mean)
    p[-1] += stats.poisson.sf(top, mean)
    # merge tail bins from the right, then head bins from the left
    o, e = list(obs), list(p * n)
    while len(e) > 1 and e[-1] < min_expected:
        last_e, last_o = e.pop(), o.pop()
        e[-1] += last_e
        o[-1] += last_o
    while len(e) > 1 and e[0] < min_expected:
        first_e, first_o = e.pop(0), o.pop(0)
        e[0] += first_e
        o[0] += first_o
    if len(e) < 2:
        return 0.0, 1.0
    res = stats.chisquare(o, e)
    return float(res.statistic), float(res.pvalue)


def ks_two_sample(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        return 0.0, 1.0
    res = stats.ks_2samp(a, b)
    return float(res.statistic), float(res.pvalue)


def binomial_se(p: float, n: int) -> float:
    return float(np.sqrt(max(p * (1 - p), 0.0) / n)) if n else float("nan")
