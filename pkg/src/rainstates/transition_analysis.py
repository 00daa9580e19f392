"""Pattern transition dynamics: matrix estimation, spells, subsequences, simulation.

Transitions are counted over consecutive-day pairs of the daily label
sequence, by default only within seasons. Runs of one label form pattern
spells; run-collapsed subsequences of length k capture how rain advances
or retreats across patterns; the estimated matrix doubles as a simple
seasonal rainfall simulator.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import groupby

import numpy as np

from .grid_data import CalendarIndex


@dataclass
class TransitionModel:
    """Row-stochastic transition matrix over a set of pattern labels."""

    labels: np.ndarray
    matrix: np.ndarray
    counts: np.ndarray
    include_cross_season: bool
    uniform_rows: np.ndarray      # rows with no observed transitions, set to uniform
    family_order: np.ndarray | None = None


@dataclass
class PatternSpellStats:
    """Per-label run statistics of the daily label sequence."""

    mean_length: dict[int, float]
    spells_per_season: dict[int, float]
    spell_count: dict[int, int]


def estimate_transitions(
    u: np.ndarray,
    calendar: CalendarIndex,
    labels,
    include_cross_season: bool = False,
    families: dict[int, int] | None = None,
) -> TransitionModel:
    """Maximum-likelihood transition matrix between the given labels.

    Days carrying other labels act as an excluded sink: pairs touching them
    contribute nothing. Rows without any observed transition become uniform
    and are flagged in ``uniform_rows``.
    """
    labels = np.asarray(list(labels))
    k = labels.size
    if k == 0:
        raise ValueError("need at least one label")
    u = np.asarray(u)
    idx_of = {int(lab): i for i, lab in enumerate(labels)}

    counts = np.zeros((k, k), dtype=int)
    allowed = np.ones(u.size - 1, dtype=bool) if include_cross_season else calendar.same_season_step()
    for t in np.flatnonzero(allowed):
        a = idx_of.get(int(u[t]))
        b = idx_of.get(int(u[t + 1]))
        if a is not None and b is not None:
            counts[a, b] += 1

    totals = counts.sum(axis=1)
    uniform_rows = totals == 0
    matrix = np.where(
        uniform_rows[:, None], 1.0 / k, counts / np.maximum(totals, 1)[:, None]
    )
    family_order = None
    if families is not None:
        family_order = np.argsort([families.get(int(lab), np.inf) for lab in labels], kind="stable")
    return TransitionModel(
        labels=labels,
        matrix=matrix,
        counts=counts,
        include_cross_season=include_cross_season,
        uniform_rows=uniform_rows,
        family_order=family_order,
    )


def views(model: TransitionModel) -> tuple[np.ndarray, np.ndarray]:
    """(matrix with zeroed diagonal, matrix reordered into family blocks)."""
    zero_diag = model.matrix.copy()
    np.fill_diagonal(zero_diag, 0.0)
    if model.family_order is None:
        raise ValueError("family tags unavailable; cannot build the family view")
    p = model.family_order
    return zero_diag, model.matrix[np.ix_(p, p)]


def collapse_runs(seq) -> list:
    """Merge consecutive duplicates, preserving order: 1 3 3 4 4 4 5 -> 1 3 4 5."""
    return [val for val, _ in groupby(seq)]


def frequent_ksubseq(
    u: np.ndarray, calendar: CalendarIndex, k: int = 3, top_n: int | None = None
) -> list[tuple[tuple, int]]:
    """Most frequent k-windows of the per-season run-collapsed label sequence.

    Sorted by descending count, ties broken lexicographically; seasons
    shorter than k after collapsing contribute nothing.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    u = np.asarray(u)
    counter: Counter = Counter()
    for sl in calendar.season_slices():
        collapsed = collapse_runs(u[sl].tolist())
        for i in range(len(collapsed) - k + 1):
            counter[tuple(collapsed[i : i + k])] += 1
    ranked = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked if top_n is None else ranked[:top_n]


def _season_runs(u: np.ndarray, calendar: CalendarIndex) -> list[tuple[int, int, int]]:
    """Maximal within-season runs as (label, start, length)."""
    runs = []
    for sl in calendar.season_slices():
        t = sl.start
        for val, grp in groupby(u[sl].tolist()):
            n = len(list(grp))
            runs.append((int(val), t, n))
            t += n
    return runs


def pattern_spell_stats(u: np.ndarray, calendar: CalendarIndex, labels) -> PatternSpellStats:
    """Mean spell length and spells per season for each label with occurrences."""
    u = np.asarray(u)
    wanted = set(int(l) for l in labels)
    lengths: dict[int, list[int]] = {}
    for val, _, n in _season_runs(u, calendar):
        if val in wanted:
            lengths.setdefault(val, []).append(n)
    n_seasons = len(calendar.season_slices())
    return PatternSpellStats(
        mean_length={lab: float(np.mean(ls)) for lab, ls in lengths.items()},
        spells_per_season={lab: len(ls) / n_seasons for lab, ls in lengths.items()},
        spell_count={lab: len(ls) for lab, ls in lengths.items()},
    )


def stationary_distribution(matrix: np.ndarray) -> np.ndarray:
    """Stationary row vector of a row-stochastic matrix (least-squares solve)."""
    matrix = np.asarray(matrix, dtype=float)
    k = matrix.shape[0]
    a = np.vstack([matrix.T - np.eye(k), np.ones((1, k))])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    return pi


def simulate_season(
    model: TransitionModel,
    crp: np.ndarray,
    initial: np.ndarray,
    length: int = 122,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate one season of pattern labels and their rainfall maps.

    The label chain starts from ``initial`` and follows the transition
    matrix; each day emits the canonical rainfall map of its active pattern
    (deterministic emission). Fully reproducible from the seed.
    """
    crp = np.asarray(crp, dtype=float)
    initial = np.asarray(initial, dtype=float)
    k = model.labels.size
    if crp.shape[0] != k:
        raise ValueError("crp rows must align with model labels")
    if initial.shape != (k,) or abs(initial.sum() - 1.0) > 1e-9 or np.any(initial < 0):
        raise ValueError("initial must be a distribution over the model labels")
    if np.any(np.abs(model.matrix.sum(axis=1) - 1.0) > 1e-9) or np.any(model.matrix < 0):
        raise ValueError("transition matrix rows must be stochastic")

    rng = np.random.default_rng(seed)
    draws = rng.random(length)
    cum_init = np.cumsum(initial)
    cum = np.cumsum(model.matrix, axis=1)
    idx = np.empty(length, dtype=int)
    idx[0] = min(int(np.searchsorted(cum_init, draws[0], side="right")), k - 1)
    for t in range(1, length):
        idx[t] = min(int(np.searchsorted(cum[idx[t - 1]], draws[t], side="right")), k - 1)
    rain = crp[idx].T.copy()
    return model.labels[idx], rain
