"""Active/break and wet/dry spell detection at all-India, regional and grid scales.

An all-India active (break) day has aggregate rainfall at least one
standard deviation above (strictly below one standard deviation under) the
period mean; alternatively, days are labeled through their daily cluster's
mean aggregate. Spells are maximal within-season runs of qualifying days of
a minimum length. At grid and regional scales the binary state sequences
are run-scanned directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .canonical_patterns import TemporalPatternSet
from .grid_data import CalendarIndex, GridGeometry, RainfallField, daily_aggregate

KINDS = ("active", "break", "wet", "dry")
SCALES = ("all_india", "region", "grid")


@dataclass
class SpellSet:
    """Qualifying days plus their maximal within-season runs of min_run or more."""

    kind: str
    day_set: np.ndarray
    spells: list[tuple[int, int]]   # inclusive (start, end) day indices
    scale: str = "all_india"
    scale_id: int | None = None
    min_run: int = 3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.scale not in SCALES:
            raise ValueError(f"scale must be one of {SCALES}")
        self.day_set = np.asarray(self.day_set, dtype=int)

    @property
    def n_days(self) -> int:
        return self.day_set.size

    def spell_lengths(self) -> np.ndarray:
        return np.array([b - a + 1 for a, b in self.spells], dtype=int)


@dataclass
class SpellComparison:
    size_a: int
    size_b: int
    intersection: int
    mean_aggregate_per_grid_a: float
    mean_aggregate_per_grid_b: float
    mean_above_mean_locations_a: float
    mean_above_mean_locations_b: float
    spell_count_a: int
    spell_count_b: int
    mean_spell_length_a: float
    mean_spell_length_b: float


def runs_in_mask(mask: np.ndarray, calendar: CalendarIndex, min_run: int = 1) -> list[tuple[int, int]]:
    """Maximal runs of True within each season, kept when length >= min_run."""
    mask = np.asarray(mask, dtype=bool)
    out = []
    for sl in calendar.season_slices():
        t = sl.start
        while t < sl.stop:
            if mask[t]:
                end = t
                while end + 1 < sl.stop and mask[end + 1]:
                    end += 1
                if end - t + 1 >= min_run:
                    out.append((t, end))
                t = end + 1
            else:
                t += 1
    return out


def _spell_set(kind, mask, calendar, min_run, scale="all_india", scale_id=None) -> SpellSet:
    return SpellSet(
        kind=kind,
        day_set=np.flatnonzero(mask),
        spells=runs_in_mask(mask, calendar, min_run),
        scale=scale,
        scale_id=scale_id,
        min_run=min_run,
    )


def act_brk_threshold(
    y: np.ndarray, calendar: CalendarIndex, min_run: int = 3
) -> tuple[SpellSet, SpellSet]:
    """Active/break day sets from the aggregate series against mean +/- std.

    Mean and population standard deviation are taken over the entire period.
    Active days satisfy y >= mu + sigma, break days y < mu - sigma. A
    constant series (sigma = 0) carries no anomaly signal and yields empty
    sets.
    """
    y = np.asarray(y, dtype=float)
    mu = y.mean()
    sigma = y.std()
    if sigma == 0.0:
        active = np.zeros(y.size, dtype=bool)
        brk = np.zeros(y.size, dtype=bool)
    else:
        active = y >= mu + sigma
        brk = y < mu - sigma
    return (
        _spell_set("active", active, calendar, min_run),
        _spell_set("break", brk, calendar, min_run),
    )


def act_brk_cluster(
    u: np.ndarray,
    mu_k: dict[int, float],
    y: np.ndarray,
    calendar: CalendarIndex,
    min_run: int = 3,
) -> tuple[SpellSet, SpellSet]:
    """Active/break day sets from cluster membership.

    A cluster is active when its mean aggregate mu_k >= mu + sigma and a
    break cluster when mu_k <= mu - sigma (both boundaries inclusive); a day
    inherits its cluster's tag. Sigma = 0 again yields empty sets (otherwise
    every average cluster would be active and break at once).
    """
    u = np.asarray(u)
    y = np.asarray(y, dtype=float)
    mu = y.mean()
    sigma = y.std()
    if sigma == 0.0:
        active_labels: set[int] = set()
        break_labels: set[int] = set()
    else:
        active_labels = {lab for lab, m in mu_k.items() if m >= mu + sigma}
        break_labels = {lab for lab, m in mu_k.items() if m <= mu - sigma}
    active = np.isin(u, sorted(active_labels))
    brk = np.isin(u, sorted(break_labels))
    return (
        _spell_set("active", active, calendar, min_run),
        _spell_set("break", brk, calendar, min_run),
    )


def compare_spells(a: SpellSet, b: SpellSet, fld: RainfallField) -> SpellComparison:
    """Side-by-side statistics of two day sets at the same scale."""
    if a.scale != b.scale or a.scale_id != b.scale_id:
        raise ValueError("spell sets are at different scales")
    y = daily_aggregate(fld)
    s_count = fld.n_locations
    above = fld.x > fld.x.mean(axis=1, keepdims=True)
    above_count = above.sum(axis=0)

    def day_stats(ss: SpellSet) -> tuple[float, float]:
        if ss.n_days == 0:
            return float("nan"), float("nan")
        return (
            float(y[ss.day_set].mean() / s_count),
            float(above_count[ss.day_set].mean()),
        )

    agg_a, loc_a = day_stats(a)
    agg_b, loc_b = day_stats(b)
    len_a = a.spell_lengths()
    len_b = b.spell_lengths()
    return SpellComparison(
        size_a=a.n_days,
        size_b=b.n_days,
        intersection=int(np.intersect1d(a.day_set, b.day_set).size),
        mean_aggregate_per_grid_a=agg_a,
        mean_aggregate_per_grid_b=agg_b,
        mean_above_mean_locations_a=loc_a,
        mean_above_mean_locations_b=loc_b,
        spell_count_a=len(a.spells),
        spell_count_b=len(b.spells),
        mean_spell_length_a=float(len_a.mean()) if len_a.size else float("nan"),
        mean_spell_length_b=float(len_b.mean()) if len_b.size else float("nan"),
    )


@dataclass
class LocalSpellStats:
    """Per-location wet/dry spells and their mean lengths."""

    wet: list[SpellSet]
    dry: list[SpellSet]
    mean_wet_length: np.ndarray
    mean_dry_length: np.ndarray


def local_spells(z: np.ndarray, calendar: CalendarIndex, min_run: int = 1) -> LocalSpellStats:
    """Run-scan each location's binary state series within seasons.

    There is no minimum run length by default at grid scale; mean lengths
    are NaN for locations with no spells of a kind.
    """
    z = np.asarray(z)
    s_count = z.shape[0]
    wet, dry = [], []
    mean_wet = np.full(s_count, np.nan)
    mean_dry = np.full(s_count, np.nan)
    for s in range(s_count):
        ws = _spell_set("wet", z[s] == 1, calendar, min_run, scale="grid", scale_id=s)
        ds = _spell_set("dry", z[s] == 0, calendar, min_run, scale="grid", scale_id=s)
        wet.append(ws)
        dry.append(ds)
        if ws.spells:
            mean_wet[s] = ws.spell_lengths().mean()
        if ds.spells:
            mean_dry[s] = ds.spell_lengths().mean()
    return LocalSpellStats(wet=wet, dry=dry, mean_wet_length=mean_wet, mean_dry_length=mean_dry)


def regional_spells(
    temporal: TemporalPatternSet, calendar: CalendarIndex, min_run: int = 1
) -> dict[int, tuple[SpellSet, SpellSet]]:
    """Wet/dry spells of each region's canonical discretized series."""
    out = {}
    for k, lab in enumerate(temporal.labels):
        cds = temporal.cds[k]
        out[int(lab)] = (
            _spell_set("wet", cds == 1, calendar, min_run, scale="region", scale_id=int(lab)),
            _spell_set("dry", cds == 0, calendar, min_run, scale="region", scale_id=int(lab)),
        )
    return out


def coherence_stats(
    z: np.ndarray, geometry: GridGeometry, calendar: CalendarIndex
) -> tuple[float, float]:
    """(neighbor agreement, day persistence) fractions of a binary field.

    Neighbor agreement averages over (day, unordered neighbor pair); day
    persistence averages over (location, within-season consecutive day
    pair). NaN when a denominator is empty.
    """
    z = np.asarray(z)
    edges = geometry.edges()
    if edges:
        a = np.array([e[0] for e in edges])
        b = np.array([e[1] for e in edges])
        neighbor_agreement = float(np.mean(z[a, :] == z[b, :]))
    else:
        neighbor_agreement = float("nan")
    step = calendar.same_season_step()
    if step.any():
        eq = (z[:, 1:] == z[:, :-1])[:, step]
        day_persistence = float(np.mean(eq))
    else:
        day_persistence = float("nan")
    return neighbor_agreement, day_persistence


def threshold_discretize(fld: RainfallField, mode: str = "local_mean", threshold: float | None = None) -> np.ndarray:
    """Baseline discretization: 1 where rainfall exceeds a local-mean or fixed cut."""
    if mode == "local_mean":
        return (fld.x > fld.x.mean(axis=1, keepdims=True)).astype(np.int8)
    if mode == "fixed":
        if threshold is None or threshold < 0:
            raise ValueError("fixed mode needs a nonnegative threshold")
        return (fld.x > threshold).astype(np.int8)
    raise ValueError("mode must be 'local_mean' or 'fixed'")
