"""Canonical spatial and temporal patterns from a fitted latent state.

A daily cluster yields a canonical rainfall pattern (per-location mean of
rainfall over the cluster's days) and a canonical discretized pattern
(per-location majority wet/dry state); a location cluster symmetrically
yields a canonical time series and discretized series. Patterns are
ordered by aggregate rainfall, flagged as prominent when they recur across
enough years, and grouped into three families (dry, northern-plain rain,
monsoon-zone + west-coast rain).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .grid_data import CalendarIndex, RainfallField, daily_aggregate
from .mrf_model import LatentState

logger = logging.getLogger(__name__)

MONTHS = (6, 7, 8, 9)


@dataclass
class CanonicalPatternSet:
    """Spatial patterns of the daily clusters, ordered by aggregate rainfall."""

    labels: np.ndarray              # cluster ids with at least one day, ascending
    crp: np.ndarray                 # (K, S) mean rainfall maps, mm/day
    cdp: np.ndarray                 # (K, S) majority wet/dry maps
    cluster_days: list[np.ndarray]  # day indices per label
    mu_k: np.ndarray                # (K,) mean daily aggregate per cluster
    wet_fraction: np.ndarray        # (K,) fraction of wet cells in each cdp
    order: np.ndarray               # permutation sorting labels by sum of crp
    prominent: np.ndarray           # (K,) bool, set by prominence()
    family: dict[int, int] = field(default_factory=dict)
    empty_labels: tuple[int, ...] = ()

    def index_of(self, label: int) -> int:
        hits = np.flatnonzero(self.labels == label)
        if hits.size == 0:
            raise KeyError(f"label {label} not in pattern set")
        return int(hits[0])

    def prominent_labels(self) -> np.ndarray:
        return self.labels[self.prominent]


@dataclass
class TemporalPatternSet:
    """Temporal patterns of the location clusters (regions)."""

    labels: np.ndarray
    cts: np.ndarray                      # (K, D) mean series, mm/day
    cds: np.ndarray                      # (K, D) majority wet/dry series
    cluster_locations: list[np.ndarray]
    sizes: np.ndarray
    empty_labels: tuple[int, ...] = ()


def _majority(rows: np.ndarray) -> np.ndarray:
    # ties break toward wet
    return (rows.mean(axis=0) >= 0.5).astype(np.int8)


def extract_spatial(fld: RainfallField, state: LatentState) -> CanonicalPatternSet:
    """Mean rainfall map and majority state map per daily cluster."""
    if state.z.shape != fld.x.shape:
        raise ValueError("state does not match field")
    y = daily_aggregate(fld)
    present = np.unique(state.u)
    empty = tuple(int(l) for l in range(int(state.u.max()) + 1) if l not in set(present.tolist()))
    if empty:
        logger.warning("excluding %d empty daily clusters: %s", len(empty), empty)

    crp, cdp, days, mu_k, wet_fraction = [], [], [], [], []
    for lab in present:
        idx = np.flatnonzero(state.u == lab)
        days.append(idx)
        crp.append(fld.x[:, idx].mean(axis=1))
        cdp.append(_majority(state.z[:, idx].T))
        mu_k.append(y[idx].mean())
    crp = np.asarray(crp)
    cdp = np.asarray(cdp, dtype=np.int8)
    wet_fraction = cdp.mean(axis=1)
    order = np.argsort(crp.sum(axis=1), kind="stable")
    return CanonicalPatternSet(
        labels=present,
        crp=crp,
        cdp=cdp,
        cluster_days=days,
        mu_k=np.asarray(mu_k),
        wet_fraction=wet_fraction,
        order=order,
        prominent=np.zeros(len(present), dtype=bool),
        empty_labels=empty,
    )


def extract_temporal(fld: RainfallField, state: LatentState) -> TemporalPatternSet:
    """Mean series and majority state series per location cluster."""
    if state.z.shape != fld.x.shape:
        raise ValueError("state does not match field")
    present = np.unique(state.v)
    empty = tuple(int(l) for l in range(int(state.v.max()) + 1) if l not in set(present.tolist()))
    if empty:
        logger.warning("excluding %d empty location clusters: %s", len(empty), empty)

    cts, cds, locs = [], [], []
    for lab in present:
        idx = np.flatnonzero(state.v == lab)
        locs.append(idx)
        cts.append(fld.x[idx, :].mean(axis=0))
        cds.append(_majority(state.z[idx, :]))
    return TemporalPatternSet(
        labels=present,
        cts=np.asarray(cts),
        cds=np.asarray(cds, dtype=np.int8),
        cluster_locations=locs,
        sizes=np.asarray([len(i) for i in locs]),
        empty_labels=empty,
    )


def default_min_years(n_years: int) -> int:
    """Prominence threshold scaled from the 5-of-8-years convention."""
    return math.ceil(5 * n_years / 8)


def prominence(
    patterns: CanonicalPatternSet, calendar: CalendarIndex, min_years: int | None = None
) -> CanonicalPatternSet:
    """Flag clusters whose days touch at least ``min_years`` distinct years."""
    if min_years is None:
        min_years = default_min_years(calendar.n_years)
    if min_years > calendar.n_years:
        raise ValueError("min_years exceeds the number of years present")
    flags = np.zeros(len(patterns.labels), dtype=bool)
    for k, days in enumerate(patterns.cluster_days):
        flags[k] = len(np.unique(calendar.year[days])) >= min_years
    patterns.prominent = flags
    return patterns


def assign_families(
    patterns: CanonicalPatternSet,
    monsoon_zone_mask: np.ndarray | None,
    north_mask: np.ndarray | None,
    dry_quantile: float = 0.3,
    overrides: dict[int, int] | None = None,
) -> dict[int, int]:
    """Group prominent patterns into families 1 (dry), 2 (north), 3 (monsoon zone).

    Rule-based default: the driest band of prominent patterns (wet fraction
    at or below the ``dry_quantile`` quantile) is family 1; the rest go to
    family 3 when their discrete pattern is at least as active over the
    monsoon-zone mask as over the north mask, else family 2. Per-label
    overrides win over the rule.
    """
    overrides = overrides or {}
    prominent_idx = np.flatnonzero(patterns.prominent)
    if prominent_idx.size == 0:
        patterns.family = {}
        return {}
    need_masks = any(int(patterns.labels[k]) not in overrides for k in prominent_idx)
    if need_masks and (monsoon_zone_mask is None or north_mask is None):
        raise ValueError("family masks are required unless every prominent label is overridden")
    if need_masks:
        monsoon_zone_mask = np.asarray(monsoon_zone_mask, dtype=bool)
        north_mask = np.asarray(north_mask, dtype=bool)
        if monsoon_zone_mask.sum() == 0 or north_mask.sum() == 0:
            raise ValueError("family masks must each select at least one location")

    cutoff = np.quantile(patterns.wet_fraction[prominent_idx], dry_quantile)
    fam: dict[int, int] = {}
    for k in prominent_idx:
        label = int(patterns.labels[k])
        if label in overrides:
            fam[label] = int(overrides[label])
            continue
        if patterns.wet_fraction[k] <= cutoff:
            fam[label] = 1
        else:
            mz = patterns.cdp[k][monsoon_zone_mask].mean()
            no = patterns.cdp[k][north_mask].mean()
            fam[label] = 3 if mz >= no else 2
    patterns.family = fam
    return fam


def monthly_distribution(patterns: CanonicalPatternSet, calendar: CalendarIndex) -> np.ndarray:
    """Mean number of days per monsoon month assigned to each cluster, (K, 4)."""
    out = np.zeros((len(patterns.labels), len(MONTHS)))
    for k, days in enumerate(patterns.cluster_days):
        months = calendar.month[days]
        for j, m in enumerate(MONTHS):
            out[k, j] = np.sum(months == m) / calendar.n_years
    return out


def hamming_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Fraction of positions where two binary vectors agree."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("vectors must have equal length")
    return 1.0 - float(np.mean(a != b))


def match_day(
    x_col: np.ndarray, z_col: np.ndarray, patterns: CanonicalPatternSet
) -> tuple[int, int, float]:
    """Nearest cluster for one day: (crp label by l2, cdp label by Hamming, similarity).

    Ties break toward the lower label index; the similarity reported is
    against the winning discretized pattern.
    """
    x_col = np.asarray(x_col, dtype=float)
    z_col = np.asarray(z_col)
    if x_col.size != patterns.crp.shape[1]:
        raise ValueError("day vector does not match pattern length")
    d2 = np.sum((patterns.crp - x_col[None, :]) ** 2, axis=1)
    crp_label = int(patterns.labels[int(np.argmin(d2))])
    hd = np.sum(patterns.cdp != z_col[None, :], axis=1)
    best = int(np.argmin(hd))
    cdp_label = int(patterns.labels[best])
    sim = 1.0 - float(hd[best]) / z_col.size
    return crp_label, cdp_label, sim
