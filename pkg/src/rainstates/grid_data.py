"""Grid geometry, monsoon calendar, rainfall ingestion and synthetic data.

Rainfall lives on a landmasked 1-degree grid as an S x D matrix (locations x
days), with a calendar restricted to the June-September monsoon window
(122 days per season). This module also generates synthetic fields with
planted wet/dry states and pattern labels, used as ground truth by the
verification suite.
"""

from __future__ import annotations

import csv
import datetime
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

MONSOON_MONTHS = (6, 7, 8, 9)
SEASON_LENGTH = 122

# day-of-season offset at which each monsoon month starts (Jun 1 = 0)
_MONTH_START = {6: 0, 7: 30, 8: 61, 9: 92}
_GRID_TOL = 1e-6


class DataError(ValueError):
    """Raised when input data violates the ingestion contract."""


@dataclass(frozen=True)
class GridGeometry:
    """Locations on a latitude/longitude grid with rook adjacency.

    ``neighbors[s]`` lists the ids of locations exactly one grid step
    (1 degree) away in latitude or longitude. Adjacency is symmetric and
    irreflexive; coastal/irregular cells simply have fewer neighbors.
    """

    lat: np.ndarray
    lon: np.ndarray
    neighbors: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "lat", np.asarray(self.lat, dtype=float))
        object.__setattr__(self, "lon", np.asarray(self.lon, dtype=float))
        if self.lat.shape != self.lon.shape or self.lat.ndim != 1:
            raise DataError("lat and lon must be 1-d arrays of equal length")
        if len(self.neighbors) != self.lat.size:
            raise DataError("neighbors list does not match number of locations")
        for s, nbrs in enumerate(self.neighbors):
            for sp in nbrs:
                if sp == s:
                    raise DataError(f"location {s} listed as its own neighbor")
                if s not in self.neighbors[sp]:
                    raise DataError(f"adjacency not symmetric for pair ({s},{sp})")

    @property
    def n_locations(self) -> int:
        return self.lat.size

    @classmethod
    def from_latlon(cls, lat, lon) -> "GridGeometry":
        """Build rook adjacency: neighbors differ by exactly 1 degree in lat xor lon."""
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        index = {}
        for s in range(lat.size):
            key = (round(lat[s] / _GRID_TOL), round(lon[s] / _GRID_TOL))
            if key in index:
                raise DataError(f"duplicate location at lat={lat[s]}, lon={lon[s]}")
            index[key] = s
        neighbors = []
        for s in range(lat.size):
            nbrs = []
            for dlat, dlon in ((1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)):
                key = (
                    round((lat[s] + dlat) / _GRID_TOL),
                    round((lon[s] + dlon) / _GRID_TOL),
                )
                if key in index:
                    nbrs.append(index[key])
            neighbors.append(tuple(sorted(nbrs)))
        return cls(lat=lat, lon=lon, neighbors=tuple(neighbors))

    @classmethod
    def regular(cls, rows: int, cols: int, lat0: float = 8.0, lon0: float = 68.0) -> "GridGeometry":
        """Full rectangular rows x cols grid at 1-degree spacing."""
        lat = np.repeat(np.arange(rows, dtype=float), cols) + lat0
        lon = np.tile(np.arange(cols, dtype=float), rows) + lon0
        return cls.from_latlon(lat, lon)

    def grid_steps(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer grid coordinates (row, col) relative to the south-west corner."""
        gy = np.rint(self.lat - self.lat.min()).astype(int)
        gx = np.rint(self.lon - self.lon.min()).astype(int)
        return gy, gx

    def edges(self) -> list[tuple[int, int]]:
        """Undirected neighbor pairs (s, s') with s < s', each listed once."""
        out = []
        for s, nbrs in enumerate(self.neighbors):
            out.extend((s, sp) for sp in nbrs if s < sp)
        return out

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n_locations, self.n_locations))
        for s, sp in self.edges():
            a[s, sp] = 1.0
            a[sp, s] = 1.0
        return a


@dataclass(frozen=True)
class CalendarIndex:
    """Day indexing for one or more seasons.

    ``day_of_season`` increments by 1 within a season and resets at season
    boundaries; ``year`` identifies the season a day belongs to. For the
    standard 122-day monsoon window, ``month`` carries the true calendar
    month (6..9); other season lengths map days onto 6..9 proportionally.
    """

    year: np.ndarray
    month: np.ndarray
    day_of_season: np.ndarray
    season_length: int = SEASON_LENGTH

    def __post_init__(self):
        for name in ("year", "month", "day_of_season"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=int))
        d = self.year.size
        if self.month.size != d or self.day_of_season.size != d:
            raise DataError("calendar arrays must have equal length")
        if d == 0:
            raise DataError("calendar is empty")
        expected = 0
        for t in range(d):
            if self.day_of_season[t] != expected:
                raise DataError(f"day_of_season breaks at t={t}")
            if t + 1 < d and self.year[t + 1] != self.year[t]:
                if self.day_of_season[t] != self.season_length - 1:
                    raise DataError(f"season of year {self.year[t]} is incomplete")
                expected = 0
            else:
                expected += 1
        if self.day_of_season[-1] != self.season_length - 1:
            raise DataError("final season is incomplete")

    @property
    def n_days(self) -> int:
        return self.year.size

    @property
    def n_years(self) -> int:
        return len(np.unique(self.year))

    @property
    def years(self) -> np.ndarray:
        return np.unique(self.year)

    @classmethod
    def monsoon(cls, years, season_length: int = SEASON_LENGTH) -> "CalendarIndex":
        """Regular seasons of `season_length` days for each given year."""
        years = list(years)
        year = np.repeat(np.asarray(years, dtype=int), season_length)
        dos = np.tile(np.arange(season_length), len(years))
        month = _month_of(dos, season_length)
        return cls(year=year, month=month, day_of_season=dos, season_length=season_length)

    @classmethod
    def single_season(cls, length: int, year: int = 0) -> "CalendarIndex":
        return cls.monsoon([year], season_length=length)

    def season_slices(self) -> list[slice]:
        starts = np.flatnonzero(self.day_of_season == 0)
        ends = np.append(starts[1:], self.n_days)
        return [slice(int(a), int(b)) for a, b in zip(starts, ends)]

    def same_season_step(self) -> np.ndarray:
        """Boolean mask over pairs (t, t+1): True when both days share a season."""
        return self.year[1:] == self.year[:-1]

    def date_of(self, t: int) -> datetime.date:
        """Calendar date of day t (June 1 anchor; exact for 122-day seasons)."""
        base = datetime.date(int(self.year[t]), 6, 1)
        return base + datetime.timedelta(days=int(self.day_of_season[t]))


def _month_of(day_of_season: np.ndarray, season_length: int) -> np.ndarray:
    if season_length == SEASON_LENGTH:
        month = np.full(day_of_season.shape, 6)
        for m, start in _MONTH_START.items():
            month[day_of_season >= start] = m
        return month
    # synthetic convention for nonstandard lengths: proportional split over Jun-Sep
    return 6 + np.minimum(3, 4 * day_of_season // max(season_length, 1))


@dataclass(frozen=True)
class RainfallField:
    """Daily rainfall x(s, t) in mm/day on a grid, with calendar metadata."""

    geometry: GridGeometry
    calendar: CalendarIndex
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        s, d = self.x.shape
        if s != self.geometry.n_locations:
            raise DataError("rainfall rows do not match geometry")
        if d != self.calendar.n_days:
            raise DataError("rainfall columns do not match calendar")
        if not np.all(np.isfinite(self.x)):
            raise DataError("rainfall contains non-finite values")
        if np.any(self.x < 0):
            raise DataError("negative rainfall")

    @property
    def n_locations(self) -> int:
        return self.x.shape[0]

    @property
    def n_days(self) -> int:
        return self.x.shape[1]


def daily_aggregate(fld: RainfallField) -> np.ndarray:
    """All-location aggregate series Y(t) = sum_s x(s, t)."""
    return fld.x.sum(axis=0)


def classify_years(fld: RainfallField) -> dict[int, str]:
    """Label each year excess/deficient/normal by its total against mean +/- std.

    Uses the population standard deviation of the annual totals; excess and
    deficient require strict inequality, so identical totals are all normal.
    """
    years = fld.calendar.years
    if years.size < 2:
        raise DataError("year classification needs at least 2 years")
    y = daily_aggregate(fld)
    totals = np.array([y[fld.calendar.year == yr].sum() for yr in years])
    mu = totals.mean()
    sigma = totals.std()
    labels = {}
    for yr, a in zip(years, totals):
        if a > mu + sigma:
            labels[int(yr)] = "excess"
        elif a < mu - sigma:
            labels[int(yr)] = "deficient"
        else:
            labels[int(yr)] = "normal"
    return labels


# ---------------------------------------------------------------------------
# ingestion


def load_rainfall(path, geometry_path) -> RainfallField:
    """Load a long-format rainfall CSV plus a geometry CSV.

    Rainfall rows are ``location_id,date,rain_mm`` with ISO dates; only
    June-September dates are kept (others are skipped and counted). The
    kept rows must cover every (location, monsoon day) combination for
    every year present. Geometry rows are ``location_id,lat,lon``; rook
    adjacency at 1-degree spacing is derived from them.
    """
    ids, lats, lons = [], [], []
    with open(geometry_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"location_id", "lat", "lon"} <= set(reader.fieldnames):
            raise DataError("geometry file needs columns location_id,lat,lon")
        for row in reader:
            ids.append(int(row["location_id"]))
            lats.append(float(row["lat"]))
            lons.append(float(row["lon"]))
    if sorted(ids) != list(range(len(ids))):
        raise DataError("geometry location_id must be 0..S-1")
    order = np.argsort(ids)
    geometry = GridGeometry.from_latlon(np.asarray(lats)[order], np.asarray(lons)[order])
    s_count = geometry.n_locations

    values: dict[tuple[int, datetime.date], float] = {}
    skipped = 0
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"location_id", "date", "rain_mm"} <= set(reader.fieldnames):
            raise DataError("rainfall file needs columns location_id,date,rain_mm")
        for row in reader:
            loc = int(row["location_id"])
            date = datetime.date.fromisoformat(row["date"])
            mm = float(row["rain_mm"])
            if date.month not in MONSOON_MONTHS:
                skipped += 1
                continue
            if mm < 0:
                raise DataError(f"negative rainfall at location {loc} on {date}")
            if loc < 0 or loc >= s_count:
                raise DataError(f"unknown location_id {loc} in rainfall file")
            values[(loc, date)] = mm
    if skipped:
        logger.warning("skipped %d non-monsoon rows", skipped)
    if not values:
        raise DataError("no monsoon-season rows found")

    years = sorted({date.year for (_, date) in values})
    dates = []
    for yr in years:
        day = datetime.date(yr, 6, 1)
        while day.month in MONSOON_MONTHS:
            dates.append(day)
            day += datetime.timedelta(days=1)

    gaps = []
    for loc in range(s_count):
        for date in dates:
            if (loc, date) not in values:
                gaps.append((loc, date))
                if len(gaps) >= 10:
                    break
        if len(gaps) >= 10:
            break
    if gaps:
        listing = "; ".join(f"location {s} on {d}" for s, d in gaps)
        raise DataError(f"missing location/day combinations (first {len(gaps)}): {listing}")

    x = np.empty((s_count, len(dates)))
    for j, date in enumerate(dates):
        for loc in range(s_count):
            x[loc, j] = values[(loc, date)]
    calendar = CalendarIndex.monsoon(years)
    return RainfallField(geometry=geometry, calendar=calendar, x=x)


# ---------------------------------------------------------------------------
# synthetic ground truth


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic field with planted patterns.

    Day labels follow a Markov chain over ``n_patterns`` states (restarted
    uniformly each season); wet/dry states are Bernoulli draws from the
    active pattern's per-location wet probabilities, then flipped with
    probability ``flip_noise``; rainfall is exponential (dry) or gamma (wet).
    """

    grid_rows: int
    grid_cols: int
    n_years: int
    n_patterns: int
    pattern_wet_probs: np.ndarray
    transition: np.ndarray
    dry_mean_mm: float = 1.0
    wet_mean_mm: float = 12.0
    wet_shape: float = 2.0
    flip_noise: float = 0.0
    seed: int = 0
    start_year: int = 2000
    season_length: int = SEASON_LENGTH

    def __post_init__(self):
        object.__setattr__(self, "pattern_wet_probs", np.asarray(self.pattern_wet_probs, dtype=float))
        object.__setattr__(self, "transition", np.asarray(self.transition, dtype=float))
        s = self.grid_rows * self.grid_cols
        if self.pattern_wet_probs.shape != (self.n_patterns, s):
            raise DataError("pattern_wet_probs must be (n_patterns, rows*cols)")
        if np.any(self.pattern_wet_probs < 0) or np.any(self.pattern_wet_probs > 1):
            raise DataError("pattern_wet_probs must lie in [0, 1]")
        if self.transition.shape != (self.n_patterns, self.n_patterns):
            raise DataError("transition must be square over n_patterns")
        if np.any(self.transition < 0) or np.any(np.abs(self.transition.sum(axis=1) - 1.0) > 1e-12):
            raise DataError("transition rows must sum to 1 within 1e-12")
        if not (0.0 <= self.flip_noise < 0.5):
            raise DataError("flip_noise must lie in [0, 0.5)")
        if min(self.grid_rows, self.grid_cols, self.n_years, self.n_patterns) < 1:
            raise DataError("grid, years and pattern counts must be positive")
        if self.dry_mean_mm <= 0 or self.wet_mean_mm <= 0 or self.wet_shape <= 0:
            raise DataError("emission means and shape must be positive")


def synth_generate(spec: SynthSpec):
    """Generate (field, true z, true u, true v) deterministically from the seed.

    True location clusters group cells with identical wet-probability
    profiles across patterns (column equality in ``pattern_wet_probs``).
    """
    rng = np.random.default_rng(spec.seed)
    geometry = GridGeometry.regular(spec.grid_rows, spec.grid_cols)
    calendar = CalendarIndex.monsoon(
        range(spec.start_year, spec.start_year + spec.n_years),
        season_length=spec.season_length,
    )
    s_count, d_count = geometry.n_locations, calendar.n_days

    u = np.empty(d_count, dtype=int)
    cum = np.cumsum(spec.transition, axis=1)
    for sl in calendar.season_slices():
        u[sl.start] = rng.integers(spec.n_patterns)
        for t in range(sl.start + 1, sl.stop):
            u[t] = np.searchsorted(cum[u[t - 1]], rng.random(), side="right")

    probs = spec.pattern_wet_probs[u].T  # (S, D)
    z = (rng.random((s_count, d_count)) < probs).astype(np.int8)
    if spec.flip_noise > 0:
        flips = rng.random((s_count, d_count)) < spec.flip_noise
        z = np.where(flips, 1 - z, z).astype(np.int8)

    dry = rng.exponential(spec.dry_mean_mm, size=(s_count, d_count))
    wet = rng.gamma(spec.wet_shape, spec.wet_mean_mm / spec.wet_shape, size=(s_count, d_count))
    x = np.where(z == 1, wet, dry)

    _, v = np.unique(spec.pattern_wet_probs.T, axis=0, return_inverse=True)
    v = _relabel_by_first_occurrence(v)

    fld = RainfallField(geometry=geometry, calendar=calendar, x=x)
    return fld, z, u, v.astype(int)


def _relabel_by_first_occurrence(labels: np.ndarray) -> np.ndarray:
    seen: dict[int, int] = {}
    out = np.empty_like(labels)
    for i, lab in enumerate(labels):
        if lab not in seen:
            seen[lab] = len(seen)
        out[i] = seen[lab]
    return out


# ---------------------------------------------------------------------------
# CSV writers (schemas shared with the CLI)


def write_geometry_csv(geometry: GridGeometry, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["location_id", "lat", "lon"])
        for s in range(geometry.n_locations):
            w.writerow([s, repr(float(geometry.lat[s])), repr(float(geometry.lon[s]))])


def write_rainfall_csv(fld: RainfallField, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["location_id", "date", "rain_mm"])
        for s in range(fld.n_locations):
            for t in range(fld.n_days):
                w.writerow([s, fld.calendar.date_of(t).isoformat(), repr(float(fld.x[s, t]))])


def write_truth_csv(z: np.ndarray, u: np.ndarray, v: np.ndarray, path) -> None:
    """Ground-truth labels; z rows use the flattened index s * D + t."""
    d_count = z.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["location_id_or_day", "kind", "label"])
        for t in range(len(u)):
            w.writerow([t, "u", int(u[t])])
        for s in range(len(v)):
            w.writerow([s, "v", int(v[s])])
        for s in range(z.shape[0]):
            for t in range(d_count):
                w.writerow([s * d_count + t, "z", int(z[s, t])])
