import numpy as np
import pytest

from rainstates.grid_data import (
    CalendarIndex,
    DataError,
    GridGeometry,
    RainfallField,
    SynthSpec,
    classify_years,
    daily_aggregate,
    load_rainfall,
    synth_generate,
    write_geometry_csv,
    write_rainfall_csv,
)


def make_field(x, years=(2000,), lat=None, lon=None, season_length=None):
    x = np.asarray(x, dtype=float)
    s, d = x.shape
    if season_length is None:
        season_length = d // len(years)
    cal = CalendarIndex.monsoon(years, season_length=season_length)
    if lat is None:
        lat = np.arange(s, dtype=float) + 10.0
        lon = np.zeros(s) + 70.0
    geo = GridGeometry.from_latlon(lat, lon)
    return RainfallField(geometry=geo, calendar=cal, x=x)


class TestGeometry:
    def test_rook_adjacency_example(self):
        geo = GridGeometry.from_latlon([20.0, 20.0, 25.0], [75.0, 76.0, 80.0])
        assert geo.neighbors == ((1,), (0,), ())

    def test_symmetry_and_irreflexivity(self):
        geo = GridGeometry.regular(4, 5)
        for s, nbrs in enumerate(geo.neighbors):
            assert s not in nbrs
            for sp in nbrs:
                assert s in geo.neighbors[sp]

    def test_neighbors_differ_by_one_step(self):
        geo = GridGeometry.regular(3, 3)
        for s, sp in geo.edges():
            dlat = abs(geo.lat[s] - geo.lat[sp])
            dlon = abs(geo.lon[s] - geo.lon[sp])
            assert sorted([dlat, dlon]) == [0.0, 1.0]

    def test_adjacency_matrix_matches_edges(self):
        geo = GridGeometry.regular(3, 4)
        a = geo.adjacency_matrix()
        assert a.sum() == 2 * len(geo.edges())
        assert np.array_equal(a, a.T)


class TestCalendar:
    def test_monsoon_lengths_and_months(self):
        cal = CalendarIndex.monsoon([2000, 2001])
        assert cal.n_days == 244
        assert cal.n_years == 2
        june = cal.month[cal.year == 2000][:30]
        assert np.all(june == 6)
        assert cal.month[cal.year == 2000][30] == 7
        assert cal.month[cal.year == 2000][61] == 8
        assert cal.month[cal.year == 2000][92] == 9
        assert cal.date_of(0).isoformat() == "2000-06-01"
        assert cal.date_of(121).isoformat() == "2000-09-30"

    def test_season_slices_and_steps(self):
        cal = CalendarIndex.monsoon([0, 1], season_length=3)
        assert cal.season_slices() == [slice(0, 3), slice(3, 6)]
        assert cal.same_season_step().tolist() == [True, True, False, True, True]

    def test_incomplete_season_rejected(self):
        with pytest.raises(DataError):
            CalendarIndex(year=[0, 0, 1], month=[6, 6, 6], day_of_season=[0, 1, 0], season_length=3)


class TestAggregateAndYears:
    def test_daily_aggregate_examples(self):
        assert daily_aggregate(make_field([[0, 1], [2, 3]], season_length=2)).tolist() == [2, 4]
        assert daily_aggregate(make_field(np.zeros((3, 4)))).tolist() == [0, 0, 0, 0]
        assert daily_aggregate(make_field([[1.5], [2.5]])).tolist() == [4.0]

    def test_daily_aggregate_linearity(self):
        rng = np.random.default_rng(7)
        x1 = rng.random((4, 6))
        x2 = rng.random((4, 6))
        f1, f2, f12 = (make_field(a, season_length=6) for a in (x1, x2, x1 + x2))
        assert np.allclose(daily_aggregate(f12), daily_aggregate(f1) + daily_aggregate(f2))

    def _field_with_totals(self, totals):
        # one location, one day per season: annual total equals that day's value
        return make_field(
            np.asarray(totals, dtype=float)[None, :], years=range(len(totals)), season_length=1
        )

    def test_classify_years_derived_examples(self):
        labels = classify_years(self._field_with_totals([10, 10, 10, 22]))
        assert list(labels.values()) == ["normal", "normal", "normal", "excess"]
        labels = classify_years(self._field_with_totals([0, 10, 20]))
        assert list(labels.values()) == ["deficient", "normal", "excess"]

    def test_classify_years_identical_totals(self):
        labels = classify_years(self._field_with_totals([7, 7, 7]))
        assert set(labels.values()) == {"normal"}

    def test_classify_years_single_year_errors(self):
        with pytest.raises(DataError):
            classify_years(make_field([[1.0, 2.0]], years=(2000,), season_length=2))

    def test_classify_years_permutation_equivariance(self):
        rng = np.random.default_rng(3)
        totals = rng.uniform(5, 50, size=6)
        base = classify_years(self._field_with_totals(totals))
        perm = rng.permutation(6)
        shuffled = classify_years(self._field_with_totals(totals[perm]))
        for rank, yr in enumerate(perm):
            assert list(shuffled.values())[rank] == list(base.values())[yr]


def quadrant_spec(**kw):
    probs = np.zeros((2, 4))
    probs[0, :2] = 1.0
    probs[1, 2:] = 1.0
    defaults = dict(
        grid_rows=2,
        grid_cols=2,
        n_years=2,
        n_patterns=2,
        pattern_wet_probs=probs,
        transition=np.array([[0.5, 0.5], [0.5, 0.5]]),
        flip_noise=0.0,
        seed=11,
        season_length=10,
    )
    defaults.update(kw)
    return SynthSpec(**defaults)


class TestSynth:
    def test_determinism(self):
        f1, z1, u1, v1 = synth_generate(quadrant_spec())
        f2, z2, u2, v2 = synth_generate(quadrant_spec())
        assert np.array_equal(f1.x, f2.x)
        assert np.array_equal(z1, z2)
        assert np.array_equal(u1, u2)
        assert np.array_equal(v1, v2)

    def test_all_dry_degenerate(self):
        spec = quadrant_spec(pattern_wet_probs=np.zeros((2, 4)))
        fld, z, _, _ = synth_generate(spec)
        assert np.all(z == 0)
        assert np.all(fld.x >= 0)

    def test_identity_transition_constant_within_season(self):
        spec = quadrant_spec(transition=np.eye(2))
        _, _, u, _ = synth_generate(spec)
        for sl in CalendarIndex.monsoon([2000, 2001], season_length=10).season_slices():
            assert len(np.unique(u[sl])) == 1

    def test_disjoint_supports_plant_exact_columns(self):
        spec = quadrant_spec()
        _, z, u, _ = synth_generate(spec)
        supports = spec.pattern_wet_probs.astype(np.int8)
        for t in range(z.shape[1]):
            assert np.array_equal(z[:, t], supports[u[t]])

    def test_true_v_groups_by_probability_profile(self):
        _, _, _, v = synth_generate(quadrant_spec())
        assert v.tolist() == [0, 0, 1, 1]

    def test_spec_validation(self):
        with pytest.raises(DataError):
            quadrant_spec(flip_noise=0.6)
        with pytest.raises(DataError):
            quadrant_spec(transition=np.array([[0.5, 0.6], [0.5, 0.5]]))


class TestLoad:
    def _write(self, tmp_path, rows, geo_rows=None):
        data = tmp_path / "rain.csv"
        geo = tmp_path / "geo.csv"
        data.write_text("location_id,date,rain_mm\n" + "\n".join(rows) + "\n")
        if geo_rows is None:
            geo_rows = ["0,20.0,75.0", "1,20.0,76.0"]
        geo.write_text("location_id,lat,lon\n" + "\n".join(geo_rows) + "\n")
        return data, geo

    def _full_rows(self, values):
        rows = []
        for s in range(2):
            day = np.datetime64("2000-06-01")
            for t in range(122):
                rows.append(f"{s},{day + t},{values[s][t]}")
        return rows

    def test_roundtrip_echo(self, tmp_path):
        values = np.arange(244, dtype=float).reshape(2, 122)
        data, geo = self._write(tmp_path, self._full_rows(values))
        fld = load_rainfall(data, geo)
        assert np.array_equal(fld.x, values)
        assert fld.geometry.neighbors == ((1,), (0,))
        assert fld.calendar.n_days == 122

    def test_negative_rainfall_rejected(self, tmp_path):
        values = np.ones((2, 122))
        values[0, 0] = -1.0
        data, geo = self._write(tmp_path, self._full_rows(values))
        with pytest.raises(DataError, match="negative rainfall"):
            load_rainfall(data, geo)

    def test_missing_combination_lists_gaps(self, tmp_path):
        rows = self._full_rows(np.ones((2, 122)))
        del rows[5]
        data, geo = self._write(tmp_path, rows)
        with pytest.raises(DataError, match="missing location/day"):
            load_rainfall(data, geo)

    def test_non_monsoon_rows_skipped(self, tmp_path, caplog):
        rows = self._full_rows(np.ones((2, 122)))
        rows.append("0,2000-01-15,3.0")
        data, geo = self._write(tmp_path, rows)
        with caplog.at_level("WARNING", logger="rainstates.grid_data"):
            fld = load_rainfall(data, geo)
        assert fld.n_days == 122
        assert "skipped 1 non-monsoon rows" in caplog.text

    def test_writer_loader_roundtrip(self, tmp_path):
        fld, _, _, _ = synth_generate(quadrant_spec(season_length=122))
        write_rainfall_csv(fld, tmp_path / "r.csv")
        write_geometry_csv(fld.geometry, tmp_path / "g.csv")
        loaded = load_rainfall(tmp_path / "r.csv", tmp_path / "g.csv")
        assert np.allclose(loaded.x, fld.x)
        assert loaded.geometry.neighbors == fld.geometry.neighbors
