import logging

import numpy as np
import pytest

from rainstates.canonical_patterns import (
    CanonicalPatternSet,
    assign_families,
    default_min_years,
    extract_spatial,
    extract_temporal,
    hamming_similarity,
    match_day,
    monthly_distribution,
    prominence,
)
from rainstates.grid_data import CalendarIndex, daily_aggregate, synth_generate
from rainstates.mrf_model import LatentState
from test_grid_data import make_field, quadrant_spec


def state_for(fld, u=None, v=None, z=None):
    s, d = fld.x.shape
    return LatentState(
        z=np.zeros((s, d), dtype=np.int8) if z is None else z,
        u=np.zeros(d, dtype=int) if u is None else u,
        v=np.zeros(s, dtype=int) if v is None else v,
    )


class TestExtractSpatial:
    def test_crp_column_means(self):
        fld = make_field([[0.0, 0.0], [2.0, 4.0]], season_length=2)
        ps = extract_spatial(fld, state_for(fld, u=[0, 0]))
        assert ps.crp[0] == pytest.approx([0.0, 3.0])

    def test_cdp_majority_with_tie_to_wet(self):
        fld = make_field(np.ones((2, 3)), season_length=3)
        z = np.array([[0, 0, 1], [1, 1, 1]], dtype=np.int8)
        ps = extract_spatial(fld, state_for(fld, u=[0, 0, 0], z=z))
        assert ps.cdp[0].tolist() == [0, 1]
        z_tie = np.array([[0, 1], [1, 0]], dtype=np.int8)
        fld2 = make_field(np.ones((2, 2)), season_length=2)
        ps2 = extract_spatial(fld2, state_for(fld2, u=[0, 0], z=z_tie))
        assert ps2.cdp[0].tolist() == [1, 1]

    def test_mu_k_means(self):
        fld = make_field([[2.0, 4.0, 6.0, 8.0]], season_length=4)
        ps = extract_spatial(fld, state_for(fld, u=[0, 1, 0, 1]))
        assert ps.mu_k.tolist() == [4.0, 6.0]

    def test_mu_k_matches_recomputation(self):
        fld, z, u, v = synth_generate(quadrant_spec())
        ps = extract_spatial(fld, LatentState(z=z, u=u, v=v))
        y = daily_aggregate(fld)
        for k, lab in enumerate(ps.labels):
            assert abs(ps.mu_k[k] - y[u == lab].mean()) < 1e-12

    def test_partition_and_order(self):
        fld, z, u, v = synth_generate(quadrant_spec())
        ps = extract_spatial(fld, LatentState(z=z, u=u, v=v))
        assert sum(len(d) for d in ps.cluster_days) == fld.n_days
        sums = ps.crp.sum(axis=1)
        assert np.all(np.diff(sums[ps.order]) >= 0)

    def test_empty_cluster_warning(self, caplog):
        fld = make_field(np.ones((2, 3)), season_length=3)
        with caplog.at_level(logging.WARNING, logger="rainstates.canonical_patterns"):
            ps = extract_spatial(fld, state_for(fld, u=[0, 0, 2]))
        assert ps.empty_labels == (1,)
        assert "empty daily clusters" in caplog.text

    def test_planted_supports_recovered_without_noise(self):
        spec = quadrant_spec()
        fld, z, u, v = synth_generate(spec)
        ps = extract_spatial(fld, LatentState(z=z, u=u, v=v))
        for k, lab in enumerate(ps.labels):
            assert np.array_equal(ps.cdp[k], spec.pattern_wet_probs[lab].astype(np.int8))


class TestExtractTemporal:
    def test_cts_row_means(self):
        fld = make_field([[1.0, 3.0], [3.0, 5.0]], season_length=2)
        ts = extract_temporal(fld, state_for(fld, v=[0, 0]))
        assert ts.cts[0] == pytest.approx([2.0, 4.0])

    def test_singleton_cluster_is_identity(self):
        fld = make_field([[1.0, 3.0], [3.0, 5.0]], season_length=2)
        ts = extract_temporal(fld, state_for(fld, v=[0, 1]))
        assert ts.cts[1] == pytest.approx([3.0, 5.0])

    def test_cds_majority(self):
        fld = make_field(np.ones((2, 2)), season_length=2)
        z = np.array([[0, 1], [0, 1]], dtype=np.int8)
        ts = extract_temporal(fld, state_for(fld, v=[0, 0], z=z))
        assert ts.cds[0].tolist() == [0, 1]
        assert sum(ts.sizes) == 2


class TestProminence:
    def test_default_threshold_scales(self):
        assert default_min_years(8) == 5
        assert default_min_years(1) == 1
        assert default_min_years(4) == 3

    def test_five_of_eight_years(self):
        cal = CalendarIndex.monsoon(range(2000, 2008), season_length=2)
        fld = make_field(np.ones((1, cal.n_days)), years=range(2000, 2008), season_length=2)
        u = np.ones(cal.n_days, dtype=int)
        u[[0, 2, 4, 6, 8]] = 0  # label 0 touches years 2000..2004
        ps = extract_spatial(fld, state_for(fld, u=u))
        prominence(ps, cal)
        assert ps.prominent[ps.index_of(0)]

    def test_single_year_cluster_not_prominent(self):
        cal = CalendarIndex.monsoon(range(2000, 2008), season_length=2)
        fld = make_field(np.ones((1, cal.n_days)), years=range(2000, 2008), season_length=2)
        u = np.ones(cal.n_days, dtype=int)
        u[0] = 0
        ps = prominence(extract_spatial(fld, state_for(fld, u=u)), cal)
        assert not ps.prominent[ps.index_of(0)]

    def test_one_year_everything_prominent(self):
        fld = make_field(np.ones((1, 4)), season_length=4)
        ps = prominence(extract_spatial(fld, state_for(fld, u=[0, 1, 0, 1])), fld.calendar, min_years=1)
        assert ps.prominent.all()


def handmade_patterns(wet_fracs, cdps, prominent=None):
    k = len(wet_fracs)
    return CanonicalPatternSet(
        labels=np.arange(k),
        crp=np.asarray(cdps, dtype=float),
        cdp=np.asarray(cdps, dtype=np.int8),
        cluster_days=[np.array([i]) for i in range(k)],
        mu_k=np.zeros(k),
        wet_fraction=np.asarray(wet_fracs),
        order=np.arange(k),
        prominent=np.ones(k, dtype=bool) if prominent is None else np.asarray(prominent),
    )


class TestFamilies:
    def test_rule_based_assignment(self):
        # 4 cells: first two are the monsoon zone, last two the north
        mz = np.array([True, True, False, False])
        no = np.array([False, False, True, True])
        ps = handmade_patterns(
            wet_fracs=[0.02, 0.5, 0.5],
            cdps=[[0, 0, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1]],
        )
        fam = assign_families(ps, mz, no)
        assert fam == {0: 1, 1: 3, 2: 2}

    def test_override_wins(self):
        mz = np.array([True, True, False, False])
        no = ~mz
        ps = handmade_patterns([0.02, 0.5], [[0, 0, 0, 0], [1, 1, 0, 0]])
        fam = assign_families(ps, mz, no, overrides={1: 2})
        assert fam[1] == 2

    def test_missing_masks_error(self):
        ps = handmade_patterns([0.02, 0.5], [[0, 0, 0, 0], [1, 1, 0, 0]])
        with pytest.raises(ValueError):
            assign_families(ps, None, None)
        fam = assign_families(ps, None, None, overrides={0: 1, 1: 3})
        assert fam == {0: 1, 1: 3}


class TestMonthlyDistribution:
    def test_june_only_label(self):
        cal = CalendarIndex.monsoon([2000])
        fld = make_field(np.ones((1, 122)), years=[2000])
        u = np.ones(122, dtype=int)
        u[:30] = 0
        ps = extract_spatial(fld, state_for(fld, u=u))
        dist = monthly_distribution(ps, cal)
        assert dist[ps.index_of(0)].tolist() == [30.0, 0.0, 0.0, 0.0]

    def test_july_days_averaged_over_years(self):
        cal = CalendarIndex.monsoon([2000, 2001])
        fld = make_field(np.ones((1, 244)), years=[2000, 2001])
        u = np.ones(244, dtype=int)
        july = np.flatnonzero(cal.month == 7)
        u[july[:8]] = 0
        ps = extract_spatial(fld, state_for(fld, u=u))
        assert monthly_distribution(ps, cal)[ps.index_of(0)].tolist() == [0.0, 4.0, 0.0, 0.0]


class TestMatchDay:
    def _patterns(self):
        return handmade_patterns(
            [0.5, 0.5],
            [[0, 1, 0, 0], [1, 1, 1, 0]],
        )

    def test_exact_match_similarity_one(self):
        ps = self._patterns()
        _, lab, sim = match_day(np.array([0, 1, 0, 0.0]), np.array([0, 1, 0, 0]), ps)
        assert lab == 0 and sim == 1.0

    def test_one_mismatch_of_four(self):
        ps = self._patterns()
        _, lab, sim = match_day(np.array([0, 1, 1, 0.0]), np.array([0, 1, 1, 0]), ps)
        assert lab == 0 and sim == 0.75

    def test_tie_breaks_low_label(self):
        ps = handmade_patterns([0.5, 0.5], [[0, 0, 1, 1], [1, 1, 0, 0]])
        _, lab, sim = match_day(np.array([0, 1, 0, 1.0]), np.array([0, 1, 0, 1]), ps)
        assert lab == 0 and sim == 0.5

    def test_similarity_properties(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a = rng.integers(0, 2, 8)
            b = rng.integers(0, 2, 8)
            assert hamming_similarity(a, a) == 1.0
            assert hamming_similarity(a, b) == hamming_similarity(b, a)
            assert 0.0 <= hamming_similarity(a, b) <= 1.0
