import math

import numpy as np
import pytest
from scipy.optimize import brentq

from rainstates.baselines_eval import adjusted_rand_index
from rainstates.grid_data import CalendarIndex, SynthSpec, synth_generate
from rainstates.gibbs_sampler import (
    SamplerConfig,
    initialize,
    run,
    self_transition_count,
    site_parity,
)
from rainstates.mrf_model import (
    EmissionParams,
    LatentState,
    ModelParams,
    joint_log_density,
    refresh_prototypes,
    wet_probability_matrix,
)
from test_grid_data import make_field


def planted_spec(rows=6, cols=6, n_patterns=3, n_years=1, season_length=60, flip=0.05, seed=1):
    s = rows * cols
    probs = np.full((n_patterns, s), 0.05)
    blocks = np.array_split(np.arange(s), n_patterns)
    for k, block in enumerate(blocks):
        probs[k, block] = 0.9
    trans = np.full((n_patterns, n_patterns), 0.2 / max(n_patterns - 1, 1))
    np.fill_diagonal(trans, 0.8)
    return SynthSpec(
        grid_rows=rows,
        grid_cols=cols,
        n_years=n_years,
        n_patterns=n_patterns,
        pattern_wet_probs=probs,
        transition=trans,
        dry_mean_mm=1.0,
        wet_mean_mm=12.0,
        wet_shape=2.0,
        flip_noise=flip,
        seed=seed,
        season_length=season_length,
    )


def fit_params(n_patterns=3, n_regions=4, **kw):
    defaults = dict(
        emission=EmissionParams(
            dry_rate=1.0, wet_shape=2.0, wet_rate=2.0 / 12.0, zero_mass_dry=1e-3, zero_mass_wet=1e-3
        ),
        max_clusters_u=n_patterns,
        max_clusters_v=n_regions,
    )
    defaults.update(kw)
    return ModelParams(**defaults)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SamplerConfig(n_sweeps=0)
        with pytest.raises(ValueError):
            SamplerConfig(n_sweeps=5, burn_in=5)
        with pytest.raises(ValueError):
            SamplerConfig(init="given")
        with pytest.raises(ValueError):
            SamplerConfig(worker_count=0)
        with pytest.raises(ValueError):
            SamplerConfig(init="bogus")


class TestInitialize:
    def test_constant_zero_rainfall_gives_all_dry(self):
        fld = make_field(np.zeros((4, 6)), season_length=6)
        state, _ = initialize(fld, fit_params(), SamplerConfig(seed=3))
        assert np.all(state.z == 0)

    def test_given_state_identity(self):
        fld, z, u, v = synth_generate(planted_spec())
        params = fit_params()
        given = LatentState(z=z, u=u, v=v % params.max_clusters_v)
        state, proto = initialize(fld, params, SamplerConfig(init="given", given_state=given))
        assert np.array_equal(state.z, given.z)
        assert np.array_equal(state.u, given.u)
        expected = refresh_prototypes(given, fld, params)
        assert np.allclose(proto.pi, expected.pi)

    def test_same_seed_identical(self):
        fld, _, _, _ = synth_generate(planted_spec())
        params = fit_params()
        s1, _ = initialize(fld, params, SamplerConfig(seed=9))
        s2, _ = initialize(fld, params, SamplerConfig(seed=9))
        assert np.array_equal(s1.z, s2.z)
        assert np.array_equal(s1.u, s2.u)
        assert np.array_equal(s1.v, s2.v)


class TestCheckerboard:
    def test_no_color_class_contains_mrf_neighbors(self):
        fld, _, _, _ = synth_generate(planted_spec(rows=3, cols=5, season_length=8, n_years=2))
        parity = site_parity(fld)
        for s, sp in fld.geometry.edges():
            assert np.all(parity[s, :] != parity[sp, :])
        step = fld.calendar.same_season_step()
        for s in range(fld.n_locations):
            assert np.all(parity[s, 1:][step] != parity[s, :-1][step])


class TestRun:
    def test_single_sweep_trace_and_map(self):
        fld, _, _, _ = synth_generate(planted_spec(rows=3, cols=3, season_length=12))
        result = run(fld, fit_params(), SamplerConfig(n_sweeps=1, burn_in=0, seed=4))
        assert len(result.log_density_trace) == 1
        assert np.array_equal(result.map_state.z, result.final_state.z)
        assert np.array_equal(result.map_state.u, result.final_state.u)
        assert np.array_equal(result.map_state.v, result.final_state.v)

    def test_determinism_and_worker_independence(self):
        fld, _, _, _ = synth_generate(planted_spec(rows=4, cols=4, season_length=20))
        results = [
            run(fld, fit_params(), SamplerConfig(n_sweeps=8, burn_in=2, seed=7, worker_count=w))
            for w in (1, 1, 4)
        ]
        for other in results[1:]:
            assert np.array_equal(results[0].final_state.z, other.final_state.z)
            assert np.array_equal(results[0].final_state.u, other.final_state.u)
            assert np.array_equal(results[0].final_state.v, other.final_state.v)
            assert np.array_equal(results[0].log_density_trace, other.log_density_trace)
            assert np.array_equal(results[0].map_state.z, other.map_state.z)

    def test_map_is_running_max_after_burn_in(self):
        fld, _, _, _ = synth_generate(planted_spec(rows=3, cols=3, season_length=15))
        config = SamplerConfig(n_sweeps=12, burn_in=4, seed=2)
        result = run(fld, fit_params(), config)
        assert result.map_log_density == pytest.approx(max(result.log_density_trace[4:]))
        assert result.map_log_density >= result.final_log_density - 1e-9

    def test_map_density_recomputable_from_state(self):
        fld, _, _, _ = synth_generate(planted_spec(rows=3, cols=3, season_length=15))
        params = fit_params()
        result = run(fld, params, SamplerConfig(n_sweeps=10, burn_in=0, seed=2))
        proto = refresh_prototypes(result.map_state, fld, params)
        assert joint_log_density(result.map_state, fld, params, proto) == pytest.approx(
            result.map_log_density
        )

    def test_decoupled_extreme_emissions_threshold_in_one_sweep(self):
        emission = EmissionParams(
            dry_rate=100.0, wet_shape=100.0, wet_rate=10.0, zero_mass_dry=1e-6, zero_mass_wet=1e-6
        )
        params = ModelParams(
            j_temporal=0.0,
            j_spatial=0.0,
            lambda_ss=0.0,
            lambda_st=0.0,
            eta=math.inf,
            zeta=math.inf,
            emission=emission,
            max_clusters_u=2,
            max_clusters_v=2,
        )

        def log_density_gap(x):
            lld, llw = emission.log_density_pair(np.array([x]))
            return float(llw[0] - lld[0])

        crossover = brentq(log_density_gap, 0.05, 9.0)
        rng = np.random.default_rng(0)
        x = np.concatenate([rng.uniform(0.001, 0.02, 18), rng.uniform(8.0, 12.0, 18)])
        rng.shuffle(x)
        x = x.reshape(6, 6)
        assert np.all(np.abs([log_density_gap(v) for v in x.ravel()]) > 50)

        fld = make_field(x, season_length=6)
        result = run(fld, params, SamplerConfig(n_sweeps=1, burn_in=0, seed=5, init="random"))
        assert np.array_equal(result.final_state.z, (x > crossover).astype(np.int8))

    def test_decoupled_empirical_distribution_matches_conditional(self):
        # moderately overlapping emissions so the wet probability is interior
        params = ModelParams(
            j_temporal=0.0,
            j_spatial=0.0,
            lambda_ss=0.0,
            lambda_st=0.0,
            eta=math.inf,
            zeta=math.inf,
            emission=EmissionParams(dry_rate=0.4, wet_shape=1.5, wet_rate=0.3, zero_mass_dry=0.2, zero_mass_wet=0.1),
            max_clusters_u=2,
            max_clusters_v=2,
        )
        rng = np.random.default_rng(11)
        x = rng.gamma(1.5, 3.0, size=(2, 6))
        fld = make_field(x, season_length=6)
        n_sweeps = 10_000
        result = run(
            fld,
            params,
            SamplerConfig(n_sweeps=n_sweeps, burn_in=0, seed=13, collect_z_mean=True),
        )
        state, proto = initialize(fld, params, SamplerConfig(seed=13))
        p1 = wet_probability_matrix(state, fld, params, proto)
        se = np.sqrt(p1 * (1 - p1) / n_sweeps)
        assert np.all(np.abs(result.z_mean - p1) <= 3.0 * se)

    def test_synthetic_recovery_sanity(self):
        spec = planted_spec()
        fld, _, u_true, _ = synth_generate(spec)
        params = fit_params(n_patterns=3, n_regions=3)
        result = run(fld, params, SamplerConfig(n_sweeps=60, burn_in=20, seed=0))
        assert adjusted_rand_index(result.map_state.u, u_true) >= 0.9


class TestSelfTransitions:
    def test_hand_examples(self):
        cal = CalendarIndex.monsoon([0], season_length=5)
        assert self_transition_count(np.array([1, 1, 2, 2, 1]), cal) == 2
        assert self_transition_count(np.array([3, 3, 3, 3, 3]), cal) == 4
        assert self_transition_count(np.array([1, 2, 1, 2, 1]), cal) == 0

    def test_cross_season_flag(self):
        cal = CalendarIndex.monsoon([0, 1], season_length=2)
        u = np.array([1, 1, 1, 2])
        assert self_transition_count(u, cal) == 2
        assert self_transition_count(u, cal, include_cross_season=False) == 1

    def test_too_short(self):
        cal = CalendarIndex.monsoon([0], season_length=1)
        with pytest.raises(ValueError):
            self_transition_count(np.array([1]), cal)
