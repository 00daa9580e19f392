"""Command-line front end: synth | fit | analyze | simulate | evaluate.

Every run is driven by a flat key=value JSON config; the sorted config is
stamped as comment lines into each output file, so any CSV can be traced
back to the exact parameters that produced it. Reruns with the same config
and seed overwrite outputs with identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import baselines_eval, canonical_patterns, spell_analysis, transition_analysis
from .gibbs_sampler import SamplerConfig, run, write_diagnostics_csv
from .grid_data import (
    DataError,
    RainfallField,
    SynthSpec,
    classify_years,
    daily_aggregate,
    load_rainfall,
    synth_generate,
    write_geometry_csv,
    write_rainfall_csv,
    write_truth_csv,
)
from .mrf_model import LatentState, ModelParams

logger = logging.getLogger(__name__)


class CliError(Exception):
    """User-facing failure: bad config, missing inputs, invalid files."""


DEFAULT_CONFIG: dict = {
    "out": "runs/default",
    "data": None,                    # default: <out>/rainfall.csv
    "geometry": None,                # default: <out>/geometry.csv
    "masks.monsoon_zone": None,
    "masks.north": None,
    "synth.grid_rows": 8,
    "synth.grid_cols": 8,
    "synth.n_years": 2,
    "synth.n_patterns": 4,
    "synth.flip_noise": 0.1,
    "synth.seed": 0,
    "synth.dry_mean_mm": 1.0,
    "synth.wet_mean_mm": 12.0,
    "synth.wet_shape": 2.0,
    "synth.self_prob": 0.8,
    "synth.wet_prob_in": 0.9,
    "synth.wet_prob_out": 0.05,
    "synth.start_year": 2000,
    "synth.transition": None,        # optional explicit row-stochastic matrix
    "model.j_temporal": 1.0,
    "model.j_spatial": 1.0,
    "model.lambda_ss": 1.0,
    "model.lambda_st": 1.0,
    "model.aggregate_sigma": "auto",  # population std of Y(t), or a number
    "model.eta": 9.0,
    "model.zeta": 9.0,
    "model.max_clusters_u": 24,
    "model.max_clusters_v": 60,
    "model.dry_rate": 1.0,
    "model.wet_shape": 2.0,
    "model.wet_rate": 1.0 / 6.0,
    "model.zero_mass_dry": 0.05,
    "model.zero_mass_wet": 0.001,
    "sampler.n_sweeps": 500,
    "sampler.burn_in": 100,
    "sampler.seed": 0,
    "sampler.init": "threshold_local_mean",
    "sampler.worker_count": 1,
    "analysis.min_run": 3,
    "analysis.include_cross_season": False,
    "analysis.min_years": None,      # default: 5-of-8 rule scaled to n_years
    "analysis.dry_quantile": 0.3,
    "analysis.subseq_k": 3,
    "analysis.top_n": 10,
    "analysis.family_overrides": {},
    "analysis.fixed_threshold_mm": 5.0,
    "simulate.n_seasons": 5,
    "simulate.length": 122,
    "simulate.seed": 0,
    "simulate.initial": "stationary",  # or "uniform"
    "evaluate.seed": 0,
}

F_RAIN = "rainfall.csv"
F_GEO = "geometry.csv"
F_TRUTH = "truth.csv"
F_Z = "state_z.csv"
F_U = "state_u.csv"
F_V = "state_v.csv"
F_PI = "prototypes_pi.csv"
F_TAU = "prototypes_tau.csv"
F_MU = "prototypes_mu_agg.csv"
F_DIAG = "diagnostics.csv"
F_PAT_SP = "patterns_spatial.csv"
F_PAT_TM = "patterns_temporal.csv"
F_SUMMARY = "patterns_summary.csv"
F_MONTHLY = "monthly_distribution.csv"
F_YEARS = "year_classes.csv"
F_TRANS = "transition_matrix.csv"
F_TRANS_COUNTS = "transition_counts.csv"
F_TRANS_ZERO = "transition_zero_diag.csv"
F_TRANS_FAMILY = "transition_family_view.csv"
F_SUBSEQ = "subsequences.csv"
F_SPELL_STATS = "pattern_spell_stats.csv"
F_SPELLS_THRESH = "spells_threshold.csv"
F_SPELLS_CLUSTER = "spells_cluster.csv"
F_SPELLS_REGIONAL = "spells_regional.csv"
F_SPELLS_GRID = "spells_grid.csv"
F_COMPARISON = "spell_comparison.txt"
F_COHERENCE = "coherence.txt"
F_LOCAL_MEANS = "local_spell_means.csv"
F_REGIONAL_MEANS = "regional_spell_means.csv"
F_HAMMING_DAY = "hamming_similarity.csv"
F_HAMMING_YEAR = "hamming_by_year.csv"
F_HAMMING_REPORT = "hamming_report.txt"
F_SIM = "simulated_seasons.csv"
F_SIM_RAIN = "simulated_rainfall.csv"
F_EVAL_TM = "evaluate_temporal.csv"
F_EVAL_DAILY = "evaluate_daily.csv"


# ---------------------------------------------------------------------------
# config and io helpers


def load_config(path: str | None, out_override=None, seed_override=None, seed_key=None) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise CliError(f"config file not found: {path}")
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise CliError(f"config is not valid JSON: {exc}") from exc
        unknown = sorted(set(user) - set(cfg))
        if unknown:
            raise CliError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(user)
    if out_override is not None:
        cfg["out"] = out_override
    if seed_override is not None and seed_key is not None:
        cfg[seed_key] = seed_override
    return cfg


def config_stamp(cfg: dict) -> list[str]:
    return [f"{k}={json.dumps(cfg[k], sort_keys=True)}" for k in sorted(cfg)]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: list[str], rows, stamp: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        for line in stamp:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_report(path: Path, items: dict, stamp: list[str]) -> None:
    with open(path, "w") as fh:
        for line in stamp:
            fh.write(f"# {line}\n")
        for k, v in items.items():
            fh.write(f"{k}={_fmt(v)}\n")


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    if not path.exists():
        raise CliError(f"expected file missing: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    if not rows:
        raise CliError(f"empty csv: {path}")
    return rows[0], rows[1:]


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_field(cfg: dict) -> RainfallField:
    out = Path(cfg["out"])
    data = Path(cfg["data"]) if cfg["data"] else out / F_RAIN
    geometry = Path(cfg["geometry"]) if cfg["geometry"] else out / F_GEO
    for p in (data, geometry):
        if not p.exists():
            raise CliError(f"input file not found: {p}")
    return load_rainfall(data, geometry)


def _model_params(cfg: dict, fld: RainfallField) -> ModelParams:
    flat = {k.split(".", 1)[1]: v for k, v in cfg.items() if k.startswith("model.")}
    sigma = flat["aggregate_sigma"]
    if sigma == "auto":
        y = daily_aggregate(fld)
        flat["aggregate_sigma"] = float(y.std()) if y.std() > 0 else math.inf
    elif isinstance(sigma, str):
        flat["aggregate_sigma"] = float(sigma)
    try:
        return ModelParams.from_flat(flat)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad model parameters: {exc}") from exc


def _read_state(out: Path) -> LatentState:
    _, z_rows = read_csv(out / F_Z)
    z = np.array([[int(v) for v in row[1:]] for row in z_rows], dtype=np.int8)
    _, u_rows = read_csv(out / F_U)
    u = np.array([int(row[2]) for row in u_rows])
    _, v_rows = read_csv(out / F_V)
    v = np.array([int(row[1]) for row in v_rows])
    return LatentState(z=z, u=u, v=v)


def _read_mask(path: str | None, n_locations: int) -> np.ndarray | None:
    if path is None:
        return None
    header, rows = read_csv(Path(path))
    if header[:2] != ["location_id", "flag"]:
        raise CliError(f"mask file must have header location_id,flag: {path}")
    mask = np.zeros(n_locations, dtype=bool)
    for row in rows:
        mask[int(row[0])] = bool(int(row[1]))
    return mask


# ---------------------------------------------------------------------------
# commands


def cmd_synth(cfg: dict) -> None:
    # synth outputs carry no stamp comments: they are ingestion-format data files
    out = _out_dir(cfg)
    rows, cols = int(cfg["synth.grid_rows"]), int(cfg["synth.grid_cols"])
    n_patterns = int(cfg["synth.n_patterns"])
    s_count = rows * cols

    if cfg["synth.transition"] is not None:
        transition = np.asarray(cfg["synth.transition"], dtype=float)
    else:
        if n_patterns == 1:
            transition = np.ones((1, 1))
        else:
            off = (1.0 - cfg["synth.self_prob"]) / (n_patterns - 1)
            transition = np.full((n_patterns, n_patterns), off)
            np.fill_diagonal(transition, cfg["synth.self_prob"])

    probs = np.full((n_patterns, s_count), float(cfg["synth.wet_prob_out"]))
    for k, block in enumerate(np.array_split(np.arange(s_count), n_patterns)):
        probs[k, block] = float(cfg["synth.wet_prob_in"])

    try:
        spec = SynthSpec(
            grid_rows=rows,
            grid_cols=cols,
            n_years=int(cfg["synth.n_years"]),
            n_patterns=n_patterns,
            pattern_wet_probs=probs,
            transition=transition,
            dry_mean_mm=float(cfg["synth.dry_mean_mm"]),
            wet_mean_mm=float(cfg["synth.wet_mean_mm"]),
            wet_shape=float(cfg["synth.wet_shape"]),
            flip_noise=float(cfg["synth.flip_noise"]),
            seed=int(cfg["synth.seed"]),
            start_year=int(cfg["synth.start_year"]),
        )
    except DataError as exc:
        raise CliError(f"bad synthetic spec: {exc}") from exc

    fld, z, u, v = synth_generate(spec)
    write_rainfall_csv(fld, out / F_RAIN)
    write_geometry_csv(fld.geometry, out / F_GEO)
    write_truth_csv(z, u, v, out / F_TRUTH)
    print(
        f"synth: locations={fld.n_locations} days={fld.n_days} "
        f"rows={fld.n_locations * fld.n_days} patterns={n_patterns} out={out}"
    )


def cmd_fit(cfg: dict) -> None:
    out = _out_dir(cfg)
    stamp = config_stamp(cfg)
    fld = _load_field(cfg)
    params = _model_params(cfg, fld)
    sampler_cfg = SamplerConfig(
        n_sweeps=int(cfg["sampler.n_sweeps"]),
        burn_in=int(cfg["sampler.burn_in"]),
        seed=int(cfg["sampler.seed"]),
        init=str(cfg["sampler.init"]),
        worker_count=int(cfg["sampler.worker_count"]),
    )
    result = run(fld, params, sampler_cfg)
    state = result.map_state

    day_header = [f"d{t}" for t in range(fld.n_days)]
    write_csv(
        out / F_Z,
        ["location_id"] + day_header,
        ([s] + state.z[s].tolist() for s in range(fld.n_locations)),
        stamp,
    )
    write_csv(
        out / F_U,
        ["day", "date", "label"],
        ([t, fld.calendar.date_of(t).isoformat(), state.u[t]] for t in range(fld.n_days)),
        stamp,
    )
    write_csv(
        out / F_V,
        ["location_id", "label"],
        ([s, state.v[s]] for s in range(fld.n_locations)),
        stamp,
    )
    proto = result.map_prototypes
    write_csv(
        out / F_PI,
        ["label"] + [f"loc{s}" for s in range(fld.n_locations)],
        ([lab] + proto.pi[lab].tolist() for lab in range(params.max_clusters_u)),
        stamp,
    )
    write_csv(
        out / F_TAU,
        ["label"] + day_header,
        ([lab] + proto.tau[lab].tolist() for lab in range(params.max_clusters_v)),
        stamp,
    )
    write_csv(
        out / F_MU,
        ["label", "mu_agg_mm"],
        ([lab, proto.mu_agg[lab]] for lab in range(params.max_clusters_u)),
        stamp,
    )
    write_diagnostics_csv(result, out / F_DIAG, stamp=stamp)

    patterns = canonical_patterns.extract_spatial(fld, state)
    temporal = canonical_patterns.extract_temporal(fld, state)
    write_csv(
        out / F_PAT_SP,
        ["label", "location_id", "crp_value", "cdp_value"],
        (
            [int(lab), s, patterns.crp[k, s], int(patterns.cdp[k, s])]
            for k, lab in enumerate(patterns.labels)
            for s in range(fld.n_locations)
        ),
        stamp,
    )
    write_csv(
        out / F_PAT_TM,
        ["label", "day", "cts_value", "cds_value"],
        (
            [int(lab), t, temporal.cts[k, t], int(temporal.cds[k, t])]
            for k, lab in enumerate(temporal.labels)
            for t in range(fld.n_days)
        ),
        stamp,
    )
    print(
        f"fit: sweeps={sampler_cfg.n_sweeps} map_log_density={result.map_log_density:.3f} "
        f"daily_clusters={len(patterns.labels)} regions={len(temporal.labels)} out={out}"
    )


def _spell_rows(spell_sets, fld):
    for ss in spell_sets:
        for a, b in ss.spells:
            yield [
                ss.scale,
                ss.scale_id if ss.scale_id is not None else "",
                ss.kind,
                fld.calendar.date_of(a).isoformat(),
                fld.calendar.date_of(b).isoformat(),
                b - a + 1,
            ]


def cmd_analyze(cfg: dict) -> None:
    out = _out_dir(cfg)
    stamp = config_stamp(cfg)
    fld = _load_field(cfg)
    state = _read_state(out)
    if state.z.shape != fld.x.shape:
        raise CliError("fit outputs do not match the rainfall field dimensions")
    y = daily_aggregate(fld)
    min_run = int(cfg["analysis.min_run"])

    patterns = canonical_patterns.extract_spatial(fld, state)
    temporal = canonical_patterns.extract_temporal(fld, state)
    canonical_patterns.prominence(patterns, fld.calendar, min_years=cfg["analysis.min_years"])

    mz_mask = _read_mask(cfg["masks.monsoon_zone"], fld.n_locations)
    no_mask = _read_mask(cfg["masks.north"], fld.n_locations)
    overrides = {int(k): int(v) for k, v in dict(cfg["analysis.family_overrides"]).items()}
    try:
        families = canonical_patterns.assign_families(
            patterns, mz_mask, no_mask, dry_quantile=float(cfg["analysis.dry_quantile"]), overrides=overrides
        )
    except ValueError:
        logger.warning("family masks missing; family assignments skipped")
        families = {}

    rank_of = {int(patterns.labels[k]): r for r, k in enumerate(patterns.order)}
    write_csv(
        out / F_SUMMARY,
        ["label", "n_days", "mu_k_mm", "wet_fraction", "prominent", "family", "order_rank"],
        (
            [
                int(lab),
                len(patterns.cluster_days[k]),
                patterns.mu_k[k],
                patterns.wet_fraction[k],
                bool(patterns.prominent[k]),
                families.get(int(lab), 0),
                rank_of[int(lab)],
            ]
            for k, lab in enumerate(patterns.labels)
        ),
        stamp,
    )

    monthly = canonical_patterns.monthly_distribution(patterns, fld.calendar)
    write_csv(
        out / F_MONTHLY,
        ["label", "june", "july", "august", "september"],
        ([int(lab)] + monthly[k].tolist() for k, lab in enumerate(patterns.labels)),
        stamp,
    )

    year_rows = []
    if fld.calendar.n_years >= 2:
        classes = classify_years(fld)
        for yr in fld.calendar.years:
            total = float(y[fld.calendar.year == yr].sum())
            year_rows.append([int(yr), total, classes[int(yr)]])
    else:
        logger.warning("single year present; year classification skipped")
    write_csv(out / F_YEARS, ["year", "total_mm", "class"], year_rows, stamp)

    prominent = [int(lab) for lab in patterns.prominent_labels()]
    if not prominent:
        logger.warning("no prominent clusters; transition analysis uses all clusters")
        prominent = [int(lab) for lab in patterns.labels]
    model = transition_analysis.estimate_transitions(
        state.u,
        fld.calendar,
        prominent,
        include_cross_season=bool(cfg["analysis.include_cross_season"]),
        families=families if families else None,
    )
    label_cols = [f"to_{lab}" for lab in model.labels]
    write_csv(
        out / F_TRANS,
        ["from_label"] + label_cols + ["uniform_row"],
        (
            [int(model.labels[i])] + model.matrix[i].tolist() + [bool(model.uniform_rows[i])]
            for i in range(len(model.labels))
        ),
        stamp,
    )
    write_csv(
        out / F_TRANS_COUNTS,
        ["from_label"] + label_cols,
        ([int(model.labels[i])] + model.counts[i].tolist() for i in range(len(model.labels))),
        stamp,
    )
    zero_diag = model.matrix.copy()
    np.fill_diagonal(zero_diag, 0.0)
    write_csv(
        out / F_TRANS_ZERO,
        ["from_label"] + label_cols,
        ([int(model.labels[i])] + zero_diag[i].tolist() for i in range(len(model.labels))),
        stamp,
    )
    if families:
        _, family_view = transition_analysis.views(model)
        perm = model.family_order
        fam_labels = [int(model.labels[i]) for i in perm]
        write_csv(
            out / F_TRANS_FAMILY,
            ["from_label", "family"] + [f"to_{lab}" for lab in fam_labels],
            (
                [fam_labels[i], families[fam_labels[i]]] + family_view[i].tolist()
                for i in range(len(fam_labels))
            ),
            stamp,
        )

    subseq = transition_analysis.frequent_ksubseq(
        state.u, fld.calendar, k=int(cfg["analysis.subseq_k"]), top_n=int(cfg["analysis.top_n"])
    )
    write_csv(
        out / F_SUBSEQ,
        ["seq", "count"],
        (["-".join(str(x) for x in seq), count] for seq, count in subseq),
        stamp,
    )

    stats = transition_analysis.pattern_spell_stats(state.u, fld.calendar, prominent)
    write_csv(
        out / F_SPELL_STATS,
        ["label", "spell_count", "mean_length_days", "spells_per_season"],
        (
            [lab, stats.spell_count[lab], stats.mean_length[lab], stats.spells_per_season[lab]]
            for lab in sorted(stats.mean_length)
        ),
        stamp,
    )

    act0, brk0 = spell_analysis.act_brk_threshold(y, fld.calendar, min_run=min_run)
    mu_k = {int(lab): float(patterns.mu_k[patterns.index_of(lab)]) for lab in prominent}
    act1, brk1 = spell_analysis.act_brk_cluster(state.u, mu_k, y, fld.calendar, min_run=min_run)
    write_csv(
        out / F_SPELLS_THRESH,
        ["scale", "id", "kind", "start_date", "end_date", "length"],
        _spell_rows([act0, brk0], fld),
        stamp,
    )
    write_csv(
        out / F_SPELLS_CLUSTER,
        ["scale", "id", "kind", "start_date", "end_date", "length"],
        _spell_rows([act1, brk1], fld),
        stamp,
    )

    cmp_act = spell_analysis.compare_spells(act0, act1, fld)
    cmp_brk = spell_analysis.compare_spells(brk0, brk1, fld)
    report = {
        "act0_days": cmp_act.size_a,
        "act1_days": cmp_act.size_b,
        "act_intersection_days": cmp_act.intersection,
        "act0_mean_aggregate_mm_per_day_per_grid": cmp_act.mean_aggregate_per_grid_a,
        "act1_mean_aggregate_mm_per_day_per_grid": cmp_act.mean_aggregate_per_grid_b,
        "act0_mean_above_mean_locations": cmp_act.mean_above_mean_locations_a,
        "act1_mean_above_mean_locations": cmp_act.mean_above_mean_locations_b,
        "act0_spells": cmp_act.spell_count_a,
        "act1_spells": cmp_act.spell_count_b,
        "act0_mean_spell_length": cmp_act.mean_spell_length_a,
        "act1_mean_spell_length": cmp_act.mean_spell_length_b,
        "brk0_days": cmp_brk.size_a,
        "brk1_days": cmp_brk.size_b,
        "brk_intersection_days": cmp_brk.intersection,
        "brk0_mean_aggregate_mm_per_day_per_grid": cmp_brk.mean_aggregate_per_grid_a,
        "brk1_mean_aggregate_mm_per_day_per_grid": cmp_brk.mean_aggregate_per_grid_b,
        "brk0_spells": cmp_brk.spell_count_a,
        "brk1_spells": cmp_brk.spell_count_b,
        "brk0_mean_spell_length": cmp_brk.mean_spell_length_a,
        "brk1_mean_spell_length": cmp_brk.mean_spell_length_b,
    }
    write_report(out / F_COMPARISON, report, stamp)

    local = spell_analysis.local_spells(state.z, fld.calendar)
    write_csv(
        out / F_LOCAL_MEANS,
        ["location_id", "mean_wet_length", "mean_dry_length"],
        (
            [s, local.mean_wet_length[s], local.mean_dry_length[s]]
            for s in range(fld.n_locations)
        ),
        stamp,
    )
    write_csv(
        out / F_SPELLS_GRID,
        ["scale", "id", "kind", "start_date", "end_date", "length"],
        _spell_rows(local.wet + local.dry, fld),
        stamp,
    )

    regional = spell_analysis.regional_spells(temporal, fld.calendar)
    regional_rows = []
    regional_spell_sets = []
    for k, lab in enumerate(temporal.labels):
        wet, dry = regional[int(lab)]
        wl = wet.spell_lengths()
        dl = dry.spell_lengths()
        regional_rows.append(
            [
                int(lab),
                int(temporal.sizes[k]),
                float(wl.mean()) if wl.size else float("nan"),
                float(dl.mean()) if dl.size else float("nan"),
            ]
        )
        regional_spell_sets.extend([wet, dry])
    write_csv(
        out / F_REGIONAL_MEANS,
        ["region", "n_locations", "mean_wet_length", "mean_dry_length"],
        regional_rows,
        stamp,
    )
    write_csv(
        out / F_SPELLS_REGIONAL,
        ["scale", "id", "kind", "start_date", "end_date", "length"],
        _spell_rows(regional_spell_sets, fld),
        stamp,
    )

    agree_m, persist_m = spell_analysis.coherence_stats(state.z, fld.geometry, fld.calendar)
    z_local = spell_analysis.threshold_discretize(fld, mode="local_mean")
    agree_l, persist_l = spell_analysis.coherence_stats(z_local, fld.geometry, fld.calendar)
    z_fixed = spell_analysis.threshold_discretize(
        fld, mode="fixed", threshold=float(cfg["analysis.fixed_threshold_mm"])
    )
    agree_f, persist_f = spell_analysis.coherence_stats(z_fixed, fld.geometry, fld.calendar)
    write_report(
        out / F_COHERENCE,
        {
            "model_neighbor_agreement": agree_m,
            "model_day_persistence": persist_m,
            "local_mean_neighbor_agreement": agree_l,
            "local_mean_day_persistence": persist_l,
            "fixed_threshold_neighbor_agreement": agree_f,
            "fixed_threshold_day_persistence": persist_f,
        },
        stamp,
    )

    ham = baselines_eval.hamming_similarity_series(state.z, state.u, patterns, fld.calendar, y=y)
    write_csv(
        out / F_HAMMING_DAY,
        ["day", "date", "similarity", "aggregate_mm"],
        (
            [t, fld.calendar.date_of(t).isoformat(), ham.per_day[t], y[t]]
            for t in range(fld.n_days)
        ),
        stamp,
    )
    annual = {int(yr): float(y[fld.calendar.year == yr].sum()) for yr in fld.calendar.years}
    write_csv(
        out / F_HAMMING_YEAR,
        ["year", "mean_similarity", "annual_total_mm"],
        ([yr, ham.per_year[yr], annual[yr]] for yr in sorted(ham.per_year)),
        stamp,
    )
    write_report(
        out / F_HAMMING_REPORT,
        {
            "mean_similarity": float(ham.per_day.mean()),
            "correlation_with_daily_aggregate": ham.correlation_with_y,
        },
        stamp,
    )
    print(
        f"analyze: prominent={len(prominent)} act0={cmp_act.size_a} act1={cmp_act.size_b} "
        f"mean_hamming={ham.per_day.mean():.3f} out={out}"
    )


def cmd_simulate(cfg: dict) -> None:
    out = _out_dir(cfg)
    stamp = config_stamp(cfg)
    header, rows = read_csv(out / F_TRANS)
    labels = [int(c[3:]) for c in header[1:] if c.startswith("to_")]
    k = len(labels)
    matrix = np.array([[float(v) for v in row[1 : 1 + k]] for row in rows])
    from_labels = [int(row[0]) for row in rows]
    if from_labels != labels:
        raise CliError("transition matrix rows and columns disagree")
    if matrix.shape != (k, k) or np.any(matrix < 0) or np.any(np.abs(matrix.sum(axis=1) - 1.0) > 1e-9):
        raise CliError("transition matrix rows are not stochastic")

    _, pat_rows = read_csv(out / F_PAT_SP)
    crp_map: dict[int, dict[int, float]] = {}
    for row in pat_rows:
        crp_map.setdefault(int(row[0]), {})[int(row[1])] = float(row[2])
    missing = [lab for lab in labels if lab not in crp_map]
    if missing:
        raise CliError(f"patterns file lacks labels {missing}")
    s_count = len(crp_map[labels[0]])
    crp = np.array([[crp_map[lab][s] for s in range(s_count)] for lab in labels])

    model = transition_analysis.TransitionModel(
        labels=np.asarray(labels),
        matrix=matrix,
        counts=np.zeros((k, k), dtype=int),
        include_cross_season=False,
        uniform_rows=np.zeros(k, dtype=bool),
    )
    if cfg["simulate.initial"] == "stationary":
        initial = transition_analysis.stationary_distribution(matrix)
        initial = np.maximum(initial, 0)
        initial = initial / initial.sum()
    elif cfg["simulate.initial"] == "uniform":
        initial = np.full(k, 1.0 / k)
    else:
        raise CliError("simulate.initial must be 'stationary' or 'uniform'")

    n_seasons = int(cfg["simulate.n_seasons"])
    length = int(cfg["simulate.length"])
    base_seed = int(cfg["simulate.seed"])
    season_rows = []
    rain_rows = []
    for season in range(n_seasons):
        u_seq, rain = transition_analysis.simulate_season(
            model, crp, initial, length=length, seed=base_seed + season
        )
        agg = rain.sum(axis=0)
        for t in range(length):
            season_rows.append([season, t, int(u_seq[t]), agg[t]])
            for s in range(s_count):
                rain_rows.append([season, t, s, rain[s, t]])
    write_csv(out / F_SIM, ["season", "day", "label", "aggregate_mm"], season_rows, stamp)
    write_csv(out / F_SIM_RAIN, ["season", "day", "location_id", "rain_mm"], rain_rows, stamp)
    print(f"simulate: seasons={n_seasons} length={length} labels={k} out={out}")


def cmd_evaluate(cfg: dict) -> None:
    out = _out_dir(cfg)
    stamp = config_stamp(cfg)
    fld = _load_field(cfg)
    state = _read_state(out)
    seed = int(cfg["evaluate.seed"])

    patterns = canonical_patterns.extract_spatial(fld, state)

    k_v = len(np.unique(state.v))
    methods_tm = {
        "mrf": state.v,
        "kmeans": baselines_eval.kmeans(fld.x, k_v, seed=seed).labels,
        "spect_euclid": baselines_eval.spectral(fld.x, k_v, affinity="euclid_gaussian", seed=seed).labels,
        "spect_hamming": baselines_eval.spectral(fld.x, k_v, affinity="hamming_gaussian", seed=seed).labels,
    }
    rows_tm = []
    for method, labels in methods_tm.items():
        rep = baselines_eval.evaluate_temporal_clustering(fld, labels, state.z)
        rows_tm.append([method, k_v, rep.std_yy, rep.l2_theta, rep.hamm_theta_d])
    write_csv(out / F_EVAL_TM, ["method", "k", "std_yy", "l2_theta", "hamm_theta_d"], rows_tm, stamp)

    k_u = len(np.unique(state.u))
    methods_daily = {
        "mrf": state.u,
        "kmeans": baselines_eval.kmeans(fld.x.T, k_u, seed=seed).labels,
        "spect_euclid": baselines_eval.spectral(fld.x.T, k_u, affinity="euclid_gaussian", seed=seed).labels,
        "spect_hamming": baselines_eval.spectral(fld.x.T, k_u, affinity="hamming_gaussian", seed=seed).labels,
    }
    rows_daily = []
    for method, labels in methods_daily.items():
        ps = (
            patterns
            if method == "mrf"
            else canonical_patterns.extract_spatial(
                fld, LatentState(z=state.z, u=labels, v=np.zeros(fld.n_locations, dtype=int))
            )
        )
        rep = baselines_eval.evaluate_daily_clustering(fld, labels, state.z, ps)
        rows_daily.append([method, k_u, rep.std_yy, rep.l2_theta, rep.hamm_theta_d, rep.self_transitions])
    write_csv(
        out / F_EVAL_DAILY,
        ["method", "k", "std_yy", "l2_theta", "hamm_theta_d", "self_transitions"],
        rows_daily,
        stamp,
    )
    print(f"evaluate: k_daily={k_u} k_regions={k_v} out={out}")


# ---------------------------------------------------------------------------
# entry point

_SEED_KEYS = {
    "synth": "synth.seed",
    "fit": "sampler.seed",
    "analyze": None,
    "simulate": "simulate.seed",
    "evaluate": "evaluate.seed",
}

_COMMANDS = {
    "synth": cmd_synth,
    "fit": cmd_fit,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rainstates",
        description="Latent wet/dry state inference and spell analysis for gridded rainfall.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key=value JSON config file")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--seed", type=int, help="seed override for this command")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.out, args.seed, _SEED_KEYS[args.command])
        _COMMANDS[args.command](cfg)
    except (CliError, DataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
