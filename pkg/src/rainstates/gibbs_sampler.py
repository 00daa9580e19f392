"""Gibbs sweeps over (z, u, v) with deterministic, schedule-independent RNG.

Each sweep updates the binary lattice in two checkerboard half-sweeps
(sites colored by grid-row + grid-column + day parity, so no two sites of
one color share a spatial or temporal edge), then all daily labels, then
all location labels, and finally refreshes the cluster prototypes. Label
phases draw every site from its conditional computed at phase start, so
they can run concurrently across sites.

Randomness comes from counter-based Philox streams keyed by (seed, sweep,
phase) and indexed by site, which makes results bit-identical for any
worker count or scheduling order.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .grid_data import CalendarIndex, RainfallField
from .mrf_model import (
    ClusterPrototypes,
    LatentState,
    ModelParams,
    joint_log_density,
    label_probability_matrix_u,
    label_probability_matrix_v,
    refresh_prototypes,
)

_PHASE_Z_EVEN = 0
_PHASE_Z_ODD = 1
_PHASE_U = 2
_PHASE_V = 3
_PHASE_INIT = 4

INIT_MODES = ("threshold_local_mean", "random", "given")


@dataclass(frozen=True)
class SamplerConfig:
    n_sweeps: int = 500
    burn_in: int = 100
    seed: int = 0
    init: str = "threshold_local_mean"
    given_state: LatentState | None = None
    track_mode: bool = True
    worker_count: int = 1
    collect_z_mean: bool = False

    def __post_init__(self):
        if self.n_sweeps < 1:
            raise ValueError("n_sweeps must be at least 1")
        if not (0 <= self.burn_in < self.n_sweeps):
            raise ValueError("burn_in must satisfy 0 <= burn_in < n_sweeps")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}")
        if self.init == "given" and self.given_state is None:
            raise ValueError("init='given' requires given_state")
        if self.worker_count < 1:
            raise ValueError("worker_count must be at least 1")


@dataclass
class SamplerResult:
    map_state: LatentState
    final_state: LatentState
    map_log_density: float
    final_log_density: float
    log_density_trace: np.ndarray
    changed_z: np.ndarray
    changed_u: np.ndarray
    changed_v: np.ndarray
    prototypes: ClusterPrototypes
    map_prototypes: ClusterPrototypes
    z_mean: np.ndarray | None = None  # post-burn-in mean of z, when collected


def _stream(seed: int, sweep: int, phase: int) -> np.random.Generator:
    counter = np.array([sweep, phase, 0, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=np.uint64(seed), counter=counter))


def site_parity(fld: RainfallField) -> np.ndarray:
    """Checkerboard color of each (location, day) site."""
    gy, gx = fld.geometry.grid_steps()
    t = np.arange(fld.n_days)
    return (gy[:, None] + gx[:, None] + t[None, :]) % 2


def initialize(
    fld: RainfallField, params: ModelParams, config: SamplerConfig
) -> tuple[LatentState, ClusterPrototypes]:
    """Deterministic starting state plus refreshed prototypes."""
    s_count, d_count = fld.x.shape
    if config.init == "given":
        state = config.given_state.copy()
        state.check_bounds(params)
        if state.z.shape != fld.x.shape:
            raise ValueError("given state does not match field dimensions")
    elif config.init == "random":
        rng = _stream(config.seed, 0, _PHASE_INIT)
        state = LatentState(
            z=(rng.random((s_count, d_count)) < 0.5).astype(np.int8),
            u=rng.integers(0, params.max_clusters_u, size=d_count),
            v=rng.integers(0, params.max_clusters_v, size=s_count),
        )
    else:
        from .baselines_eval import kmeans  # local import, breaks module cycle

        z = (fld.x > fld.x.mean(axis=1, keepdims=True)).astype(np.int8)
        zf = z.astype(float)
        ku = min(params.max_clusters_u, d_count)
        kv = min(params.max_clusters_v, s_count)
        u = kmeans(zf.T, ku, seed=config.seed).labels
        v = kmeans(zf, kv, seed=config.seed + 1).labels
        state = LatentState(z=z, u=u, v=v)
    return state, refresh_prototypes(state, fld, params)


def run(fld: RainfallField, params: ModelParams, config: SamplerConfig) -> SamplerResult:
    """Run the sampler and report the best state visited after burn-in."""
    state, proto = initialize(fld, params, config)
    s_count, d_count = fld.x.shape
    parity = site_parity(fld)
    adjacency = sparse.csr_array(fld.geometry.adjacency_matrix())
    emission_ll = params.emission.log_density_pair(fld.x)
    row_chunks = _row_chunks(s_count, config.worker_count)

    trace = np.empty(config.n_sweeps)
    changed_z = np.zeros(config.n_sweeps, dtype=int)
    changed_u = np.zeros(config.n_sweeps, dtype=int)
    changed_v = np.zeros(config.n_sweeps, dtype=int)
    map_state = None
    map_proto = None
    map_ld = -math.inf
    z_sum = np.zeros((s_count, d_count)) if config.collect_z_mean else None
    z_sum_count = 0

    for sweep in range(config.n_sweeps):
        z_before = state.z.copy()
        for phase, color in ((_PHASE_Z_EVEN, 0), (_PHASE_Z_ODD, 1)):
            uniforms = _stream(config.seed, sweep, phase).random((s_count, d_count))
            _update_color(
                state, fld, params, proto, parity, color, uniforms,
                emission_ll, adjacency, row_chunks, config.worker_count,
            )
        changed_z[sweep] = int(np.sum(state.z != z_before))

        probs_u = label_probability_matrix_u(state, fld, params, proto)
        new_u = _sample_rows(probs_u, _stream(config.seed, sweep, _PHASE_U).random(d_count))
        changed_u[sweep] = int(np.sum(new_u != state.u))
        state.u = new_u

        probs_v = label_probability_matrix_v(state, fld, params, proto)
        new_v = _sample_rows(probs_v, _stream(config.seed, sweep, _PHASE_V).random(s_count))
        changed_v[sweep] = int(np.sum(new_v != state.v))
        state.v = new_v

        proto = refresh_prototypes(state, fld, params)
        ld = joint_log_density(state, fld, params, proto, emission_ll=emission_ll)
        trace[sweep] = ld
        if config.track_mode and sweep >= config.burn_in and ld > map_ld:
            map_ld = ld
            map_state = state.copy()
            map_proto = proto
        if z_sum is not None and sweep >= config.burn_in:
            z_sum += state.z
            z_sum_count += 1

    if map_state is None:
        map_state = state.copy()
        map_proto = proto
        map_ld = trace[-1]
    return SamplerResult(
        map_state=map_state,
        final_state=state,
        map_log_density=float(map_ld),
        final_log_density=float(trace[-1]),
        log_density_trace=trace,
        changed_z=changed_z,
        changed_u=changed_u,
        changed_v=changed_v,
        prototypes=proto,
        map_prototypes=map_proto,
        z_mean=z_sum / z_sum_count if z_sum is not None else None,
    )


def _row_chunks(s_count: int, worker_count: int) -> list[slice]:
    n = min(worker_count, s_count)
    bounds = np.linspace(0, s_count, n + 1).astype(int)
    return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _update_color(
    state, fld, params, proto, parity, color, uniforms,
    emission_ll, adjacency, row_chunks, worker_count,
):
    z = state.z
    zf = z.astype(float)
    d_count = fld.n_days
    step = fld.calendar.same_season_step() if d_count > 1 else np.zeros(0, dtype=bool)
    left_ok = np.zeros(d_count)
    right_ok = np.zeros(d_count)
    left_ok[1:] = step
    right_ok[:-1] = step
    deg_tm = left_ok + right_ok
    lld, llw = emission_ll
    q1 = proto.tau[state.v]
    p1 = proto.pi[state.u].T

    def work(rows: slice) -> None:
        zf_block = zf[rows]
        n_wet_tm = np.zeros_like(zf_block)
        n_wet_tm[:, 1:] += zf_block[:, :-1] * left_ok[1:]
        n_wet_tm[:, :-1] += zf_block[:, 1:] * right_ok[:-1]
        adj_block = adjacency[rows]
        n_wet_sp = adj_block @ zf
        deg_sp = np.asarray(adj_block.sum(axis=1)).reshape(-1, 1)

        w1 = (
            params.j_temporal * n_wet_tm
            + params.j_spatial * n_wet_sp
            + params.lambda_ss * np.log(p1[rows])
            + params.lambda_st * np.log(q1[rows])
            + llw[rows]
        )
        w0 = (
            params.j_temporal * (deg_tm - n_wet_tm)
            + params.j_spatial * (deg_sp - n_wet_sp)
            + params.lambda_ss * np.log1p(-p1[rows])
            + params.lambda_st * np.log1p(-q1[rows])
            + lld[rows]
        )
        both_void = np.isneginf(w0) & np.isneginf(w1)
        with np.errstate(over="ignore", invalid="ignore"):
            e = np.exp(-np.abs(w0 - w1))
            p_wet = np.where(w0 > w1, e / (1.0 + e), 1.0 / (1.0 + e))
        p_wet = np.where(both_void, 0.5, p_wet)
        mask = parity[rows] == color
        draws = (uniforms[rows] < p_wet).astype(np.int8)
        block = z[rows]  # view: writes land in the shared array
        block[mask] = draws[mask]

    if worker_count > 1 and len(row_chunks) > 1:
        with ThreadPoolExecutor(max_workers=worker_count) as pool:
            list(pool.map(work, row_chunks))
    else:
        for rows in row_chunks:
            work(rows)


def _sample_rows(probs: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs, axis=1)
    labels = (uniforms[:, None] > cum).sum(axis=1)
    return np.minimum(labels, probs.shape[1] - 1)


def self_transition_count(u: np.ndarray, calendar: CalendarIndex, include_cross_season: bool = True) -> int:
    """Number of consecutive-day pairs with the same daily label.

    By default all D-1 pairs of the concatenated record count (matching the
    across-the-whole-record denominator); set ``include_cross_season=False``
    to drop pairs that straddle a season boundary.
    """
    u = np.asarray(u)
    if u.size < 2:
        raise ValueError("need at least 2 days")
    same = u[1:] == u[:-1]
    if not include_cross_season:
        same = same & calendar.same_season_step()
    return int(same.sum())


def write_diagnostics_csv(result: SamplerResult, path, stamp: list[str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for line in stamp or []:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["sweep", "log_density", "changed_z", "changed_u", "changed_v"])
        for i in range(len(result.log_density_trace)):
            w.writerow([
                i,
                repr(float(result.log_density_trace[i])),
                int(result.changed_z[i]),
                int(result.changed_u[i]),
                int(result.changed_v[i]),
            ])
