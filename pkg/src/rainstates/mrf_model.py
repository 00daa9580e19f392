"""Unnormalized joint density over latent states and its exact conditionals.

The model couples a binary wet/dry state z(s, t) to its spatial and temporal
lattice neighbors through Potts agreement potentials, to a daily cluster
label u(t) and a location cluster label v(s) through Bernoulli prototype
links, to the observed rainfall through a zero-inflated exponential (dry) /
zero-inflated gamma (wet) emission, and ties u(t) to the daily aggregate
Y(t) through a Gaussian term. Cluster labels carry exchangeable
occupancy priors (Dirichlet-multinomial with symmetric concentration),
so the single-site label conditional is proportional to
``counts_excluding_site + concentration / max_clusters``.

All conditionals here are exact with respect to ``joint_log_density``:
enumerating the joint over one site's values and normalizing reproduces
them, which the test suite checks on small lattices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .grid_data import RainfallField, daily_aggregate

PROB_CLAMP = 1e-3


@dataclass(frozen=True)
class EmissionParams:
    """Zero-inflated rainfall emissions for the dry and wet states.

    Exact zeros carry point masses; positive amounts follow an exponential
    density (dry, rate per mm) or a gamma density (wet, shape and rate).
    """

    dry_rate: float = 1.0
    wet_shape: float = 2.0
    wet_rate: float = 0.2
    zero_mass_dry: float = 0.5
    zero_mass_wet: float = 0.01

    def __post_init__(self):
        if self.dry_rate <= 0 or self.wet_rate <= 0 or self.wet_shape <= 0:
            raise ValueError("emission rates and shape must be positive")
        if not (0 <= self.zero_mass_dry < 1 and 0 <= self.zero_mass_wet < 1):
            raise ValueError("zero masses must lie in [0, 1)")

    def log_density_pair(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Elementwise (log p(x | dry), log p(x | wet)); -inf where the mass is 0."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            log_zd = math.log(self.zero_mass_dry) if self.zero_mass_dry > 0 else -math.inf
            log_zw = math.log(self.zero_mass_wet) if self.zero_mass_wet > 0 else -math.inf
            logx = np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), 0.0)
            dry = math.log1p(-self.zero_mass_dry) + math.log(self.dry_rate) - self.dry_rate * x
            wet = (
                math.log1p(-self.zero_mass_wet)
                + self.wet_shape * math.log(self.wet_rate)
                + (self.wet_shape - 1.0) * logx
                - self.wet_rate * x
                - gammaln(self.wet_shape)
            )
        lld = np.where(x > 0, dry, log_zd)
        llw = np.where(x > 0, wet, log_zw)
        return lld, llw


@dataclass(frozen=True)
class ModelParams:
    """Couplings, emission parameters and cluster-prior concentrations.

    ``eta`` and ``zeta`` may be ``math.inf``, which makes the corresponding
    label prior uniform (its contribution to the joint is a constant and is
    dropped). ``aggregate_sigma = math.inf`` switches the aggregate term off.
    """

    j_temporal: float = 1.0
    j_spatial: float = 1.0
    lambda_ss: float = 1.0
    lambda_st: float = 1.0
    emission: EmissionParams = field(default_factory=EmissionParams)
    aggregate_sigma: float = math.inf
    eta: float = 9.0
    zeta: float = 9.0
    max_clusters_u: int = 24
    max_clusters_v: int = 60

    def __post_init__(self):
        if min(self.j_temporal, self.j_spatial, self.lambda_ss, self.lambda_st) < 0:
            raise ValueError("couplings must be nonnegative")
        if self.aggregate_sigma <= 0:
            raise ValueError("aggregate_sigma must be positive")
        if self.eta <= 0 or self.zeta <= 0:
            raise ValueError("eta and zeta must be positive")
        if self.max_clusters_u < 1 or self.max_clusters_v < 1:
            raise ValueError("max_clusters must be at least 1")

    def to_flat(self) -> dict[str, float]:
        d = {
            "j_temporal": self.j_temporal,
            "j_spatial": self.j_spatial,
            "lambda_ss": self.lambda_ss,
            "lambda_st": self.lambda_st,
            "aggregate_sigma": self.aggregate_sigma,
            "eta": self.eta,
            "zeta": self.zeta,
            "max_clusters_u": self.max_clusters_u,
            "max_clusters_v": self.max_clusters_v,
            "dry_rate": self.emission.dry_rate,
            "wet_shape": self.emission.wet_shape,
            "wet_rate": self.emission.wet_rate,
            "zero_mass_dry": self.emission.zero_mass_dry,
            "zero_mass_wet": self.emission.zero_mass_wet,
        }
        return d

    @classmethod
    def from_flat(cls, flat: dict) -> "ModelParams":
        emission_keys = {"dry_rate", "wet_shape", "wet_rate", "zero_mass_dry", "zero_mass_wet"}
        em = {k: float(v) for k, v in flat.items() if k in emission_keys}
        rest = {}
        for k, v in flat.items():
            if k in emission_keys:
                continue
            if k in ("max_clusters_u", "max_clusters_v"):
                rest[k] = int(v)
            else:
                rest[k] = float(v)
        return cls(emission=EmissionParams(**em), **rest)


@dataclass
class LatentState:
    """Binary states z (S x D, 0=dry 1=wet) and cluster labels u (D) and v (S).

    Labels are 0-based: u(t) in 0..max_clusters_u-1, v(s) in 0..max_clusters_v-1.
    """

    z: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=np.int8)
        self.u = np.asarray(self.u, dtype=int)
        self.v = np.asarray(self.v, dtype=int)
        s, d = self.z.shape
        if self.u.shape != (d,) or self.v.shape != (s,):
            raise ValueError("label vectors do not match z dimensions")
        if not np.all((self.z == 0) | (self.z == 1)):
            raise ValueError("z must be binary")

    def copy(self) -> "LatentState":
        return LatentState(z=self.z.copy(), u=self.u.copy(), v=self.v.copy())

    def check_bounds(self, params: ModelParams) -> None:
        if self.u.min(initial=0) < 0 or self.u.max(initial=0) >= params.max_clusters_u:
            raise ValueError("u labels out of bounds")
        if self.v.min(initial=0) < 0 or self.v.max(initial=0) >= params.max_clusters_v:
            raise ValueError("v labels out of bounds")


@dataclass
class ClusterPrototypes:
    """Per-label wet-probability prototypes and aggregate means.

    ``pi[u]`` is an S-vector of wet probabilities for daily cluster u,
    ``tau[v]`` a D-vector for location cluster v, both clamped away from
    0 and 1 so their logs stay finite. ``mu_agg[u]`` is the mean daily
    aggregate of cluster u.
    """

    pi: np.ndarray
    tau: np.ndarray
    mu_agg: np.ndarray
    counts_u: np.ndarray
    counts_v: np.ndarray


def refresh_prototypes(state: LatentState, fld: RainfallField, params: ModelParams) -> ClusterPrototypes:
    """Empirical-Bayes update of the prototypes from the current state.

    Empty clusters fall back to 0.5 prototypes and the global aggregate mean.
    """
    z = state.z.astype(float)
    s_count, d_count = z.shape
    lu, lv = params.max_clusters_u, params.max_clusters_v

    counts_u = np.bincount(state.u, minlength=lu)
    sums = np.zeros((lu, s_count))
    np.add.at(sums, state.u, z.T)
    with np.errstate(invalid="ignore"):
        pi = np.where(counts_u[:, None] > 0, sums / np.maximum(counts_u[:, None], 1), 0.5)

    y = daily_aggregate(fld)
    agg_sums = np.bincount(state.u, weights=y, minlength=lu)
    mu_agg = np.where(counts_u > 0, agg_sums / np.maximum(counts_u, 1), y.mean())

    counts_v = np.bincount(state.v, minlength=lv)
    sums_t = np.zeros((lv, d_count))
    np.add.at(sums_t, state.v, z)
    tau = np.where(counts_v[:, None] > 0, sums_t / np.maximum(counts_v[:, None], 1), 0.5)

    pi = np.clip(pi, PROB_CLAMP, 1.0 - PROB_CLAMP)
    tau = np.clip(tau, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return ClusterPrototypes(pi=pi, tau=tau, mu_agg=mu_agg, counts_u=counts_u, counts_v=counts_v)


# ---------------------------------------------------------------------------
# joint density


def _log_occupancy_prior(counts: np.ndarray, concentration: float, n_classes: int) -> float:
    # Dirichlet-multinomial over label assignments, up to a constant;
    # infinite concentration means a uniform prior (constant, dropped).
    if math.isinf(concentration):
        return 0.0
    alpha = concentration / n_classes
    return float(np.sum(gammaln(alpha + counts)) - n_classes * gammaln(alpha))


def _check_dims(state: LatentState, fld: RainfallField, params: ModelParams, proto: ClusterPrototypes):
    if state.z.shape != fld.x.shape:
        raise ValueError("state z does not match field dimensions")
    state.check_bounds(params)
    if proto.pi.shape != (params.max_clusters_u, fld.n_locations):
        raise ValueError("pi prototypes have wrong shape")
    if proto.tau.shape != (params.max_clusters_v, fld.n_days):
        raise ValueError("tau prototypes have wrong shape")


def joint_log_density(
    state: LatentState,
    fld: RainfallField,
    params: ModelParams,
    proto: ClusterPrototypes,
    emission_ll: tuple[np.ndarray, np.ndarray] | None = None,
) -> float:
    """Unnormalized log density of (z, u, v) given the rainfall field.

    Each undirected lattice edge is counted once; temporal edges exist only
    between consecutive days of the same season. ``emission_ll`` may carry
    precomputed per-site (dry, wet) emission log densities.
    """
    _check_dims(state, fld, params, proto)
    z = state.z
    total = 0.0

    counts_u = np.bincount(state.u, minlength=params.max_clusters_u)
    counts_v = np.bincount(state.v, minlength=params.max_clusters_v)
    total += _log_occupancy_prior(counts_u, params.eta, params.max_clusters_u)
    total += _log_occupancy_prior(counts_v, params.zeta, params.max_clusters_v)

    if params.j_temporal > 0 and fld.n_days > 1:
        step = fld.calendar.same_season_step()
        eq = (z[:, 1:] == z[:, :-1]) & step[None, :]
        total += params.j_temporal * float(eq.sum())
    if params.j_spatial > 0:
        edges = fld.geometry.edges()
        if edges:
            a = np.fromiter((e[0] for e in edges), dtype=int)
            b = np.fromiter((e[1] for e in edges), dtype=int)
            total += params.j_spatial * float((z[a, :] == z[b, :]).sum())

    zf = z.astype(float)
    if params.lambda_ss > 0:
        p1 = proto.pi[state.u].T  # (S, D)
        total += params.lambda_ss * float(np.sum(zf * np.log(p1) + (1 - zf) * np.log1p(-p1)))
    if params.lambda_st > 0:
        q1 = proto.tau[state.v]  # (S, D)
        total += params.lambda_st * float(np.sum(zf * np.log(q1) + (1 - zf) * np.log1p(-q1)))

    lld, llw = emission_ll if emission_ll is not None else params.emission.log_density_pair(fld.x)
    total += float(np.sum(np.where(z == 1, llw, lld)))

    if not math.isinf(params.aggregate_sigma):
        y = daily_aggregate(fld)
        dev = y - proto.mu_agg[state.u]
        total += float(-np.sum(dev * dev) / (2.0 * params.aggregate_sigma**2))
    return total


# ---------------------------------------------------------------------------
# single-site conditionals (scalar)


def conditional_z(
    s: int,
    t: int,
    state: LatentState,
    fld: RainfallField,
    params: ModelParams,
    proto: ClusterPrototypes,
) -> float:
    """P(z(s, t) = 1 | everything else)."""
    z = state.z
    d_count = fld.n_days
    year = fld.calendar.year

    n_wet_tm = 0
    deg_tm = 0
    for tp in (t - 1, t + 1):
        if 0 <= tp < d_count and year[tp] == year[t]:
            deg_tm += 1
            n_wet_tm += int(z[s, tp])
    n_wet_sp = 0
    deg_sp = len(fld.geometry.neighbors[s])
    for sp in fld.geometry.neighbors[s]:
        n_wet_sp += int(z[sp, t])

    pi1 = float(proto.pi[state.u[t], s])
    tau1 = float(proto.tau[state.v[s], t])
    lld, llw = params.emission.log_density_pair(np.array([fld.x[s, t]]))
    w1 = (
        params.j_temporal * n_wet_tm
        + params.j_spatial * n_wet_sp
        + params.lambda_ss * math.log(pi1)
        + params.lambda_st * math.log(tau1)
        + float(llw[0])
    )
    w0 = (
        params.j_temporal * (deg_tm - n_wet_tm)
        + params.j_spatial * (deg_sp - n_wet_sp)
        + params.lambda_ss * math.log1p(-pi1)
        + params.lambda_st * math.log1p(-tau1)
        + float(lld[0])
    )
    return _binary_prob(w0, w1)


def _binary_prob(w0: float, w1: float) -> float:
    if w0 == -math.inf and w1 == -math.inf:
        return 0.5
    d = w0 - w1
    if d > 0:
        e = math.exp(-d)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(d))


def _label_weights(counts_excl: np.ndarray, concentration: float, n_classes: int) -> np.ndarray:
    if math.isinf(concentration):
        return np.zeros(n_classes)
    return np.log(counts_excl + concentration / n_classes)


def conditional_u(
    t: int,
    state: LatentState,
    fld: RainfallField,
    params: ModelParams,
    proto: ClusterPrototypes,
) -> np.ndarray:
    """Distribution over daily-cluster labels for day t given everything else."""
    lu = params.max_clusters_u
    counts = np.bincount(state.u, minlength=lu).astype(float)
    counts[state.u[t]] -= 1.0
    logw = _label_weights(counts, params.eta, lu)

    if params.lambda_ss > 0:
        zt = state.z[:, t].astype(float)
        logw = logw + params.lambda_ss * proto_log_bern(proto.pi, zt)
    if not math.isinf(params.aggregate_sigma):
        y_t = float(daily_aggregate(fld)[t])
        dev = y_t - proto.mu_agg
        logw = logw - dev * dev / (2.0 * params.aggregate_sigma**2)
    return _softmax(logw)


def conditional_v(
    s: int,
    state: LatentState,
    fld: RainfallField,
    params: ModelParams,
    proto: ClusterPrototypes,
) -> np.ndarray:
    """Distribution over location-cluster labels for location s."""
    lv = params.max_clusters_v
    counts = np.bincount(state.v, minlength=lv).astype(float)
    counts[state.v[s]] -= 1.0
    logw = _label_weights(counts, params.zeta, lv)
    if params.lambda_st > 0:
        zs = state.z[s, :].astype(float)
        logw = logw + params.lambda_st * proto_log_bern(proto.tau, zs)
    return _softmax(logw)


def proto_log_bern(proto_rows: np.ndarray, z_vec: np.ndarray) -> np.ndarray:
    """Per-label sum of Bernoulli log likelihoods of a binary vector."""
    return np.log(proto_rows) @ z_vec + np.log1p(-proto_rows) @ (1.0 - z_vec)


def _softmax(logw: np.ndarray) -> np.ndarray:
    m = logw.max()
    if m == -math.inf:
        return np.full(logw.shape, 1.0 / logw.size)
    w = np.exp(logw - m)
    return w / w.sum()


# ---------------------------------------------------------------------------
# vectorized conditionals (used by the sampler; agree with the scalar forms)


def wet_probability_matrix(
    state: LatentState,
    fld: RainfallField,
    params: ModelParams,
    proto: ClusterPrototypes,
    emission_ll: tuple[np.ndarray, np.ndarray] | None = None,
    adjacency: np.ndarray | None = None,
) -> np.ndarray:
    """P(z(s, t) = 1 | rest of current state) for every site at once."""
    z = state.z.astype(float)
    s_count, d_count = z.shape
    step = fld.calendar.same_season_step() if d_count > 1 else np.zeros(0, dtype=bool)
    left_ok = np.zeros(d_count)
    right_ok = np.zeros(d_count)
    left_ok[1:] = step
    right_ok[:-1] = step

    zl = np.zeros_like(z)
    zr = np.zeros_like(z)
    zl[:, 1:] = z[:, :-1]
    zr[:, :-1] = z[:, 1:]
    n_wet_tm = zl * left_ok + zr * right_ok
    deg_tm = left_ok + right_ok

    a = adjacency if adjacency is not None else fld.geometry.adjacency_matrix()
    n_wet_sp = a @ z
    deg_sp = a.sum(axis=1)[:, None]

    p1 = proto.pi[state.u].T
    q1 = proto.tau[state.v]
    lld, llw = emission_ll if emission_ll is not None else params.emission.log_density_pair(fld.x)

    w1 = (
        params.j_temporal * n_wet_tm
        + params.j_spatial * n_wet_sp
        + params.lambda_ss * np.log(p1)
        + params.lambda_st * np.log(q1)
        + llw
    )
    w0 = (
        params.j_temporal * (deg_tm - n_wet_tm)
        + params.j_spatial * (deg_sp - n_wet_sp)
        + params.lambda_ss * np.log1p(-p1)
        + params.lambda_st * np.log1p(-q1)
        + lld
    )
    both_void = np.isneginf(w0) & np.isneginf(w1)
    with np.errstate(over="ignore", invalid="ignore"):
        d = w0 - w1
        out = np.where(d > 0, np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))), 1.0 / (1.0 + np.exp(-np.abs(d))))
    return np.where(both_void, 0.5, out)


def label_probability_matrix_u(
    state: LatentState,
    fld: RainfallField,
    params: ModelParams,
    proto: ClusterPrototypes,
) -> np.ndarray:
    """Rows t of P(u(t) = . | rest), all days at once."""
    lu = params.max_clusters_u
    z = state.z.astype(float)
    counts = np.bincount(state.u, minlength=lu).astype(float)
    counts_excl = counts[None, :] - np.eye(lu)[state.u]
    if math.isinf(params.eta):
        logw = np.zeros((fld.n_days, lu))
    else:
        logw = np.log(counts_excl + params.eta / lu)
    if params.lambda_ss > 0:
        logw = logw + params.lambda_ss * (z.T @ np.log(proto.pi).T + (1 - z.T) @ np.log1p(-proto.pi).T)
    if not math.isinf(params.aggregate_sigma):
        y = daily_aggregate(fld)
        dev = y[:, None] - proto.mu_agg[None, :]
        logw = logw - dev * dev / (2.0 * params.aggregate_sigma**2)
    return _softmax_rows(logw)


def label_probability_matrix_v(
    state: LatentState,
    fld: RainfallField,
    params: ModelParams,
    proto: ClusterPrototypes,
) -> np.ndarray:
    """Rows s of P(v(s) = . | rest), all locations at once."""
    lv = params.max_clusters_v
    z = state.z.astype(float)
    counts = np.bincount(state.v, minlength=lv).astype(float)
    counts_excl = counts[None, :] - np.eye(lv)[state.v]
    if math.isinf(params.zeta):
        logw = np.zeros((fld.n_locations, lv))
    else:
        logw = np.log(counts_excl + params.zeta / lv)
    if params.lambda_st > 0:
        logw = logw + params.lambda_st * (z @ np.log(proto.tau).T + (1 - z) @ np.log1p(-proto.tau).T)
    return _softmax_rows(logw)


def _softmax_rows(logw: np.ndarray) -> np.ndarray:
    m = logw.max(axis=1, keepdims=True)
    w = np.exp(logw - m)
    return w / w.sum(axis=1, keepdims=True)
