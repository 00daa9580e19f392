"""Baseline clusterers and the evaluation metrics used to compare methods.

K-means (k-means++ seeding, Lloyd iterations) and two spectral variants
(Gaussian affinity on Euclidean or Hamming distances, symmetric normalized
Laplacian) cluster the same day/location items as the lattice model.
Evaluation reports intra-cluster spread of totals, distances to the
cluster's canonical (discretized) series, and self-transition counts for
daily clusterings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .canonical_patterns import CanonicalPatternSet, hamming_similarity
from .gibbs_sampler import self_transition_count
from .grid_data import CalendarIndex, RainfallField, daily_aggregate

METHODS = ("kmeans", "spect_euclid", "spect_hamming", "mrf")


@dataclass
class ClusteringResult:
    labels: np.ndarray
    k: int
    objective: float
    method: str
    objective_trace: list[float]


@dataclass
class EvalReport:
    std_yy: float          # mean intra-cluster std of per-item totals
    l2_theta: float        # mean l2 distance of items to their canonical series
    hamm_theta_d: float    # mean Hamming distance of binary items to the CDS/CDP
    self_transitions: int | None = None


@dataclass
class HammingSimilarityReport:
    per_day: np.ndarray
    per_year: dict[int, float]
    correlation_with_y: float


# ---------------------------------------------------------------------------
# clusterers


def _kpp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            probs = d2 / total
            centers[c] = x[rng.choice(n, p=probs)]
        else:
            centers[c] = x[rng.integers(n)]
        d2 = np.minimum(d2, ((x - centers[c]) ** 2).sum(axis=1))
    return centers


def kmeans(vectors, k: int, seed: int = 0, max_iter: int = 300) -> ClusteringResult:
    """Lloyd's algorithm with k-means++ seeding, deterministic given the seed.

    Runs until the assignment reaches a fixpoint or ``max_iter``. Empty
    clusters are reseeded to the point currently farthest from its center
    (and the center jumps there), which keeps the recorded objective
    non-increasing across iterations.
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2:
        x = x.reshape(len(x), -1)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n:
        raise ValueError("k exceeds the number of vectors")
    rng = np.random.default_rng(seed)
    centers = _kpp_init(x, k, rng)

    labels = np.full(n, -1)
    trace: list[float] = []
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        for c in range(k):
            if not np.any(new_labels == c):
                far = int(d2[np.arange(n), new_labels].argmax())
                new_labels[far] = c
                centers[c] = x[far]
                d2[far, :] = ((x[far] - centers) ** 2).sum(axis=1)
        for c in range(k):
            members = new_labels == c
            if members.any():
                centers[c] = x[members].mean(axis=0)
        obj = float(((x - centers[new_labels]) ** 2).sum())
        trace.append(obj)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return ClusteringResult(labels=labels, k=k, objective=trace[-1], method="kmeans", objective_trace=trace)


def _pairwise_sq_euclid(x: np.ndarray) -> np.ndarray:
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    return np.maximum(d2, 0.0)


def spectral(
    items,
    k: int,
    affinity: str = "euclid_gaussian",
    bandwidth: float | None = None,
    seed: int = 0,
) -> ClusteringResult:
    """Normalized spectral clustering with a Gaussian affinity.

    ``euclid_gaussian`` works on the raw real-valued items;
    ``hamming_gaussian`` first discretizes each item against its own mean
    and uses Hamming distances. The default bandwidth is the median
    positive pairwise distance. Embedding rows (bottom-k eigenvectors of
    the symmetric normalized Laplacian) are length-normalized and clustered
    with k-means.
    """
    x = np.asarray(items, dtype=float)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError("k must lie in 1..n")
    if affinity == "euclid_gaussian":
        d2 = _pairwise_sq_euclid(x)
        method = "spect_euclid"
    elif affinity == "hamming_gaussian":
        xb = (x > x.mean(axis=1, keepdims=True)).astype(float)
        d = (xb[:, None, :] != xb[None, :, :]).sum(axis=2).astype(float)
        d2 = d * d
        method = "spect_hamming"
    else:
        raise ValueError("affinity must be 'euclid_gaussian' or 'hamming_gaussian'")

    if bandwidth is None:
        off = np.sqrt(d2[np.triu_indices(n, k=1)]) if n > 1 else np.zeros(0)
        pos = off[off > 0]
        bandwidth = float(np.median(pos)) if pos.size else 1.0
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")

    a = np.exp(-d2 / (2.0 * bandwidth**2))
    deg = a.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    lap = np.eye(n) - inv_sqrt[:, None] * a * inv_sqrt[None, :]
    _, vecs = np.linalg.eigh(lap)
    emb = vecs[:, :k]
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = np.where(norms > 0, emb / np.where(norms > 0, norms, 1.0), emb)
    km = kmeans(emb, k, seed=seed)
    return ClusteringResult(
        labels=km.labels, k=k, objective=km.objective, method=method, objective_trace=km.objective_trace
    )


# ---------------------------------------------------------------------------
# evaluation metrics


def _canonical_series(items: np.ndarray, binary: np.ndarray, labels: np.ndarray):
    """(per-cluster mean series, per-cluster majority series, cluster list)."""
    present = np.unique(labels)
    theta = np.stack([items[labels == lab].mean(axis=0) for lab in present])
    theta_d = np.stack([(binary[labels == lab].mean(axis=0) >= 0.5).astype(np.int8) for lab in present])
    return theta, theta_d, present


def evaluate_temporal_clustering(fld: RainfallField, labels: np.ndarray, z: np.ndarray) -> EvalReport:
    """Intra-cluster metrics of a location clustering against recomputed series."""
    labels = np.asarray(labels)
    if labels.size != fld.n_locations:
        raise ValueError("labels must cover locations")
    theta, theta_d, present = _canonical_series(fld.x, np.asarray(z), labels)
    row_of = {int(lab): i for i, lab in enumerate(present)}
    rows = np.array([row_of[int(lab)] for lab in labels])

    totals = fld.x.sum(axis=1)
    std_yy = float(np.mean([totals[labels == lab].std() for lab in present]))
    l2 = float(np.mean(np.linalg.norm(fld.x - theta[rows], axis=1)))
    hamm = float(np.mean((np.asarray(z) != theta_d[rows]).sum(axis=1)))
    return EvalReport(std_yy=std_yy, l2_theta=l2, hamm_theta_d=hamm)


def evaluate_daily_clustering(
    fld: RainfallField, labels: np.ndarray, z: np.ndarray, patterns: CanonicalPatternSet
) -> EvalReport:
    """Mirror metrics along the day axis, plus the self-transition count."""
    labels = np.asarray(labels)
    if labels.size != fld.n_days:
        raise ValueError("labels must cover days")
    rows = np.array([patterns.index_of(int(lab)) for lab in labels])
    y = daily_aggregate(fld)
    std_yy = float(np.mean([y[labels == lab].std() for lab in np.unique(labels)]))
    l2 = float(np.mean(np.linalg.norm(fld.x.T - patterns.crp[rows], axis=1)))
    hamm = float(np.mean((np.asarray(z).T != patterns.cdp[rows]).sum(axis=1)))
    st = self_transition_count(labels, fld.calendar)
    return EvalReport(std_yy=std_yy, l2_theta=l2, hamm_theta_d=hamm, self_transitions=st)


def hamming_similarity_series(
    z: np.ndarray,
    labels: np.ndarray,
    patterns: CanonicalPatternSet,
    calendar: CalendarIndex,
    y: np.ndarray | None = None,
) -> HammingSimilarityReport:
    """Per-day similarity between the state field and each day's assigned pattern.

    Yearly means summarize robustness; when an aggregate series is given,
    the report carries its correlation with the daily similarity (NaN when
    either series is constant).
    """
    z = np.asarray(z)
    labels = np.asarray(labels)
    per_day = np.empty(labels.size)
    for t in range(labels.size):
        row = patterns.index_of(int(labels[t]))
        per_day[t] = hamming_similarity(z[:, t], patterns.cdp[row])
    per_year = {
        int(yr): float(per_day[calendar.year == yr].mean()) for yr in calendar.years
    }
    corr = float("nan")
    if y is not None:
        y = np.asarray(y, dtype=float)
        if per_day.std() > 0 and y.std() > 0:
            corr = float(np.corrcoef(per_day, y)[0, 1])
    return HammingSimilarityReport(per_day=per_day, per_year=per_year, correlation_with_y=corr)


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected agreement between two labelings of the same items."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("labelings must have equal length")
    n = a.size
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def comb2(m):
        return m * (m - 1) / 2.0

    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_a * sum_b / total if total > 0 else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))
