"""K-means clustering of day signatures and Pearson-based similar-day selection."""

import json
import logging
from dataclasses import dataclass

import numpy as np

from .preprocess import apply_norm, fit_norm

logger = logging.getLogger(__name__)


class ClusteringError(ValueError):
    pass


class ZeroVarianceError(ValueError):
    pass


@dataclass(frozen=True)
class KMeansModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    iterations_run: int
    inertia: float
    seed: int
    inertia_history: tuple = ()
    restart: int = 0

    def members(self, cluster):
        return np.flatnonzero(self.assignments == cluster)


def _sq_dists(points, centroids):
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _lloyd(points, k, max_iter, tol, rng):
    n = points.shape[0]
    centroids = points[rng.choice(n, size=k, replace=False)].copy()
    d = _sq_dists(points, centroids)
    labels = d.argmin(axis=1)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        new = np.empty_like(centroids)
        dist_to_own = d[np.arange(n), labels]
        for c in range(k):
            mask = labels == c
            if mask.any():
                new[c] = points[mask].mean(axis=0)
            else:
                # reseed an empty cluster at the point farthest from its centroid
                far = int(dist_to_own.argmax())
                new[c] = points[far]
                dist_to_own[far] = -1.0
        shift = np.sqrt(((new - centroids) ** 2).sum(axis=1)).max()
        centroids = new
        d = _sq_dists(points, centroids)
        new_labels = d.argmin(axis=1)
        history.append(float(d[np.arange(n), new_labels].sum()))
        unchanged = np.array_equal(new_labels, labels)
        labels = new_labels
        if unchanged or shift <= tol:
            break
    # centroid identity at the returned partition
    for c in range(k):
        mask = labels == c
        if mask.any():
            centroids[c] = points[mask].mean(axis=0)
    d = _sq_dists(points, centroids)
    inertia = float(d[np.arange(n), labels].sum())
    return centroids, labels, it, inertia, history


def kmeans(points, k, max_iter=300, tol=0.0, restarts=10, seed=0):
    """Lloyd's K-means from random data points, best of ``restarts`` runs.

    Restart ``r`` draws its initial centres with a generator spawned from
    ``seed`` at index ``r``; the lowest-inertia run wins, ties going to the
    lowest restart index. Iteration stops when assignments stop changing or
    the largest centroid move is at most ``tol``.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if P.shape[0] == 0:
        raise ClusteringError("kmeans: no points to cluster")
    if not 1 <= k <= P.shape[0]:
        raise ClusteringError(f"kmeans: need 1 <= k <= number of points ({P.shape[0]}), got k={k}")
    if restarts < 1:
        raise ClusteringError("kmeans: restarts must be >= 1")

    best = None
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
        cents, labels, its, inertia, hist = _lloyd(P, k, max_iter, tol, np.random.default_rng(child))
        if best is None or inertia < best.inertia:
            best = KMeansModel(k, cents, labels, its, inertia, seed, tuple(hist), r)
    return best


def pearson(x, y):
    """Pearson correlation coefficient of two equal-length vectors."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape or x.size < 2:
        raise ValueError("pearson needs two vectors of equal length >= 2")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(np.mean(xc * xc))
    sy = np.sqrt(np.mean(yc * yc))
    if sx == 0 or sy == 0:
        raise ZeroVarianceError("pearson is undefined for a constant vector")
    return float(np.clip(np.mean(xc * yc) / (sx * sy), -1.0, 1.0))


@dataclass(frozen=True)
class SimilarDaySelection:
    cluster1_id: int
    cluster2_id: int
    pearson1: float
    pearson2: float
    training_days: tuple
    fallback_used: bool
    cluster1_members: tuple = ()
    cluster2_members: tuple = ()

    def to_dict(self):
        return {
            "cluster1_id": self.cluster1_id,
            "cluster2_id": self.cluster2_id,
            "pearson1": self.pearson1,
            "pearson2": self.pearson2,
            "cluster1_members": list(self.cluster1_members),
            "cluster2_members": list(self.cluster2_members),
            "training_days": list(self.training_days),
            "fallback_used": self.fallback_used,
        }

    def dump(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def _safe_pearson(a, b):
    try:
        return pearson(a, b)
    except ZeroVarianceError:
        return float("nan")


def _pick_cluster(model, ref):
    """Most Pearson-similar non-empty cluster; Euclidean distance decides when undefined."""
    best, best_p = None, None
    nearest, nearest_d = None, None
    for c in range(model.k):
        if not np.any(model.assignments == c):
            continue
        p = _safe_pearson(ref, model.centroids[c])
        if not np.isnan(p) and (best_p is None or p > best_p):
            best, best_p = c, p
        dist = float(np.sum((model.centroids[c] - ref) ** 2))
        if nearest_d is None or dist < nearest_d:
            nearest, nearest_d = c, dist
    if best is None:
        return nearest, float("nan")
    return best, best_p


def select_training_days(days, forecast_ref, k=3, *, forecast_s1=None, min_days=5,
                         restarts=10, max_iter=300, tol=0.0, seed=0):
    """Pick training days similar to the forecast day.

    ``forecast_ref`` is the day before the forecast day; its power signature
    stands in for the unknown one. The meteorological signature comes from
    ``forecast_s1`` when forecast weather is available, else from
    ``forecast_ref``. Both signature sets are min-max scaled over ``days``,
    clustered independently, and the cluster whose centroid correlates best
    with the reference is chosen in each; the training days are the
    intersection. If that holds fewer than ``min_days`` days, the union is
    ranked by mean per-day correlation and its top ``min_days`` are returned.
    """
    if len(days) < k:
        raise ClusteringError(f"similar-day clustering needs at least k={k} historical days, got {len(days)}")
    s1 = np.array([d.s1.as_array() for d in days])
    s2 = np.array([d.s2.as_array() for d in days])
    ref1 = (forecast_s1 if forecast_s1 is not None else forecast_ref.s1).as_array()
    ref2 = forecast_ref.s2.as_array()

    norm1, norm2 = fit_norm(s1), fit_norm(s2)
    s1n, s2n = apply_norm(norm1, s1), apply_norm(norm2, s2)
    r1n, r2n = apply_norm(norm1, ref1), apply_norm(norm2, ref2)

    seq1, seq2 = np.random.SeedSequence(seed).spawn(2)
    m1 = kmeans(s1n, k, max_iter, tol, restarts, int(seq1.generate_state(1)[0]))
    m2 = kmeans(s2n, k, max_iter, tol, restarts, int(seq2.generate_state(1)[0]))
    c1, p1 = _pick_cluster(m1, r1n)
    c2, p2 = _pick_cluster(m2, r2n)
    idx = np.array([d.day_index for d in days])
    mem1 = idx[m1.assignments == c1]
    mem2 = idx[m2.assignments == c2]
    chosen = np.intersect1d(mem1, mem2)
    fallback = False
    if len(chosen) < min_days:
        fallback = True
        union = np.union1d(mem1, mem2)
        pos = {d: i for i, d in enumerate(idx)}
        score = []
        for d in union:
            i = pos[d]
            vals = [_safe_pearson(r1n, s1n[i]), _safe_pearson(r2n, s2n[i])]
            vals = [v for v in vals if not np.isnan(v)]
            score.append(np.mean(vals) if vals else -np.inf)
        order = sorted(range(len(union)), key=lambda j: (-score[j], union[j]))
        chosen = np.sort(union[order[:min_days]])
        logger.info("similar days: intersection below %d days, using ranked union", min_days)
    return SimilarDaySelection(
        int(c1), int(c2), p1, p2,
        tuple(int(d) for d in chosen), fallback,
        tuple(int(d) for d in mem1), tuple(int(d) for d in mem2),
    )
