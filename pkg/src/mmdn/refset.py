"""Reference-set construction from a warm-start approximation set.

Pipeline: split the set into connected components (DBSCAN), densify every
component (arc-length interpolation for two objectives, area-uniform sampling
of a Delaunay triangulation for three), reduce the filled set back to mu points
with k-means, and shift the result towards the utopian region.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import Delaunay, cKDTree
from sklearn.cluster import DBSCAN

from .linalg import QR_ATOL, ContractError, qr

log = logging.getLogger(__name__)


class DegenerateGeometryError(ValueError):
    pass


@dataclass
class ReferenceSetConfig:
    target_size: int
    delta: float = 0.08
    dbscan_eps: Optional[float] = None  # None: 3 x median nearest-neighbour distance
    dbscan_min_pts: int = 3
    fill_multiplier: int = 10
    kmeans_iters: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.target_size < 2:
            raise ContractError("reference set needs target_size >= 2")
        if self.delta < 0:
            raise ContractError("shift magnitude delta must be nonnegative")
        if self.dbscan_eps is not None and self.dbscan_eps <= 0:
            raise ContractError("dbscan_eps must be positive")


# ---------------------------------------------------------------------------
# components


def auto_eps(Y) -> float:
    Y = np.asarray(Y, dtype=float)
    d, _ = cKDTree(Y).query(Y, k=2)
    med = float(np.median(d[:, 1]))
    if med == 0.0:
        # many duplicates: fall back to the median over distinct neighbours
        pos = d[:, 1][d[:, 1] > 0]
        med = float(np.median(pos)) if len(pos) else 0.0
    return 3.0 * med


def detect_components(Y, cfg: Optional[ReferenceSetConfig] = None) -> list:
    """Index lists of the connected pieces of Y, noise attached to the nearest piece."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    min_pts = 3 if cfg is None else cfg.dbscan_min_pts
    if len(Y) < min_pts:
        raise ContractError(f"need at least {min_pts} points for component detection")
    eps = auto_eps(Y) if cfg is None or cfg.dbscan_eps is None else cfg.dbscan_eps
    if eps == 0.0:
        return [np.arange(len(Y))]
    labels = DBSCAN(eps=eps, min_samples=min_pts).fit(Y).labels_
    clustered = np.flatnonzero(labels >= 0)
    if len(clustered) == 0:
        return [np.arange(len(Y))]
    noise = np.flatnonzero(labels < 0)
    if len(noise):
        _, nearest = cKDTree(Y[clustered]).query(Y[noise])
        labels = labels.copy()
        labels[noise] = labels[clustered[nearest]]
    return [np.flatnonzero(labels == c) for c in np.unique(labels)]


# ---------------------------------------------------------------------------
# filling


def _chain_fill(points, count: int) -> np.ndarray:
    P = points[np.argsort(points[:, 0], kind="stable")]
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    s = np.r_[0.0, np.cumsum(seg)]
    if count == 1 or s[-1] == 0.0:
        return np.repeat(P[:1], count, axis=0)
    targets = np.linspace(0.0, s[-1], count)
    idx = np.clip(np.searchsorted(s, targets, side="right") - 1, 0, len(seg) - 1)
    w = np.where(seg[idx] > 0, (targets - s[idx]) / np.where(seg[idx] > 0, seg[idx], 1.0), 0.0)
    return P[idx] + w[:, None] * (P[idx + 1] - P[idx])


def _triangulate(points):
    """Delaunay triangles of the points projected onto their best-fit plane, or None."""
    c = points - points.mean(axis=0)
    _, s, Vt = np.linalg.svd(c, full_matrices=False)
    if len(s) < 2 or s[1] <= 1e-10 * max(s[0], 1e-300):
        return None
    try:
        tri = Delaunay(c @ Vt[:2].T)
    except Exception:  # qhull refuses (near-)collinear input
        return None
    return tri.simplices


def _triangle_areas(points, simplices):
    A, B, C = (points[simplices[:, i]] for i in range(3))
    return 0.5 * np.linalg.norm(np.cross(B - A, C - A), axis=1)


def fill_component(points, count: int, k: Optional[int] = None, seed=0) -> np.ndarray:
    """Densify one component to ``count`` points.

    Two objectives: points spaced uniformly by arc length along the chain of
    f1-sorted points (end points included).  Three or more: uniform random
    samples over a Delaunay triangulation, triangles picked proportionally to
    their area.  Collinear input falls back to the chain method.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    k = P.shape[1] if k is None else k
    if count < 1:
        return np.zeros((0, k))
    if len(P) < 2:
        return np.repeat(P[:1], count, axis=0)
    if k == 2:
        return _chain_fill(P, count)
    simplices = _triangulate(P) if len(P) >= 3 else None
    if simplices is None:
        return _chain_fill(P, count)
    areas = _triangle_areas(P, simplices)
    if areas.sum() <= 0:
        return _chain_fill(P, count)
    rng = np.random.default_rng(seed)
    which = rng.choice(len(simplices), size=count, p=areas / areas.sum())
    u = rng.random((count, 2))
    r1 = np.sqrt(u[:, 0])
    a, b, c = 1.0 - r1, r1 * (1.0 - u[:, 1]), r1 * u[:, 1]
    T = simplices[which]
    return a[:, None] * P[T[:, 0]] + b[:, None] * P[T[:, 1]] + c[:, None] * P[T[:, 2]]


def _component_sizes(Y, components) -> np.ndarray:
    if Y.shape[1] == 2:
        return np.array([len(c) for c in components], dtype=float)
    out = []
    for c in components:
        simplices = _triangulate(Y[c]) if len(c) >= 3 else None
        out.append(_triangle_areas(Y[c], simplices).sum() if simplices is not None else 0.0)
    out = np.array(out)
    if out.sum() <= 0:
        return np.array([len(c) for c in components], dtype=float)
    return out


def _split(total: int, weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    raw = total * w / w.sum()
    out = np.floor(raw).astype(int)
    order = np.argsort(-(raw - out), kind="stable")
    out[order[: total - out.sum()]] += 1
    return out


# ---------------------------------------------------------------------------
# reduction


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: list = field(default_factory=list)  # after each Lloyd iteration
    degenerate: bool = False


def _sq_dist(A, B):
    return np.maximum(np.sum(A * A, 1)[:, None] + np.sum(B * B, 1)[None, :] - 2 * A @ B.T, 0.0)


def reduce_kmeans(points, mu: int, iters: int = 50, seed=0) -> KMeansResult:
    """k-means++ seeding followed by ``iters`` Lloyd iterations."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if len(P) < mu:
        raise ContractError(f"cannot reduce {len(P)} points to {mu} clusters")
    distinct = np.unique(P, axis=0)
    if len(distinct) < mu:
        warnings.warn(f"only {len(distinct)} distinct points for {mu} clusters; padding with duplicates")
        pad = distinct[np.arange(mu) % len(distinct)]
        return KMeansResult(pad, np.argmin(_sq_dist(P, pad), axis=1), [], True)
    rng = np.random.default_rng(seed)
    C = np.empty((mu, P.shape[1]))
    C[0] = P[rng.integers(len(P))]
    d2 = _sq_dist(P, C[:1])[:, 0]
    for j in range(1, mu):
        tot = d2.sum()
        idx = rng.choice(len(P), p=d2 / tot) if tot > 0 else rng.integers(len(P))
        C[j] = P[idx]
        d2 = np.minimum(d2, _sq_dist(P, C[j:j + 1])[:, 0])
    inertia = []
    labels = np.argmin(_sq_dist(P, C), axis=1)
    for _ in range(iters):
        for j in range(mu):
            members = labels == j
            if members.any():
                C[j] = P[members].mean(axis=0)
        D = _sq_dist(P, C)
        labels = np.argmin(D, axis=1)
        inertia.append(float(D[np.arange(len(P)), labels].sum()))
        if len(inertia) > 1 and inertia[-1] == inertia[-2]:
            break
    return KMeansResult(C, labels, inertia, False)


# ---------------------------------------------------------------------------
# shift


def extreme_points(Y, rtol: float = 1e-12) -> np.ndarray:
    """Per-objective minimisers.

    Ties in objective i (whole front edges attain the minimum on the DTLZ
    fronts) are broken by the smallest f_{i+1}, then f_{i+2}, ..., which picks
    the corners of simplex-like fronts.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    k = Y.shape[1]
    scale = max(float(np.max(np.abs(Y))), 1.0)
    out = np.empty((k, k))
    for i in range(k):
        tied = np.flatnonzero(Y[:, i] <= Y[:, i].min() + rtol * scale)
        keys = [Y[tied, (i + j) % k] for j in range(k - 1, 0, -1)]  # lexsort: last key is primary
        out[i] = Y[tied[np.lexsort(keys)[0]]] if keys else Y[tied[0]]
    return out


def shift_direction(Y) -> np.ndarray:
    """Unit normal of the hyperplane through the per-objective minimisers, pointing to utopia.

    Raises:
        DegenerateGeometryError: if the extreme points are affinely dependent.
    """
    ext = extreme_points(Y)
    k = ext.shape[1]
    M = (ext[1:] - ext[0]).T  # k x (k-1)
    scale = max(float(np.max(np.abs(M))) if M.size else 0.0, 1.0)
    Q, Rm = qr(M)
    if M.size == 0 or np.min(np.abs(np.diag(Rm))) <= QR_ATOL * scale:
        raise DegenerateGeometryError("extreme points are affinely dependent")
    q = Q[:, k - 1]
    sign = np.sign(q[0]) if q[0] != 0 else 1.0
    return -sign * q / np.linalg.norm(q)


def fallback_direction(k: int) -> np.ndarray:
    return -np.ones(k) / np.sqrt(k)


# ---------------------------------------------------------------------------


@dataclass
class ReferenceSetResult:
    R: np.ndarray
    reduced: np.ndarray
    filled: np.ndarray
    components: list
    eta: np.ndarray
    degenerate_shift: bool
    degenerate_reduction: bool


def build_reference_set(Y0, cfg: ReferenceSetConfig) -> ReferenceSetResult:
    Y0 = np.atleast_2d(np.asarray(Y0, dtype=float))
    if len(Y0) < 2:
        raise ContractError("need at least two points to build a reference set")
    mu, k = cfg.target_size, Y0.shape[1]
    if len(Y0) >= cfg.dbscan_min_pts:
        components = detect_components(Y0, cfg)
    else:
        components = [np.arange(len(Y0))]
    total = cfg.fill_multiplier * mu
    counts = _split(total, _component_sizes(Y0, components))
    rng = np.random.default_rng(cfg.seed)
    seeds = rng.integers(0, 2**63 - 1, size=len(components) + 1)
    parts = [fill_component(Y0[c], n_c, k, seed=int(s)) for c, n_c, s in zip(components, counts, seeds) if n_c > 0]
    filled = np.vstack(parts)
    km = reduce_kmeans(filled, mu, cfg.kmeans_iters, seed=int(seeds[-1]))
    try:
        eta = shift_direction(Y0)
        degenerate = False
    except DegenerateGeometryError:
        log.info("degenerate extreme points; shifting along -(1,...,1)")
        eta = fallback_direction(k)
        degenerate = True
    R = km.centroids + cfg.delta * eta if cfg.delta > 0 else km.centroids.copy()
    return ReferenceSetResult(R, km.centroids, filled, components, eta, degenerate, km.degenerate)


def generate_reference_set(Y0, cfg: ReferenceSetConfig) -> np.ndarray:
    return build_reference_set(Y0, cfg).R
