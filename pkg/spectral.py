"""
Spectral clustering module for diarization
Threshold-pruned cosine affinity, normalized Laplacian, eigengap speaker
counting and k-means on the row-normalized spectral embedding
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from sklearn.cluster import KMeans

from errors import DiarizationError
from models import ClusterAssignment, EmbeddingVector

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-9
DEGREE_EPSILON = 1e-8


@dataclass(frozen=True, eq=False)
class AffinityMatrix:
    """
    Pruned cosine-similarity graph over frames

    Attributes:
        n: Number of frames
        a: Symmetric n x n matrix, unit diagonal, off-diagonal entries in [0, 1]
    """
    n: int
    a: np.ndarray

    def off_diagonal_degree(self) -> np.ndarray:
        return self.a.sum(axis=1) - np.diag(self.a)


def _stack(embeddings: Union[Sequence[EmbeddingVector], np.ndarray]) -> np.ndarray:
    if isinstance(embeddings, np.ndarray) and embeddings.ndim == 2:
        return embeddings.astype(np.float64, copy=False)
    vectors = [np.asarray(e, dtype=np.float64) for e in embeddings]
    if not vectors:
        raise DiarizationError("no_frames", "nothing to cluster")
    if len({v.shape for v in vectors}) > 1:
        raise DiarizationError("dim_mismatch", "embeddings have different dimensions")
    return np.vstack(vectors)


def build_affinity(embeddings: Union[Sequence[EmbeddingVector], np.ndarray], threshold: float) -> AffinityMatrix:
    """
    Cosine similarities with sub-threshold and negative entries zeroed

    Surviving similarities keep their value; the graph is sparsified, not binarized.
    """
    if not -1.0 <= threshold <= 1.0:
        raise DiarizationError("invalid_config", f"threshold {threshold} outside [-1, 1]")
    x = _stack(embeddings)
    gram = np.clip(x @ x.T, -1.0, 1.0)
    gram = 0.5 * (gram + gram.T)
    a = np.where((gram >= threshold) & (gram > 0.0), gram, 0.0)
    np.fill_diagonal(a, 1.0)
    return AffinityMatrix(n=a.shape[0], a=a)


def symmetric_eigendecomposition(m: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigenvalues in ascending order with orthonormal eigenvectors as columns

    Args:
        m: Symmetric matrix

    Returns:
        (eigenvalues, eigenvectors)
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DiarizationError("not_symmetric", f"matrix of shape {m.shape} is not square")
    if not np.allclose(m, m.T, rtol=0.0, atol=SYMMETRY_TOLERANCE):
        raise DiarizationError("not_symmetric", "matrix differs from its transpose")
    eigenvalues, eigenvectors = scipy.linalg.eigh(0.5 * (m + m.T))
    return eigenvalues, eigenvectors


def laplacian(aff: AffinityMatrix) -> np.ndarray:
    """Normalized symmetric Laplacian I - D^-1/2 A D^-1/2"""
    degree = aff.a.sum(axis=1)
    inv_sqrt = np.zeros_like(degree)
    connected = degree >= DEGREE_EPSILON
    inv_sqrt[connected] = 1.0 / np.sqrt(degree[connected])
    lap = np.eye(aff.n) - inv_sqrt[:, None] * aff.a * inv_sqrt[None, :]
    return 0.5 * (lap + lap.T)


def estimate_num_speakers(eigenvalues: Sequence[float], kmax: int = 10) -> int:
    """
    Eigengap heuristic

    k is the position of the largest gap between consecutive ascending
    eigenvalues among the first kmax + 1; ties go to the smaller k.
    With n eigenvalues, the gap after the j-th is taken for j = 1 .. min(kmax, n - 1),
    that is 1 <= j < min(kmax + 1, n), so k never exceeds kmax or reaches n.
    """
    values = np.asarray(eigenvalues, dtype=np.float64)
    if values.size < 2 or kmax < 2:
        return 1
    limit = min(kmax, values.size - 1)
    gaps = np.diff(values[:limit + 1])
    return int(np.argmax(gaps)) + 1


def kmeans(points: Union[Sequence[Sequence[float]], np.ndarray], k: int, seed: int,
           restarts: int = 10, max_iter: int = 300) -> ClusterAssignment:
    """
    Lloyd k-means with k-means++ seeding, best of several restarts

    Args:
        points: n x m array of points
        k: Number of clusters
        seed: Random state for seeding
        restarts: Independent runs; the lowest inertia wins
        max_iter: Lloyd iterations per run

    Returns:
        Cluster assignment renumbered by first appearance
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if k > n:
        raise DiarizationError("k_too_large", f"cannot form {k} clusters from {n} points")
    if k <= 1:
        return ClusterAssignment.from_labels([0] * n)

    # Duplicate points can leave fewer distinct clusters than requested
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = KMeans(n_clusters=k, init="k-means++", n_init=restarts, max_iter=max_iter,
                       random_state=seed, algorithm="lloyd")
        labels = model.fit_predict(x)
    return ClusterAssignment.from_labels(labels)


def spectral_embedding(aff: AffinityMatrix, kmax: int) -> Tuple[np.ndarray, np.ndarray, int]:
    """Eigenvalues, eigenvectors and the eigengap estimate for a connected affinity"""
    eigenvalues, eigenvectors = symmetric_eigendecomposition(laplacian(aff))
    return eigenvalues, eigenvectors, estimate_num_speakers(eigenvalues, kmax)


def _row_normalize(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms > 0, rows / safe, 0.0)


def spectral_cluster(embeddings: Union[Sequence[EmbeddingVector], np.ndarray], threshold: float,
                     kmax: int, seed: int, num_clusters: Optional[int] = None,
                     restarts: int = 10, max_iter: int = 300) -> ClusterAssignment:
    """
    Cluster frame embeddings

    Frames with no surviving edge are left out of the eigenproblem and come
    back as singleton clusters, as long as the total stays within kmax;
    any further isolated frames join the cluster of their most similar frame.
    The cap is max(kmax, num_clusters) when k is forced, so the result never
    has more than that many clusters.

    Args:
        embeddings: Unit-norm frame embeddings
        threshold: Affinity pruning threshold
        kmax: Largest speaker count
        seed: k-means random state
        num_clusters: Force k instead of estimating it
        restarts: k-means restarts
        max_iter: Lloyd iterations

    Returns:
        Cluster assignment renumbered by first appearance
    """
    x = _stack(embeddings)
    n = x.shape[0]
    aff = build_affinity(x, threshold)
    isolated = aff.off_diagonal_degree() < DEGREE_EPSILON
    core_index = np.flatnonzero(~isolated)
    isolated_index = np.flatnonzero(isolated)

    labels = np.full(n, -1, dtype=int)
    k = 0
    if core_index.size == 1:
        labels[core_index] = 0
        k = 1
    elif core_index.size > 1:
        sub = AffinityMatrix(n=core_index.size, a=aff.a[np.ix_(core_index, core_index)])
        eigenvalues, eigenvectors, estimate = spectral_embedding(sub, kmax)
        k = estimate if num_clusters is None else num_clusters
        k = max(1, min(k, core_index.size))
        rows = _row_normalize(eigenvectors[:, :k])
        assignment = kmeans(rows, k, seed, restarts=restarts, max_iter=max_iter)
        labels[core_index] = assignment.labels
        k = assignment.k
        logger.debug(f"Spectral clustering: {core_index.size} frames, k={k}, "
                     f"leading eigenvalues {np.round(eigenvalues[:min(kmax + 1, eigenvalues.size)], 4).tolist()}")

    # Isolated frames: singletons while the cluster budget lasts
    limit = kmax if num_clusters is None else max(kmax, num_clusters)
    similarity = x @ x.T
    for i in isolated_index:
        if k < limit or k == 0:
            labels[i] = k
            k += 1
        else:
            candidates = np.flatnonzero(labels >= 0)
            best = candidates[np.argmax(similarity[i, candidates])]
            labels[i] = labels[best]
    if isolated_index.size:
        logger.debug(f"{isolated_index.size} isolated frames after pruning at {threshold}")

    return ClusterAssignment.from_labels(labels.tolist())
