"""
Tests for affinity construction, the Laplacian eigenproblem, eigengap
speaker counting and spectral clustering
"""

import itertools

import numpy as np
import pytest

from conftest import noisy_cluster
from core import unit_normalize
from errors import DiarizationError
from spectral import (
    build_affinity, estimate_num_speakers, kmeans, laplacian, spectral_cluster, symmetric_eigendecomposition
)

SQRT_HALF = np.sqrt(0.5)


def separated_centroids(k, d, max_cos, rng):
    centroids = []
    while len(centroids) < k:
        candidate = unit_normalize(rng.standard_normal(d))
        if all(candidate @ c <= max_cos for c in centroids):
            centroids.append(candidate)
    return centroids


def components(adjacency):
    """Connected components by union-find over non-zero entries"""
    n = adjacency.shape[0]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in zip(*np.nonzero(adjacency)):
        parent[find(i)] = find(j)
    return len({find(i) for i in range(n)})


def same_partition(labels, truth):
    pairs = set(zip(labels, truth))
    return len(pairs) == len(set(labels)) == len(set(truth))


def cubic_eigenvalues(a):
    """Closed-form eigenvalues of a symmetric 3x3 matrix, ascending"""
    p1 = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
    q = np.trace(a) / 3.0
    p2 = sum((a[i, i] - q) ** 2 for i in range(3)) + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    b = (a - q * np.eye(3)) / p
    r = np.clip(np.linalg.det(b) / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    largest = q + 2.0 * p * np.cos(phi)
    smallest = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    return sorted([smallest, 3.0 * q - largest - smallest, largest])


class TestAffinity:
    def test_keeps_similarities_above_threshold(self):
        x = [np.array([1.0, 0.0]), np.array([SQRT_HALF, SQRT_HALF]), np.array([0.0, 1.0])]
        aff = build_affinity(x, 0.5)
        expected = np.array([[1.0, SQRT_HALF, 0.0], [SQRT_HALF, 1.0, SQRT_HALF], [0.0, SQRT_HALF, 1.0]])
        assert np.allclose(aff.a, expected)
        assert aff.n == 3

    def test_high_threshold_leaves_identity(self):
        x = [np.array([1.0, 0.0]), np.array([SQRT_HALF, SQRT_HALF]), np.array([0.0, 1.0])]
        assert np.array_equal(build_affinity(x, 0.8).a, np.eye(3))

    def test_negative_similarities_are_dropped(self):
        aff = build_affinity([np.array([1.0, 0.0]), np.array([-1.0, 0.0])], -1.0)
        assert np.array_equal(aff.a, np.eye(2))

    def test_threshold_out_of_range(self):
        with pytest.raises(DiarizationError) as info:
            build_affinity([np.array([1.0, 0.0])], 1.5)
        assert info.value.code == "invalid_config"

    def test_dimension_mismatch(self):
        with pytest.raises(DiarizationError) as info:
            build_affinity([np.array([1.0, 0.0]), np.array([1.0, 0.0, 0.0])], 0.1)
        assert info.value.code == "dim_mismatch"

    def test_raising_threshold_only_removes_edges(self):
        rng = np.random.default_rng(0)
        x = np.vstack([unit_normalize(v) for v in rng.standard_normal((30, 6))])
        previous = build_affinity(x, 0.0).a
        for threshold in (0.1, 0.3, 0.5, 0.7):
            current = build_affinity(x, threshold).a
            assert np.array_equal(current, current.T)
            kept = current > 0
            assert np.all(previous[kept] == current[kept])
            assert kept.sum() <= (previous > 0).sum()
            previous = current


class TestEigendecomposition:
    def test_two_by_two(self):
        values, vectors = symmetric_eigendecomposition(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(values, [1.0, 3.0])
        assert np.allclose(np.abs(vectors[:, 0]), [SQRT_HALF, SQRT_HALF])

    def test_matches_closed_form_for_three_by_three(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            m = rng.standard_normal((3, 3))
            m = m + m.T
            values, _ = symmetric_eigendecomposition(m)
            assert np.allclose(values, cubic_eigenvalues(m), atol=1e-9)

    def test_residuals_and_orthonormality(self):
        rng = np.random.default_rng(2)
        m = rng.standard_normal((20, 20))
        m = m + m.T
        values, vectors = symmetric_eigendecomposition(m)
        assert np.all(np.diff(values) >= 0)
        assert np.allclose(m @ vectors, vectors * values, atol=1e-9)
        assert np.allclose(vectors.T @ vectors, np.eye(20), atol=1e-9)

    def test_residuals_up_to_fifty_by_fifty(self):
        rng = np.random.default_rng(22)
        for _ in range(100):
            n = int(rng.integers(2, 51))
            m = rng.standard_normal((n, n))
            m = m + m.T
            values, vectors = symmetric_eigendecomposition(m)
            scale = max(1.0, float(np.abs(values).max()))
            assert np.abs(m @ vectors - vectors * values).max() <= 1e-9 * scale
            assert np.allclose(vectors.T @ vectors, np.eye(n), atol=1e-9)

    def test_rejects_asymmetric_matrix(self):
        with pytest.raises(DiarizationError) as info:
            symmetric_eigendecomposition(np.array([[1.0, 2.0], [0.0, 1.0]]))
        assert info.value.code == "not_symmetric"

    def test_rejects_non_square_matrix(self):
        with pytest.raises(DiarizationError):
            symmetric_eigendecomposition(np.ones((2, 3)))


class TestLaplacian:
    def test_zero_eigenvalues_count_components(self):
        rng = np.random.default_rng(3)
        for trial in range(10):
            centers = [unit_normalize(c) for c in rng.standard_normal((1 + trial % 4, 32))]
            points = []
            for center in centers:
                points.extend(noisy_cluster(center, 8, 0.1, rng))
            aff = build_affinity(points, 0.5)
            values, _ = symmetric_eigendecomposition(laplacian(aff))
            assert int(np.sum(values < 1e-6)) == components(aff.a)

    def test_zero_eigenvalues_count_components_on_pruned_graphs(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            n = int(rng.integers(2, 41))
            x = [unit_normalize(v) for v in rng.standard_normal((n, int(rng.integers(3, 12))))]
            aff = build_affinity(x, float(rng.uniform(0.2, 0.8)))
            values, _ = symmetric_eigendecomposition(laplacian(aff))
            assert int(np.sum(values < 1e-6)) == components(aff.a)

    def test_spectrum_within_zero_and_two(self):
        rng = np.random.default_rng(4)
        x = [unit_normalize(v) for v in rng.standard_normal((25, 5))]
        values, _ = symmetric_eigendecomposition(laplacian(build_affinity(x, 0.2)))
        assert values.min() >= -1e-9
        assert values.max() <= 2.0 + 1e-9


class TestEigengap:
    @pytest.mark.parametrize("eigenvalues, kmax, expected", [
        ([0.0, 0.0, 0.9, 1.0, 1.1], 10, 2),
        ([0.0, 0.5, 0.6, 1.6], 10, 3),
        ([0.0, 1.0, 2.0], 10, 1),
        ([0.0, 0.0, 0.0, 0.0, 1.0], 2, 1),
        ([0.0, 0.0, 0.0, 0.0, 1.0], 10, 4),
        ([0.0], 10, 1),
        ([0.0, 0.0, 1.0], 1, 1),
    ])
    def test_examples(self, eigenvalues, kmax, expected):
        assert estimate_num_speakers(eigenvalues, kmax) == expected


class TestKMeans:
    def test_two_obvious_groups(self):
        assignment = kmeans([[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]], 2, seed=0)
        assert assignment.labels == (0, 0, 1, 1)

    def test_single_cluster(self):
        assert kmeans(np.ones((5, 2)), 1, seed=0).labels == (0,) * 5

    def test_too_many_clusters(self):
        with pytest.raises(DiarizationError) as info:
            kmeans(np.ones((2, 2)), 3, seed=0)
        assert info.value.code == "k_too_large"

    def test_reaches_best_two_way_split(self):
        rng = np.random.default_rng(5)
        points = np.vstack([rng.normal(0.0, 0.5, (3, 2)), rng.normal(4.0, 0.5, (3, 2))])

        def inertia(labels):
            total = 0.0
            for label in set(labels):
                members = points[np.array(labels) == label]
                total += float(((members - members.mean(axis=0)) ** 2).sum())
            return total

        best = min(inertia((0,) + rest) for rest in itertools.product((0, 1), repeat=5) if 1 in rest)
        assert inertia(kmeans(points, 2, seed=0).labels) == pytest.approx(best)

    def test_same_seed_same_labels(self):
        points = np.random.default_rng(6).standard_normal((40, 3))
        assert kmeans(points, 4, seed=7) == kmeans(points, 4, seed=7)


class TestSpectralCluster:
    @pytest.mark.parametrize("k", [2, 3, 4, 5, 6])
    def test_recovers_separated_speakers(self, k):
        rng = np.random.default_rng(10 + k)
        centroids = separated_centroids(k, 64, 0.2, rng)
        embeddings, truth = [], []
        for label, center in enumerate(centroids):
            embeddings.extend(noisy_cluster(center, 30, 0.05, rng))
            truth.extend([label] * 30)
        assignment = spectral_cluster(embeddings, threshold=0.5, kmax=10, seed=0)
        assert assignment.k == k
        assert assignment.labels == tuple(truth)

    def test_shuffled_input_gives_same_partition(self):
        rng = np.random.default_rng(20)
        centroids = separated_centroids(3, 64, 0.2, rng)
        embeddings, truth = [], []
        for label, center in enumerate(centroids):
            embeddings.extend(noisy_cluster(center, 20, 0.05, rng))
            truth.extend([label] * 20)
        order = rng.permutation(len(embeddings))
        assignment = spectral_cluster([embeddings[i] for i in order], threshold=0.5, kmax=10, seed=3)
        assert same_partition(assignment.labels, [truth[i] for i in order])

    def test_forced_cluster_count(self):
        rng = np.random.default_rng(21)
        centroids = separated_centroids(2, 32, 0.2, rng)
        embeddings = noisy_cluster(centroids[0], 15, 0.05, rng) + noisy_cluster(centroids[1], 15, 0.05, rng)
        assert spectral_cluster(embeddings, 0.5, kmax=10, seed=0, num_clusters=1).k == 1

    def test_isolated_frames_become_singletons(self):
        assert spectral_cluster(np.eye(4), threshold=0.5, kmax=10, seed=0).labels == (0, 1, 2, 3)

    def test_isolated_frames_respect_kmax(self):
        assignment = spectral_cluster(np.eye(4), threshold=0.5, kmax=2, seed=0)
        assert assignment.k == 2
        assert len(assignment) == 4

    def test_single_frame(self):
        assert spectral_cluster([unit_normalize([1.0, 2.0])], threshold=0.1, kmax=10, seed=0).labels == (0,)

    def test_no_frames(self):
        with pytest.raises(DiarizationError) as info:
            spectral_cluster([], threshold=0.1, kmax=10, seed=0)
        assert info.value.code == "no_frames"


def best_permutation_accuracy(labels, truth, k):
    confusion = np.zeros((k, k), dtype=int)
    for label, speaker in zip(labels, truth):
        confusion[label, speaker] += 1
    best = max(sum(confusion[r, c] for r, c in enumerate(p)) for p in itertools.permutations(range(k)))
    return best / len(truth)


@pytest.mark.slow
def test_speaker_count_and_labels_over_random_trials():
    rng = np.random.default_rng(30)
    correct_count, accuracies = 0, []
    for trial in range(200):
        k = 2 + trial % 5
        embeddings, truth = [], []
        for label, center in enumerate(separated_centroids(k, 64, 0.2, rng)):
            size = int(rng.integers(30, 41))
            embeddings.extend(noisy_cluster(center, size, float(rng.uniform(0.02, 0.05)), rng))
            truth.extend([label] * size)
        estimated = spectral_cluster(embeddings, threshold=0.15, kmax=10, seed=trial)
        correct_count += estimated.k == k
        forced = spectral_cluster(embeddings, threshold=0.15, kmax=10, seed=trial, num_clusters=k)
        accuracies.append(best_permutation_accuracy(forced.labels, truth, k))
    assert correct_count >= 190
    assert np.mean(accuracies) >= 0.99
