"""
Core module for the diarization simulation
Vector math, interval algebra, frame windowing and the seeded random streams
shared by every other module
"""

import hashlib
import logging
import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from errors import DiarizationError
from models import Annotation, EmbeddingVector, TimeInterval

logger = logging.getLogger(__name__)

# Frame boundaries are rounded to this many decimals so that repeated
# hop additions do not drift away from the millisecond grid
TIME_DECIMALS = 9
TIME_TOLERANCE = 1e-9


class SeededRng:
    """
    Deterministic random stream built on numpy's PCG64 generator

    A stream is identified by a 64-bit seed plus a spawn key. Sub-streams are
    derived from labels such as (recording_id, stage): the labels are hashed
    with sha256 and the first four 32-bit words are appended to the spawn key
    of a numpy SeedSequence. Derived streams depend only on the seed and the
    labels, never on how many draws were taken elsewhere, so recordings can
    be processed in any order or in parallel.

    Attributes:
        seed: 64-bit unsigned seed
        stream: Spawn key identifying the sub-stream
    """

    ALGORITHM = "PCG64"

    def __init__(self, seed: int, stream: Tuple[int, ...] = ()):
        self.seed = int(seed) % (2 ** 64)
        self.stream = tuple(int(part) for part in stream)
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    @staticmethod
    def _stream_key(labels: Sequence[object]) -> Tuple[int, ...]:
        digest = hashlib.sha256("\x1f".join(str(label) for label in labels).encode()).digest()
        return tuple(int.from_bytes(digest[i:i + 4], 'little') for i in range(0, 16, 4))

    def derive(self, *labels: object) -> 'SeededRng':
        """Independent sub-stream named by labels"""
        return SeededRng(self.seed, self.stream + self._stream_key(labels))

    def derive_seed(self, *labels: object) -> int:
        """Integer seed for libraries that take a random_state"""
        return int(self.derive(*labels).generator.integers(0, 2 ** 31 - 1))

    def standard_normal(self, size=None) -> np.ndarray:
        return self.generator.standard_normal(size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self.generator.uniform(low, high, size)

    def random(self) -> float:
        return float(self.generator.random())

    def dirichlet(self, alpha: Sequence[float]) -> np.ndarray:
        return self.generator.dirichlet(alpha)

    def integers(self, low: int, high: Optional[int] = None) -> int:
        return int(self.generator.integers(low, high))

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self.generator.choice(n, size=size, replace=replace)

    def to_dict(self):
        return {'algorithm': self.ALGORITHM, 'seed': self.seed, 'stream': list(self.stream)}


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """
    Cosine similarity of two unit-norm embeddings

    Args:
        a: Unit-norm vector
        b: Unit-norm vector of the same dimension

    Returns:
        dot(a, b), clipped to [-1, 1]
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DiarizationError("dim_mismatch", f"{a.shape} vs {b.shape}")
    return float(np.clip(np.dot(a, b), -1.0, 1.0))


def unit_normalize(v: Iterable[float]) -> EmbeddingVector:
    """Scale a raw vector to unit L2 norm"""
    arr = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0 or not math.isfinite(norm):
        raise DiarizationError("zero_norm", "cannot normalize a zero vector")
    return arr / norm


def frame_windows(speech_regions: Sequence[TimeInterval], window: float = 1.0,
                  hop: float = 0.2) -> List[TimeInterval]:
    """
    Slide analysis windows over speech regions

    Regions shorter than one window yield a single frame covering the region.

    Args:
        speech_regions: Disjoint sorted speech regions
        window: Window length in seconds
        hop: Hop between window starts in seconds

    Returns:
        Frame intervals, region by region
    """
    if window <= 0 or hop <= 0:
        raise DiarizationError("invalid_config", f"window {window} and hop {hop} must be positive")

    frames = []
    for region in speech_regions:
        length = region.duration
        if length <= 0:
            continue
        if length < window - TIME_TOLERANCE:
            frames.append(TimeInterval(region.start, region.end))
            continue

        count = int(math.floor((length - window) / hop + TIME_TOLERANCE)) + 1
        for i in range(count):
            start = round(region.start + i * hop, TIME_DECIMALS)
            end = min(round(start + window, TIME_DECIMALS), region.end)
            frames.append(TimeInterval(start, end))
    return frames


def merge_intervals(intervals: Iterable[TimeInterval]) -> List[TimeInterval]:
    """Union of intervals as a sorted list of disjoint intervals"""
    ordered = sorted((i for i in intervals if i.duration > 0), key=lambda i: (i.start, i.end))
    merged: List[TimeInterval] = []
    for interval in ordered:
        if merged and interval.start <= merged[-1].end:
            if interval.end > merged[-1].end:
                merged[-1] = TimeInterval(merged[-1].start, interval.end)
        else:
            merged.append(interval)
    return merged


def intersect_intervals(a: Iterable[TimeInterval], b: Iterable[TimeInterval]) -> List[TimeInterval]:
    """Intersection of two interval sets"""
    left, right = merge_intervals(a), merge_intervals(b)
    result = []
    i = j = 0
    while i < len(left) and j < len(right):
        start = max(left[i].start, right[j].start)
        end = min(left[i].end, right[j].end)
        if end > start:
            result.append(TimeInterval(start, end))
        if left[i].end < right[j].end:
            i += 1
        else:
            j += 1
    return result


def subtract_intervals(base: Iterable[TimeInterval], remove: Iterable[TimeInterval]) -> List[TimeInterval]:
    """Parts of base not covered by remove"""
    holes = merge_intervals(remove)
    result = []
    for interval in merge_intervals(base):
        cursor = interval.start
        for hole in holes:
            if hole.end <= cursor:
                continue
            if hole.start >= interval.end:
                break
            if hole.start > cursor:
                result.append(TimeInterval(cursor, hole.start))
            cursor = max(cursor, hole.end)
        if cursor < interval.end:
            result.append(TimeInterval(cursor, interval.end))
    return result


def interval_total(intervals: Iterable[TimeInterval]) -> float:
    """Total length of the union of the intervals"""
    return float(sum(interval.duration for interval in merge_intervals(intervals)))


def overlap_regions(ref: Annotation) -> List[TimeInterval]:
    """
    Maximal regions where two or more distinct speakers talk at once

    Args:
        ref: Annotation to inspect

    Returns:
        Disjoint sorted overlap intervals
    """
    # A speaker overlapping its own turns is still one speaker
    speech = [merge_intervals(ref.speaker_intervals(speaker)) for speaker in ref.speakers]
    regions = []
    for i, first in enumerate(speech):
        for second in speech[i + 1:]:
            regions.extend(intersect_intervals(first, second))
    return merge_intervals(regions)
