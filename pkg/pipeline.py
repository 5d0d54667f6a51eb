"""
Diarization pipeline module
Runs initial clustering, style augmentation and re-clustering on one recording
and turns the frame labels into a hypothesis annotation
"""

import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Sequence, Tuple

from augment import AugmentationStats, balance, cluster_profile, generate_augmented
from config import PipelineConfig
from core import TIME_TOLERANCE, SeededRng, frame_windows
from errors import DiarizationError
from models import Annotation, ClusterAssignment, FrameEmbedding, SpeakerTurn, TimeInterval
from spectral import spectral_cluster
from synthworld import SimulatedRecording, World

logger = logging.getLogger(__name__)

HYPOTHESIS_LABEL = "cluster_{}"


@dataclass
class DiarizationResult:
    """
    Output of diarize for one recording

    Attributes:
        recording_id: Diarized recording
        hypothesis: Hypothesis annotation, built from original frames only
        estimated_nspk: Distinct speakers in the hypothesis
        initial: Labels from the first clustering
        final: Labels of the original frames after re-clustering
        augmentation: Per-cluster augmentation stats (empty for the baseline)
        augmented_frames: Augmented frames that entered re-clustering
        blended: Labels of originals followed by augmented frames, None for the baseline
    """
    recording_id: str
    hypothesis: Annotation
    estimated_nspk: int
    initial: ClusterAssignment
    final: ClusterAssignment
    augmentation: List[AugmentationStats] = field(default_factory=list)
    augmented_frames: List[FrameEmbedding] = field(default_factory=list)
    blended: Optional[ClusterAssignment] = None

    @property
    def n_augmented(self) -> int:
        return len(self.augmented_frames)

    def to_dict(self) -> Dict:
        return {
            'recording_id': self.recording_id,
            'estimated_nspk': self.estimated_nspk,
            'initial_k': self.initial.k,
            'final_k': self.final.k,
            'n_augmented': self.n_augmented,
            'augmentation': [stats.to_dict() for stats in self.augmentation]
        }


def _embeddings(frames: Sequence[FrameEmbedding]):
    return [frame.embedding for frame in frames]


def initial_cluster(frames: Sequence[FrameEmbedding], cfg: PipelineConfig, seed: int = 0) -> ClusterAssignment:
    """First clustering pass at the initial threshold"""
    if not frames:
        raise DiarizationError("no_frames", "nothing to cluster")
    return spectral_cluster(_embeddings(frames), cfg.initial_threshold, cfg.kmax, seed,
                            restarts=cfg.kmeans_restarts, max_iter=cfg.kmeans_max_iter)


def recluster(blended_frames: Sequence[FrameEmbedding], cfg: PipelineConfig, seed: int = 0) -> ClusterAssignment:
    """Second clustering pass over original and augmented frames together"""
    if not blended_frames:
        raise DiarizationError("no_frames", "nothing to re-cluster")
    return spectral_cluster(_embeddings(blended_frames), cfg.recluster_threshold, cfg.kmax, seed,
                            restarts=cfg.kmeans_restarts, max_iter=cfg.kmeans_max_iter)


def _frame_key(interval: TimeInterval) -> Tuple[float, float]:
    return round(interval.start, 6), round(interval.end, 6)


def frames_to_turns(frames: Sequence[FrameEmbedding], labels: Sequence[int], regions: Sequence[TimeInterval],
                    recording_id: str, window: float = 1.0, hop: float = 0.2) -> Annotation:
    """
    Build a hypothesis annotation from labeled original frames

    Each frame votes its label onto [start, start + hop) inside its speech
    region, and the last frame of a region runs to the region end. Adjacent
    intervals with the same label are merged.

    Args:
        frames: Frames in clustering order; augmented frames are skipped
        labels: Cluster label per frame
        regions: Speech regions the frames were cut from
        recording_id: Recording the annotation belongs to
        window: Frame window in seconds
        hop: Frame hop in seconds

    Returns:
        Hypothesis annotation with labels 'cluster_<id>'
    """
    if len(frames) != len(labels):
        raise DiarizationError("dim_mismatch", f"{len(frames)} frames but {len(labels)} labels")

    by_interval: Dict[Tuple[float, float], Deque[int]] = defaultdict(deque)
    for i, frame in enumerate(frames):
        if frame.is_original:
            by_interval[_frame_key(frame.interval)].append(i)

    votes = []
    for region in regions:
        windows = frame_windows([region], window, hop)
        for w, interval in enumerate(windows):
            queue = by_interval.get(_frame_key(interval))
            if not queue:
                continue
            i = queue.popleft()
            end = region.end if w == len(windows) - 1 else min(interval.start + hop, region.end)
            votes.append((interval.start, end, int(labels[i])))

    leftover = sum(len(queue) for queue in by_interval.values())
    if leftover:
        logger.warning(f"{recording_id}: {leftover} frames fall outside the speech regions")

    votes.sort()
    merged: List[List] = []
    for start, end, label in votes:
        if merged and merged[-1][2] == label and start <= merged[-1][1] + TIME_TOLERANCE:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end, label])

    turns = tuple(SpeakerTurn(TimeInterval(round(start, 9), round(end, 9)), HYPOTHESIS_LABEL.format(label))
                  for start, end, label in merged if end > start)
    return Annotation(recording_id, turns)


def diarize(recording: SimulatedRecording, cfg: PipelineConfig, world: Optional[World] = None) -> DiarizationResult:
    """
    Diarize one recording

    With augmentation enabled: initial clustering, cluster profiles,
    augmentation, balancing, re-clustering of the blended set. Without it
    the initial clustering is final. Reference turns serve as oracle speech
    regions.

    Args:
        recording: Recording with frames and reference turns
        cfg: Pipeline settings
        world: Embedding world providing the style token bank

    Returns:
        DiarizationResult
    """
    frames = [frame for frame in recording.frames if frame.is_original]
    if not frames:
        raise DiarizationError("no_frames", f"{recording.recording_id} has no frames")
    if cfg.augment_enabled and world is None:
        raise DiarizationError("invalid_config", "augmentation needs a world with a style token bank")

    recording_id = recording.recording_id
    base = SeededRng(cfg.seed or 0)
    initial = initial_cluster(frames, cfg, base.derive_seed(recording_id, "initial"))
    logger.debug(f"{recording_id}: initial clustering found {initial.k} clusters over {len(frames)} frames")

    final = initial
    stats: List[AugmentationStats] = []
    augmented_frames: List[FrameEmbedding] = []
    combined: Optional[ClusterAssignment] = None
    if cfg.augment_enabled:
        augment_cfg = cfg.resolved_augment()
        profiles = cluster_profile(frames, initial)
        generated = {}
        for profile in profiles:
            rng = base.derive(recording_id, "augment", profile.cluster_id)
            generated[profile.cluster_id], cluster_stats = generate_augmented(
                profile, world.bank, augment_cfg, rng, world.alpha, world.sigma)
            stats.append(cluster_stats)

        originals = {profile.cluster_id: profile.member_frames for profile in profiles}
        blended = balance(originals, generated, base.derive(recording_id, "balance"))
        for cluster_stats in stats:
            kept = blended[cluster_stats.cluster_id][cluster_stats.n_original:]
            cluster_stats.balanced = len(kept)
            augmented_frames.extend(kept)

        combined = recluster(frames + augmented_frames, cfg, base.derive_seed(recording_id, "recluster"))
        final = ClusterAssignment.from_labels(combined.labels[:len(frames)])
        logger.debug(f"{recording_id}: re-clustering {len(frames)} + {len(augmented_frames)} frames found {combined.k} clusters")

    regions = recording.reference.intervals()
    hypothesis = frames_to_turns(frames, final.labels, regions, recording_id, cfg.window, cfg.hop)
    result = DiarizationResult(recording_id=recording_id, hypothesis=hypothesis,
                               estimated_nspk=len(hypothesis.speakers), initial=initial, final=final,
                               augmentation=stats, augmented_frames=augmented_frames, blended=combined)
    logger.info(f"Diarized {recording_id}: {result.estimated_nspk} speakers "
                f"(initial {initial.k}, augmented frames {result.n_augmented})")
    return result
