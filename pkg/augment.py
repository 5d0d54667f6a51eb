"""
Style-controllable augmentation module
Generates identity-preserving, style-diverse embeddings around each discovered
cluster by varying style-token weights, gates them by similarity to the
cluster centroid and balances original against augmented frames
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import WORLD_CONFIG, AugmentConfig, WeightStrategy
from core import SeededRng, cosine_similarity, unit_normalize
from errors import DiarizationError
from models import ClusterAssignment, EmbeddingVector, FrameEmbedding, FrameSource, TimeInterval
from synthworld import StyleTokenBank, StyleWeights

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class ClusterProfile:
    """
    One cluster from the initial clustering

    Attributes:
        cluster_id: Cluster label
        centroid: Normalized mean of the member embeddings
        member_frames: Frames assigned to the cluster
    """
    cluster_id: int
    centroid: EmbeddingVector
    member_frames: List[FrameEmbedding] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.member_frames)


@dataclass
class AugmentationStats:
    """
    Bookkeeping for one cluster's augmentation run

    Attributes:
        cluster_id: Source cluster
        n_original: Original frames in the cluster
        requested: Target number of accepted samples
        generated: Candidates drawn
        accepted: Candidates that passed the gate
        rejected: Candidates below the gate
        balanced: Augmented frames kept after balancing
        min_accepted_cos: Lowest gate cosine among accepted samples
        gate_threshold: Gate in force
        strategy: Weight strategy in force
    """
    cluster_id: int
    n_original: int
    requested: int
    generated: int = 0
    accepted: int = 0
    rejected: int = 0
    balanced: int = 0
    min_accepted_cos: Optional[float] = None
    gate_threshold: float = 0.0
    strategy: str = ""

    @property
    def shortfall(self) -> int:
        return max(0, self.requested - self.accepted)

    @property
    def balance_shortfall(self) -> int:
        return max(0, self.n_original - self.balanced)

    def to_dict(self) -> Dict:
        return {
            'cluster_id': self.cluster_id,
            'n_original': self.n_original,
            'requested': self.requested,
            'generated': self.generated,
            'accepted': self.accepted,
            'rejected': self.rejected,
            'shortfall': self.shortfall,
            'balanced': self.balanced,
            'balance_shortfall': self.balance_shortfall,
            'min_accepted_cos': self.min_accepted_cos,
            'gate_threshold': self.gate_threshold,
            'strategy': self.strategy
        }


def cluster_profile(frames: Sequence[FrameEmbedding], labels: ClusterAssignment) -> List[ClusterProfile]:
    """
    Group frames by cluster and compute each cluster's centroid

    Args:
        frames: Frames in clustering order
        labels: Cluster label per frame

    Returns:
        One profile per cluster id, in id order
    """
    if len(frames) != len(labels):
        raise DiarizationError("dim_mismatch", f"{len(frames)} frames but {len(labels)} labels")

    profiles = []
    for cluster_id in range(labels.k):
        members = [frames[i] for i in labels.members(cluster_id)]
        mean = np.mean([frame.embedding for frame in members], axis=0)
        profiles.append(ClusterProfile(cluster_id, unit_normalize(mean), members))
    return profiles


def style_embedding(w: StyleWeights, bank: StyleTokenBank) -> np.ndarray:
    """Additive style term: sum of tokens weighted by w (not normalized)"""
    if w.K != bank.K:
        raise DiarizationError("weights_mismatch", f"{w.K} weights for {bank.K} tokens")
    return bank.mix(w.w)


def sample_style_weights(strategy: WeightStrategy, K: int, rng: SeededRng, index: int = 0) -> StyleWeights:
    """
    Draw style-token weights

    Args:
        strategy: one_hot_cycle, dirichlet_uniform or mixed
        K: Number of tokens
        rng: Random stream
        index: Call counter, selects the token for one-hot draws

    Returns:
        Weights on the simplex
    """
    if K < 1:
        raise DiarizationError("invalid_config", "need at least one style token")
    strategy = WeightStrategy(strategy)

    if strategy is WeightStrategy.ONE_HOT_CYCLE:
        slot = index % K
    elif strategy is WeightStrategy.MIXED and index % 2 == 0:
        slot = (index // 2) % K
    else:
        return StyleWeights.from_raw(rng.dirichlet(np.ones(K)))

    w = np.zeros(K)
    w[slot] = 1.0
    return StyleWeights(w)


class StyleWeightSampler:
    """Stateful wrapper over sample_style_weights that counts its calls"""

    def __init__(self, strategy: WeightStrategy, K: int, rng: SeededRng):
        self.strategy = WeightStrategy(strategy)
        self.K = K
        self.rng = rng
        self.calls = 0

    def __call__(self) -> StyleWeights:
        weights = sample_style_weights(self.strategy, self.K, self.rng, self.calls)
        self.calls += 1
        return weights


def generate_augmented(profile: ClusterProfile, bank: StyleTokenBank, cfg: AugmentConfig, rng: SeededRng,
                       default_alpha: float = WORLD_CONFIG['alpha'],
                       default_sigma: float = WORLD_CONFIG['sigma']) -> Tuple[List[FrameEmbedding], AugmentationStats]:
    """
    Generate gated augmented frames around one cluster

    Candidates are centroid + alpha_aug * style + sigma_aug * gaussian noise,
    normalized, and accepted when their cosine to the centroid reaches the
    gate. Generation stops at the per-cluster target or after
    max_attempts_factor * target candidates.

    Args:
        profile: Source cluster
        bank: Style token bank
        cfg: Augmentation settings
        rng: Random stream for this cluster
        default_alpha: Style strength when cfg.alpha_aug is unset
        default_sigma: Noise scale when cfg.sigma_aug is unset

    Returns:
        (accepted frames, stats); accepted frames sit at negative, off-timeline intervals
    """
    if profile.centroid.shape[0] != bank.d:
        raise DiarizationError("dim_mismatch", f"centroid has {profile.centroid.shape[0]} dims, bank {bank.d}")
    alpha = default_alpha if cfg.alpha_aug is None else cfg.alpha_aug
    sigma = default_sigma if cfg.sigma_aug is None else cfg.sigma_aug
    target = cfg.target_for(profile.size)
    max_attempts = cfg.max_attempts_factor * target

    stats = AugmentationStats(cluster_id=profile.cluster_id, n_original=profile.size, requested=target,
                              gate_threshold=cfg.gate_threshold, strategy=cfg.weight_strategy.value)
    sampler = StyleWeightSampler(cfg.weight_strategy, bank.K, rng)
    accepted: List[FrameEmbedding] = []

    while len(accepted) < target and stats.generated < max_attempts:
        style = style_embedding(sampler(), bank)
        noise = rng.standard_normal(bank.d)
        candidate = unit_normalize(profile.centroid + alpha * style + sigma * noise)
        stats.generated += 1

        similarity = cosine_similarity(candidate, profile.centroid)
        if similarity < cfg.gate_threshold:
            stats.rejected += 1
            continue

        j = len(accepted)
        accepted.append(FrameEmbedding(TimeInterval(-(j + 1.0), -float(j)), candidate, FrameSource.AUGMENTED))
        if stats.min_accepted_cos is None or similarity < stats.min_accepted_cos:
            stats.min_accepted_cos = similarity

    stats.accepted = len(accepted)
    if stats.shortfall:
        logger.warning(f"Cluster {profile.cluster_id}: {stats.accepted}/{target} augmented samples "
                       f"passed the gate after {stats.generated} attempts")
    logger.debug(f"Cluster {profile.cluster_id}: accepted {stats.accepted}, rejected {stats.rejected}")
    return accepted, stats


def balance(original: Dict[int, List[FrameEmbedding]], augmented: Dict[int, List[FrameEmbedding]],
            rng: SeededRng) -> Dict[int, List[FrameEmbedding]]:
    """
    Equalize original and augmented sources per cluster

    All originals are kept; augmented frames are subsampled without
    replacement down to the original count.

    Args:
        original: Original frames per cluster
        augmented: Augmented frames per cluster
        rng: Random stream; each cluster draws from its own sub-stream

    Returns:
        Originals followed by the kept augmented frames, per cluster
    """
    blended = {}
    for cluster_id, originals in original.items():
        candidates = augmented.get(cluster_id, [])
        keep = min(len(candidates), len(originals))
        if keep < len(candidates):
            picked = np.sort(rng.derive("balance", cluster_id).choice(len(candidates), keep, replace=False))
            kept = [candidates[i] for i in picked]
        else:
            kept = list(candidates)
        if keep < len(originals):
            logger.debug(f"Cluster {cluster_id}: only {keep} augmented frames for {len(originals)} originals")
        blended[cluster_id] = list(originals) + kept
    return blended
