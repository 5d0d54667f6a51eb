"""
Simulated embedding world for diarization experiments
Generates speaker embeddings with controllable intrinsic style variability and
builds the two evaluation corpora (emotional conversations, meeting excerpts)
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from config import (
    DEFAULT_HOP, DEFAULT_WINDOW, EMOTIONS, MAX_SPHERE_DRAWS,
    WORLD_CONFIG, ConversationSpec, CorpusPreset, WorldConfig
)
from core import SeededRng, cosine_similarity, frame_windows, unit_normalize
from errors import DiarizationError
from models import Annotation, EmbeddingVector, FrameEmbedding, FrameSource, SpeakerTurn, TimeInterval

logger = logging.getLogger(__name__)

MAX_TOKEN_COS = 0.2
SIMPLEX_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class StyleTokenBank:
    """
    Bank of near-orthogonal unit style tokens

    Attributes:
        tokens: K x d array, one unit token per row
    """
    tokens: np.ndarray

    def __post_init__(self):
        norms = np.linalg.norm(self.tokens, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise DiarizationError("invalid_bank", "style tokens must be unit norm")
        gram = self.tokens @ self.tokens.T
        off_diagonal = np.abs(gram - np.diag(np.diag(gram)))
        if off_diagonal.size and off_diagonal.max() > MAX_TOKEN_COS:
            raise DiarizationError("invalid_bank", f"token similarity {off_diagonal.max():.3f} above {MAX_TOKEN_COS}")

    @property
    def K(self) -> int:
        return self.tokens.shape[0]

    @property
    def d(self) -> int:
        return self.tokens.shape[1]

    def mix(self, weights: np.ndarray) -> np.ndarray:
        """Weighted sum of tokens (not normalized)"""
        return np.asarray(weights, dtype=np.float64) @ self.tokens


@dataclass(frozen=True, eq=False)
class StyleWeights:
    """
    Attention-like weights over the style tokens

    Attributes:
        w: K non-negative weights summing to one
    """
    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise DiarizationError("weights_mismatch", "style weights must be a non-empty vector")
        if np.any(w < 0) or abs(w.sum() - 1.0) > SIMPLEX_TOLERANCE:
            raise DiarizationError("invalid_weights", "style weights must lie on the probability simplex")
        object.__setattr__(self, 'w', w)

    @classmethod
    def from_raw(cls, raw: np.ndarray) -> 'StyleWeights':
        raw = np.maximum(np.asarray(raw, dtype=np.float64), 0.0)
        return cls(raw / raw.sum())

    @property
    def K(self) -> int:
        return self.w.size

    @property
    def dominant(self) -> int:
        return int(np.argmax(self.w))


@dataclass(frozen=True, eq=False)
class SpeakerModel:
    """
    Simulated speaker

    Attributes:
        speaker_id: Speaker label
        centroid: Unit identity vector
        emotion_styles: Style weights per emotion (or unnamed style)
    """
    speaker_id: str
    centroid: EmbeddingVector
    emotion_styles: Dict[str, StyleWeights]

    def to_dict(self) -> Dict:
        return {
            'speaker_id': self.speaker_id,
            'styles': {name: weights.w.tolist() for name, weights in self.emotion_styles.items()}
        }


@dataclass(frozen=True, eq=False)
class World:
    """
    Generative model of speaker embeddings

    Rebuilding a world from the same seed and config gives identical tokens.

    Attributes:
        seed: World seed
        config: World parameters
        bank: Style token bank
    """
    seed: int
    config: WorldConfig
    bank: StyleTokenBank

    @property
    def d(self) -> int:
        return self.config.d

    @property
    def alpha(self) -> float:
        return self.config.alpha

    @property
    def sigma(self) -> float:
        return self.config.sigma

    @property
    def max_speaker_cos(self) -> float:
        return self.config.max_speaker_cos

    def to_dict(self) -> Dict:
        return {**self.config.to_dict(), 'seed': self.seed}


@dataclass(eq=False)
class SimulatedRecording:
    """
    One simulated recording with its ground truth

    Attributes:
        recording_id: Recording identifier
        reference: Reference annotation
        frames: Original frame embeddings
        speakers: Speaker models (empty when loaded from disk)
        frame_speakers: True speaker per frame
        frame_styles: True style per frame (empty strings when unknown)
        duration: Recording length in seconds
    """
    recording_id: str
    reference: Annotation
    frames: List[FrameEmbedding]
    speakers: List[SpeakerModel] = field(default_factory=list)
    frame_speakers: List[str] = field(default_factory=list)
    frame_styles: List[str] = field(default_factory=list)
    duration: float = 0.0

    @property
    def true_nspk(self) -> int:
        return len(self.reference.speakers)

    def embedding_matrix(self) -> np.ndarray:
        return np.vstack([frame.embedding for frame in self.frames])


def make_world(seed: int, d: int = WORLD_CONFIG['d'], K: int = WORLD_CONFIG['K'],
               alpha: float = WORLD_CONFIG['alpha'], sigma: float = WORLD_CONFIG['sigma'],
               max_speaker_cos: float = WORLD_CONFIG['max_speaker_cos'],
               style_concentration: float = WORLD_CONFIG['style_concentration']) -> World:
    """
    Build a world: K standard-normal vectors, orthogonalized and normalized

    Args:
        seed: World seed
        d: Embedding dimension
        K: Number of style tokens
        alpha: Style strength
        sigma: Noise scale
        max_speaker_cos: Pairwise centroid similarity cap
        style_concentration: Dirichlet concentration of speaker styles

    Returns:
        A new World
    """
    if K < 1:
        raise DiarizationError("invalid_config", "need at least one style token")
    if d < K:
        raise DiarizationError("bank_underdetermined", f"cannot fit {K} orthogonal tokens in {d} dimensions")
    config = WorldConfig(seed=seed, d=d, K=K, alpha=alpha, sigma=sigma,
                         max_speaker_cos=max_speaker_cos, style_concentration=style_concentration)
    config.validate()

    rng = SeededRng(seed).derive("world", "style_bank")
    raw = rng.standard_normal((d, K))
    q, _ = np.linalg.qr(raw)
    tokens = np.vstack([unit_normalize(column) for column in q.T])
    bank = StyleTokenBank(tokens)

    logger.info(f"Created world seed={seed} d={d} K={K} alpha={alpha} sigma={sigma}")
    return World(seed=seed, config=config, bank=bank)


def world_from_config(config: WorldConfig, seed: int) -> World:
    """Rebuild a world from its serialized parameters"""
    return make_world(seed, d=config.d, K=config.K, alpha=config.alpha, sigma=config.sigma,
                      max_speaker_cos=config.max_speaker_cos,
                      style_concentration=config.style_concentration)


def sample_speaker(world: World, speaker_id: str, rng: SeededRng,
                   emotions: Sequence[str] = EMOTIONS,
                   existing: Sequence[SpeakerModel] = ()) -> SpeakerModel:
    """
    Draw a speaker whose centroid keeps its distance from the existing ones

    The centroid is uniform on the unit sphere and is redrawn until its cosine
    with every centroid in `existing` is at most world.max_speaker_cos.
    """
    for attempt in range(MAX_SPHERE_DRAWS):
        centroid = unit_normalize(rng.standard_normal(world.d))
        if all(cosine_similarity(centroid, other.centroid) <= world.max_speaker_cos for other in existing):
            break
    else:
        raise DiarizationError("sphere_packing_failed",
                               f"no centroid for {speaker_id} after {MAX_SPHERE_DRAWS} draws")

    concentration = np.full(world.bank.K, world.config.style_concentration)
    styles = {name: StyleWeights.from_raw(rng.dirichlet(concentration)) for name in emotions}
    logger.debug(f"Sampled {speaker_id} after {attempt + 1} draws")
    return SpeakerModel(speaker_id=speaker_id, centroid=centroid, emotion_styles=styles)


def emit_embedding(world: World, speaker: SpeakerModel, emotion: str, rng: SeededRng) -> EmbeddingVector:
    """centroid + alpha * style + sigma * gaussian noise, normalized"""
    if emotion not in speaker.emotion_styles:
        raise DiarizationError("unknown_style", f"{speaker.speaker_id} has no style '{emotion}'")
    style = world.bank.mix(speaker.emotion_styles[emotion].w)
    noise = rng.standard_normal(world.d)
    return unit_normalize(speaker.centroid + world.alpha * style + world.sigma * noise)


def _plan_turns(spec: ConversationSpec, total: float, rng: SeededRng):
    """Turn boundaries and speaker order; every speaker talks at least once"""
    n = spec.n_speakers
    turn_low, turn_high = spec.turn_length_range
    min_turn = min(turn_low, total / n)
    first_order = [int(i) for i in rng.choice(n, size=n, replace=False)]

    plan = []
    t = 0.0
    previous_start = 0.0
    index = 0
    while t < total - 1e-9:
        unvisited_after = max(0, n - index - 1)
        high = min(turn_high, total - t - unvisited_after * min_turn)
        low = min(min_turn, high)
        length = rng.uniform(low, high) if high > low else high
        end = min(round(t + length, 3), total)
        if end <= t or (total - end < spec.min_tail and unvisited_after == 0):
            end = total

        if index < n:
            speaker = first_order[index]
        elif n == 1:
            speaker = 0
        else:
            others = [s for s in range(n) if s != plan[-1][2]]
            speaker = others[rng.integers(0, len(others))]

        start = t
        if plan and spec.overlap_prob > 0 and rng.random() < spec.overlap_prob:
            shift = rng.uniform(0.0, min(spec.overlap_max, (t - previous_start) / 2))
            start = round(max(previous_start, t - shift), 3)

        plan.append((start, end, speaker))
        previous_start = start
        t = end
        index += 1
    return plan


def simulate_conversation(world: World, spec: ConversationSpec, rng: SeededRng,
                          recording_id: str = "rec_000", window: float = DEFAULT_WINDOW,
                          hop: float = DEFAULT_HOP) -> SimulatedRecording:
    """
    Simulate one turn-taking conversation

    Args:
        world: Embedding world
        spec: Conversation shape
        rng: Random stream for this recording
        recording_id: Identifier of the new recording
        window: Frame window in seconds
        hop: Frame hop in seconds

    Returns:
        Recording with reference turns and per-frame embeddings
    """
    spec.validate()
    low, high = spec.duration_range
    total = round(rng.uniform(low, high), 3) if high > low else float(low)

    speakers: List[SpeakerModel] = []
    for j in range(spec.n_speakers):
        speakers.append(sample_speaker(world, f"speaker_{j}", rng, spec.emotion_set, speakers))

    current_style: Dict[int, Optional[str]] = {j: None for j in range(spec.n_speakers)}
    turns = []
    frames = []
    frame_speakers = []
    frame_styles = []
    for start, end, j in _plan_turns(spec, total, rng):
        speaker = speakers[j]
        if current_style[j] is None or rng.random() < spec.switch_emotion_prob:
            current_style[j] = spec.emotion_set[rng.integers(0, len(spec.emotion_set))]
        style = current_style[j]

        interval = TimeInterval(start, end)
        turns.append(SpeakerTurn(interval, speaker.speaker_id))
        for window_interval in frame_windows([interval], window, hop):
            frames.append(FrameEmbedding(window_interval, emit_embedding(world, speaker, style, rng),
                                         FrameSource.ORIGINAL))
            frame_speakers.append(speaker.speaker_id)
            frame_styles.append(style)

    reference = Annotation(recording_id, tuple(turns))
    logger.debug(f"Simulated {recording_id}: {total:.3f}s, {len(turns)} turns, {len(frames)} frames")
    return SimulatedRecording(recording_id=recording_id, reference=reference, frames=frames,
                              speakers=speakers, frame_speakers=frame_speakers,
                              frame_styles=frame_styles, duration=total)


def simulate_corpus(world: World, preset: CorpusPreset, n: Optional[int], rng: SeededRng,
                    window: float = DEFAULT_WINDOW, hop: float = DEFAULT_HOP) -> List[SimulatedRecording]:
    """
    Simulate a corpus; each recording gets its own sub-stream of rng

    Args:
        world: Embedding world
        preset: Corpus preset
        n: Number of recordings, None uses the preset's count
        rng: Corpus random stream
        window: Frame window in seconds
        hop: Frame hop in seconds

    Returns:
        Recordings named '<preset>_<index>'
    """
    count = preset.n if n is None else n
    if preset.nonstandard:
        logger.warning(f"Meeting duration {preset.duration:g}s is not one of the standard excerpt lengths")
    spec = preset.conversation_spec()

    recordings = []
    for i in range(count):
        recording_id = f"{preset.name}_{i:03d}"
        recordings.append(simulate_conversation(world, spec, rng.derive(recording_id, "simulate"),
                                                recording_id, window, hop))
    logger.info(f"Simulated corpus {preset.name}: {len(recordings)} recordings")
    return recordings
