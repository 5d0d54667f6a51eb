"""
Configuration module for the diarization simulation
Contains corpus presets, pipeline constants, default parameters and the
dataclass configurations loaded from experiment files
"""

import json
import logging
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from errors import DiarizationError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# Frame extraction
DEFAULT_WINDOW = 1.0  # seconds
DEFAULT_HOP = 0.2  # seconds

# Clustering thresholds
INITIAL_THRESHOLD = 0.15
RECLUSTER_THRESHOLD = 0.12
GATE_THRESHOLD = 0.4
DEFAULT_KMAX = 10

# Embedding world
EMBEDDING_DIM = 384
STYLE_TOKENS = 32
MAX_SPHERE_DRAWS = 10000

EMOTIONS = ('neutral', 'sad', 'happy', 'surprised', 'excited')
MEETING_STYLES = ('style_0', 'style_1', 'style_2', 'style_3')
MEETING_DURATIONS = (15, 30, 60, 120, 240)

# Evaluation corpora
CORPUS_PRESETS = {
    'EMOTIONAL': {
        'n_speakers': 2,
        'duration_range': (30.0, 60.0),
        'styles': EMOTIONS,
        'recordings': 100,
        'turn_length_range': (2.0, 8.0),
        'switch_emotion_prob': 0.5,
        'description': 'Two speakers taking turns, five emotions each, 30-60 s'
    },
    'MEETING': {
        'n_speakers': 3,
        'durations': MEETING_DURATIONS,
        'styles': MEETING_STYLES,
        'recordings': 100,
        'turn_length_range': (1.0, 4.0),
        'switch_emotion_prob': 0.7,
        'description': 'Exactly three speakers, short turns, fixed length excerpts'
    }
}

# Default simulation parameters
WORLD_CONFIG = {
    'd': EMBEDDING_DIM,
    'K': STYLE_TOKENS,
    'alpha': 2.4,  # style strength
    'sigma': 0.144,  # per-coordinate noise scale
    'max_speaker_cos': 0.25,
    'style_concentration': 0.1  # Dirichlet concentration of per-style weights
}

CONVERSATION_CONFIG = {
    'turn_length_range': (2.0, 8.0),
    'switch_emotion_prob': 0.5,
    'overlap_prob': 0.0,
    'overlap_max': 1.0,
    'min_tail': 0.5  # shorter leftovers are absorbed into the last turn
}

AUGMENT_CONFIG = {
    'per_cluster_target': 'match_original',
    'gate_threshold': GATE_THRESHOLD,
    'weight_strategy': 'one_hot_cycle',
    'alpha_aug': 0.3,  # None uses the world alpha
    'sigma_aug': 0.02,  # None uses the world sigma
    'max_attempts_factor': 10
}

SCORING_CONFIG = {
    'exclude_overlap': True,
    'collar': 0.0,
    'weighting': 'recording'
}

# Logging configuration
LOG_CONFIG = {
    'level': 'WARNING',
    'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    'file': None
}


class WeightStrategy(Enum):
    """How style-token weights are drawn during augmentation"""
    ONE_HOT_CYCLE = "one_hot_cycle"
    DIRICHLET_UNIFORM = "dirichlet_uniform"
    MIXED = "mixed"


WEIGHT_STRATEGIES = {
    WeightStrategy.ONE_HOT_CYCLE: "one-hot on token i mod K for the i-th draw",
    WeightStrategy.DIRICHLET_UNIFORM: "symmetric Dirichlet, concentration 1",
    WeightStrategy.MIXED: "alternates one-hot and Dirichlet draws"
}


def _checked_kwargs(cls, data: Dict[str, Any], section: str) -> Dict[str, Any]:
    """Reject unknown keys so typos in config files do not pass silently"""
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise DiarizationError("invalid_config", f"unknown keys in '{section}': {', '.join(unknown)}")
    return dict(data)


@dataclass
class WorldConfig:
    """
    Parameters of the simulated embedding world

    Attributes:
        seed: World seed, None inherits the experiment seed
        d: Embedding dimension
        K: Number of style tokens
        alpha: Style strength
        sigma: Noise scale
        max_speaker_cos: Cap on pairwise centroid similarity within a recording
        style_concentration: Dirichlet concentration for per-style token weights
    """
    seed: Optional[int] = None
    d: int = WORLD_CONFIG['d']
    K: int = WORLD_CONFIG['K']
    alpha: float = WORLD_CONFIG['alpha']
    sigma: float = WORLD_CONFIG['sigma']
    max_speaker_cos: float = WORLD_CONFIG['max_speaker_cos']
    style_concentration: float = WORLD_CONFIG['style_concentration']

    def validate(self):
        if self.alpha < 0 or self.sigma < 0:
            raise DiarizationError("invalid_config", "alpha and sigma must be non-negative")
        if not -1.0 < self.max_speaker_cos < 1.0:
            raise DiarizationError("invalid_config", "max_speaker_cos must lie in (-1, 1)")
        if self.style_concentration <= 0:
            raise DiarizationError("invalid_config", "style_concentration must be positive")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'WorldConfig':
        return cls(**_checked_kwargs(cls, data, 'world'))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'seed': self.seed,
            'd': self.d,
            'K': self.K,
            'alpha': self.alpha,
            'sigma': self.sigma,
            'max_speaker_cos': self.max_speaker_cos,
            'style_concentration': self.style_concentration
        }


@dataclass
class ConversationSpec:
    """
    Shape of one simulated conversation

    Attributes:
        n_speakers: Number of speakers
        duration_range: Total duration drawn uniformly from this range (seconds)
        turn_length_range: Per-turn duration range (seconds)
        emotion_set: Style names each speaker can take
        switch_emotion_prob: Chance a speaker changes style at each of its turns
        overlap_prob: Chance a turn starts before the previous one ends
        overlap_max: Largest overlap in seconds
        min_tail: Leftover time below this is absorbed into the last turn
    """
    n_speakers: int
    duration_range: Tuple[float, float]
    turn_length_range: Tuple[float, float] = CONVERSATION_CONFIG['turn_length_range']
    emotion_set: Tuple[str, ...] = EMOTIONS
    switch_emotion_prob: float = CONVERSATION_CONFIG['switch_emotion_prob']
    overlap_prob: float = CONVERSATION_CONFIG['overlap_prob']
    overlap_max: float = CONVERSATION_CONFIG['overlap_max']
    min_tail: float = CONVERSATION_CONFIG['min_tail']

    def validate(self):
        if self.n_speakers < 1:
            raise DiarizationError("invalid_config", "n_speakers must be at least 1")
        for name, (low, high) in (('duration_range', self.duration_range),
                                  ('turn_length_range', self.turn_length_range)):
            if low <= 0 or high < low:
                raise DiarizationError("invalid_config", f"{name} ({low}, {high}) is empty")
        if not self.emotion_set:
            raise DiarizationError("invalid_config", "emotion_set is empty")
        if not 0.0 <= self.switch_emotion_prob <= 1.0 or not 0.0 <= self.overlap_prob <= 1.0:
            raise DiarizationError("invalid_config", "probabilities must lie in [0, 1]")


@dataclass(frozen=True)
class CorpusPreset:
    """
    One evaluation corpus to simulate

    Attributes:
        kind: 'emotional' or 'meeting'
        n: Number of recordings
        duration: Meeting excerpt length in seconds (meeting only)
        overlap_prob: Chance a turn starts before the previous one ends
    """
    kind: str
    n: int = 100
    duration: Optional[float] = None
    overlap_prob: float = CONVERSATION_CONFIG['overlap_prob']

    def __post_init__(self):
        if self.kind not in ('emotional', 'meeting'):
            raise DiarizationError("invalid_config", f"unknown preset: {self.kind}")
        if self.kind == 'meeting' and (self.duration is None or self.duration <= 0):
            raise DiarizationError("invalid_config", "meeting preset needs a positive duration")
        if self.n < 0:
            raise DiarizationError("invalid_config", "recording count must be non-negative")
        if not 0.0 <= self.overlap_prob <= 1.0:
            raise DiarizationError("invalid_config", "overlap_prob must lie in [0, 1]")

    @property
    def name(self) -> str:
        if self.kind == 'meeting':
            return f"meeting_{self.duration:g}"
        return self.kind

    @property
    def nonstandard(self) -> bool:
        """Meeting durations outside the published list are allowed but flagged"""
        return self.kind == 'meeting' and self.duration not in MEETING_DURATIONS

    def conversation_spec(self) -> ConversationSpec:
        preset = CORPUS_PRESETS[self.kind.upper()]
        if self.kind == 'meeting':
            duration_range = (float(self.duration), float(self.duration))
        else:
            duration_range = preset['duration_range']
        return ConversationSpec(
            n_speakers=preset['n_speakers'],
            duration_range=duration_range,
            turn_length_range=tuple(preset['turn_length_range']),
            emotion_set=tuple(preset['styles']),
            switch_emotion_prob=preset['switch_emotion_prob'],
            overlap_prob=self.overlap_prob
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'name': self.name,
            'n': self.n,
            'duration': self.duration,
            'overlap_prob': self.overlap_prob,
            'nonstandard': self.nonstandard
        }


def expand_corpora(entries: List[Dict[str, Any]]) -> List[CorpusPreset]:
    """Turn config-file corpus entries into presets, one per meeting duration"""
    presets = []
    for entry in entries:
        kind = str(entry.get('preset', '')).lower()
        n = int(entry.get('n', CORPUS_PRESETS.get(kind.upper(), {}).get('recordings', 100)))
        overlap_prob = float(entry.get('overlap_prob', CONVERSATION_CONFIG['overlap_prob']))
        if kind == 'meeting':
            durations = entry.get('durations', entry.get('duration', MEETING_DURATIONS))
            if isinstance(durations, (int, float)):
                durations = [durations]
            for duration in durations:
                presets.append(CorpusPreset('meeting', n, float(duration), overlap_prob))
        else:
            presets.append(CorpusPreset(kind, n, overlap_prob=overlap_prob))
    return presets


@dataclass
class AugmentConfig:
    """
    Style-controllable augmentation settings

    Attributes:
        per_cluster_target: 'match_original' or a fixed count per cluster
        gate_threshold: Minimum cosine to the source cluster centroid
        weight_strategy: How style weights are drawn
        alpha_aug: Style strength, None uses the world alpha
        sigma_aug: Noise scale, None uses the world sigma
        max_attempts_factor: Attempts allowed per requested sample
    """
    per_cluster_target: Union[str, int] = AUGMENT_CONFIG['per_cluster_target']
    gate_threshold: float = AUGMENT_CONFIG['gate_threshold']
    weight_strategy: WeightStrategy = WeightStrategy(AUGMENT_CONFIG['weight_strategy'])
    alpha_aug: Optional[float] = AUGMENT_CONFIG['alpha_aug']
    sigma_aug: Optional[float] = AUGMENT_CONFIG['sigma_aug']
    max_attempts_factor: int = AUGMENT_CONFIG['max_attempts_factor']

    def __post_init__(self):
        if isinstance(self.weight_strategy, str):
            try:
                self.weight_strategy = WeightStrategy(self.weight_strategy)
            except ValueError:
                choices = ", ".join(s.value for s in WEIGHT_STRATEGIES)
                raise DiarizationError("invalid_config",
                                       f"unknown weight strategy {self.weight_strategy}, expected one of {choices}")

    def validate(self):
        if not 0.0 <= self.gate_threshold <= 1.0:
            raise DiarizationError("invalid_config", "gate_threshold must lie in [0, 1]")
        if self.per_cluster_target != 'match_original':
            if not isinstance(self.per_cluster_target, int) or self.per_cluster_target < 0:
                raise DiarizationError("invalid_config", "per_cluster_target must be 'match_original' or a count")
        if self.max_attempts_factor < 1:
            raise DiarizationError("invalid_config", "max_attempts_factor must be at least 1")

    def target_for(self, original_count: int) -> int:
        if self.per_cluster_target == 'match_original':
            return original_count
        return int(self.per_cluster_target)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AugmentConfig':
        return cls(**_checked_kwargs(cls, data, 'pipeline.augment'))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'per_cluster_target': self.per_cluster_target,
            'gate_threshold': self.gate_threshold,
            'weight_strategy': self.weight_strategy.value,
            'alpha_aug': self.alpha_aug,
            'sigma_aug': self.sigma_aug,
            'max_attempts_factor': self.max_attempts_factor
        }


@dataclass
class PipelineConfig:
    """
    Three-stage diarization pipeline settings

    Attributes:
        window: Frame window in seconds
        hop: Frame hop in seconds
        initial_threshold: Affinity threshold for the first clustering
        recluster_threshold: Affinity threshold for re-clustering
        gate_threshold: Identity gate for augmented samples
        kmax: Largest speaker count the eigengap may return
        augment_enabled: Run augmentation and re-clustering
        augment: Augmentation settings
        seed: Pipeline seed, None inherits the experiment seed
        kmeans_restarts: k-means restarts
        kmeans_max_iter: Lloyd iterations per restart
    """
    window: float = DEFAULT_WINDOW
    hop: float = DEFAULT_HOP
    initial_threshold: float = INITIAL_THRESHOLD
    recluster_threshold: float = RECLUSTER_THRESHOLD
    gate_threshold: float = GATE_THRESHOLD
    kmax: int = DEFAULT_KMAX
    augment_enabled: bool = True
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    seed: Optional[int] = None
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 300

    def validate(self):
        for name in ('initial_threshold', 'recluster_threshold', 'gate_threshold'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DiarizationError("invalid_config", f"{name} {value} outside [0, 1]")
        if not self.window >= self.hop > 0:
            raise DiarizationError("invalid_config", "need window >= hop > 0")
        if self.kmax < 1:
            raise DiarizationError("invalid_config", "kmax must be at least 1")
        self.augment.validate()

    def resolved_augment(self) -> AugmentConfig:
        """Augment settings with the pipeline-level gate threshold applied"""
        return replace(self.augment, gate_threshold=self.gate_threshold)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'PipelineConfig':
        kwargs = _checked_kwargs(cls, data, 'pipeline')
        if isinstance(kwargs.get('augment'), dict):
            kwargs['augment'] = AugmentConfig.from_dict(kwargs['augment'])
        return cls(**kwargs)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'window': self.window,
            'hop': self.hop,
            'initial_threshold': self.initial_threshold,
            'recluster_threshold': self.recluster_threshold,
            'gate_threshold': self.gate_threshold,
            'kmax': self.kmax,
            'augment_enabled': self.augment_enabled,
            'augment': self.augment.to_dict(),
            'seed': self.seed,
            'kmeans_restarts': self.kmeans_restarts,
            'kmeans_max_iter': self.kmeans_max_iter
        }


@dataclass
class ScoringConfig:
    """
    Scoring settings

    Attributes:
        exclude_overlap: Leave overlapped reference speech unscored
        collar: Unscored margin around reference boundaries, seconds
        weighting: Corpus aggregation, 'recording' or 'time'
    """
    exclude_overlap: bool = SCORING_CONFIG['exclude_overlap']
    collar: float = SCORING_CONFIG['collar']
    weighting: str = SCORING_CONFIG['weighting']

    def validate(self):
        if self.collar < 0:
            raise DiarizationError("invalid_config", "collar must be non-negative")
        if self.weighting not in ('recording', 'time'):
            raise DiarizationError("invalid_config", f"unknown weighting: {self.weighting}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ScoringConfig':
        return cls(**_checked_kwargs(cls, data, 'scoring'))

    def to_dict(self) -> Dict[str, Any]:
        return {'exclude_overlap': self.exclude_overlap, 'collar': self.collar, 'weighting': self.weighting}


@dataclass
class ExperimentConfig:
    """
    Complete, serializable description of a study

    Attributes:
        seed: Master seed
        world: Embedding world parameters
        corpora: Corpora to simulate
        pipeline: Pipeline settings for the augmented arm; the baseline arm is
            the same settings with augmentation disabled
        scoring: Scoring settings
        output_dir: Where results are written
        schema_version: Config file schema version
    """
    seed: int = 0
    world: WorldConfig = field(default_factory=WorldConfig)
    corpora: List[CorpusPreset] = field(default_factory=list)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    output_dir: str = "results"
    schema_version: int = SCHEMA_VERSION

    def validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise DiarizationError("invalid_config", f"unsupported schema_version {self.schema_version}")
        if not 0 <= self.seed < 2 ** 64:
            raise DiarizationError("invalid_config", "seed must be a 64-bit unsigned integer")
        self.world.validate()
        self.pipeline.validate()
        self.scoring.validate()

    @property
    def world_seed(self) -> int:
        return self.seed if self.world.seed is None else self.world.seed

    @property
    def pipeline_seed(self) -> int:
        return self.seed if self.pipeline.seed is None else self.pipeline.seed

    def pipeline_for_arm(self, arm: str) -> PipelineConfig:
        """Pipeline settings for the 'augmented' or 'baseline' arm"""
        if arm not in ('augmented', 'baseline'):
            raise DiarizationError("invalid_config", f"unknown arm: {arm}")
        return replace(self.pipeline, augment_enabled=(arm == 'augmented'), seed=self.pipeline_seed)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        kwargs = _checked_kwargs(cls, data, 'experiment')
        if isinstance(kwargs.get('world'), dict):
            kwargs['world'] = WorldConfig.from_dict(kwargs['world'])
        if 'corpora' in kwargs:
            kwargs['corpora'] = expand_corpora(kwargs['corpora'])
        if isinstance(kwargs.get('pipeline'), dict):
            kwargs['pipeline'] = PipelineConfig.from_dict(kwargs['pipeline'])
        if isinstance(kwargs.get('scoring'), dict):
            kwargs['scoring'] = ScoringConfig.from_dict(kwargs['scoring'])
        config = cls(**kwargs)
        config.validate()
        return config

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'ExperimentConfig':
        """Read an experiment file"""
        path = Path(path)
        try:
            with open(path, 'r') as f:
                data = json.load(f)
        except FileNotFoundError:
            raise DiarizationError("io_error", f"config file not found: {path}")
        except json.JSONDecodeError as e:
            raise DiarizationError("invalid_config", f"{path}: {e}")
        logger.info(f"Loaded experiment config from {path}")
        return cls.from_dict(data)

    @classmethod
    def from_args(cls, args) -> 'ExperimentConfig':
        """Config file named by --config (defaults otherwise) with command-line overrides"""
        config = cls.load(args.config) if getattr(args, 'config', None) else cls()
        return config.apply_args(args)

    def apply_args(self, args) -> 'ExperimentConfig':
        """Command-line overrides (--seed, --out, --no-augment)"""
        if getattr(args, 'seed', None) is not None:
            self.seed = args.seed
        if getattr(args, 'out', None):
            self.output_dir = args.out
        if getattr(args, 'no_augment', False):
            self.pipeline.augment_enabled = False
        self.validate()
        return self

    def to_dict(self) -> Dict[str, Any]:
        corpora = []
        for preset in self.corpora:
            entry = {'preset': preset.kind, 'n': preset.n}
            if preset.kind == 'meeting':
                entry['durations'] = [preset.duration]
            if preset.overlap_prob:
                entry['overlap_prob'] = preset.overlap_prob
            corpora.append(entry)
        return {
            'schema_version': self.schema_version,
            'seed': self.seed,
            'world': self.world.to_dict(),
            'corpora': corpora,
            'pipeline': self.pipeline.to_dict(),
            'scoring': self.scoring.to_dict(),
            'output_dir': self.output_dir
        }
