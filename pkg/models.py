"""
Data models for the diarization simulation
Contains the shared data structures passed between the world simulator,
the clustering pipeline and the scorer
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Sequence, Tuple
import logging

import numpy as np

from errors import DiarizationError

logger = logging.getLogger(__name__)

# Speaker embeddings are plain float64 numpy vectors
EmbeddingVector = np.ndarray


@dataclass(frozen=True)
class TimeInterval:
    """
    Half-open stretch of the timeline, in seconds

    Attributes:
        start: Interval start
        end: Interval end, never before start
    """
    start: float
    end: float

    def __post_init__(self):
        if not (np.isfinite(self.start) and np.isfinite(self.end)):
            raise DiarizationError("bad_interval", f"non-finite bounds ({self.start}, {self.end})")
        if self.end < self.start:
            raise DiarizationError("bad_interval", f"end {self.end} before start {self.start}")

    @property
    def duration(self) -> float:
        return self.end - self.start

    def to_dict(self) -> Dict:
        return {'start': self.start, 'end': self.end}


@dataclass(frozen=True)
class SpeakerTurn:
    """
    One stretch of speech by one speaker

    Attributes:
        interval: When the speaker talks; always on the timeline (start >= 0)
        speaker: Opaque speaker label
    """
    interval: TimeInterval
    speaker: str

    def __post_init__(self):
        if self.interval.start < 0:
            raise DiarizationError("bad_interval", f"turn for {self.speaker} starts before 0")

    @property
    def start(self) -> float:
        return self.interval.start

    @property
    def end(self) -> float:
        return self.interval.end

    def to_dict(self) -> Dict:
        return {'speaker': self.speaker, **self.interval.to_dict()}


@dataclass(frozen=True)
class Annotation:
    """
    Who-spoke-when for one recording, used for references and hypotheses alike

    Turns are kept sorted by start time with ties broken by speaker label.

    Attributes:
        recording_id: Identifier of the recording
        turns: Sorted speaker turns
    """
    recording_id: str
    turns: Tuple[SpeakerTurn, ...] = ()

    def __post_init__(self):
        ordered = tuple(sorted(self.turns, key=lambda t: (t.start, t.speaker, t.end)))
        object.__setattr__(self, 'turns', ordered)

    @property
    def speakers(self) -> List[str]:
        """Distinct speaker labels, sorted"""
        return sorted({turn.speaker for turn in self.turns})

    @property
    def total_speech_duration(self) -> float:
        """Length of the union of all turns"""
        # Imported here to keep models free of an import cycle with core
        from core import interval_total
        return interval_total([turn.interval for turn in self.turns])

    def intervals(self) -> List[TimeInterval]:
        return [turn.interval for turn in self.turns]

    def speaker_intervals(self, speaker: str) -> List[TimeInterval]:
        return [turn.interval for turn in self.turns if turn.speaker == speaker]

    def to_dict(self) -> Dict:
        return {
            'recording_id': self.recording_id,
            'turns': [turn.to_dict() for turn in self.turns]
        }


class FrameSource(Enum):
    """Where a frame embedding came from"""
    ORIGINAL = "original"
    AUGMENTED = "augmented"


@dataclass(frozen=True, eq=False)
class FrameEmbedding:
    """
    Speaker embedding of one analysis window

    Attributes:
        interval: Window the frame covers (off-timeline, negative, for augmented frames)
        embedding: Unit-norm embedding vector
        source: Original recording frame or augmented sample
    """
    interval: TimeInterval
    embedding: EmbeddingVector
    source: FrameSource = FrameSource.ORIGINAL

    @property
    def is_original(self) -> bool:
        return self.source is FrameSource.ORIGINAL


@dataclass(frozen=True)
class ClusterAssignment:
    """
    Cluster label per frame

    Attributes:
        labels: Cluster id per frame, every id in 0..k-1 used at least once
        k: Number of clusters
    """
    labels: Tuple[int, ...]
    k: int

    def __post_init__(self):
        used = set(self.labels)
        if self.labels and used != set(range(self.k)):
            raise DiarizationError("bad_assignment", f"labels {sorted(used)} do not cover 0..{self.k - 1}")

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> 'ClusterAssignment':
        """Renumber arbitrary labels by order of first appearance"""
        renumber: Dict[int, int] = {}
        canonical = []
        for label in labels:
            label = int(label)
            if label not in renumber:
                renumber[label] = len(renumber)
            canonical.append(renumber[label])
        return cls(tuple(canonical), len(renumber))

    def __len__(self) -> int:
        return len(self.labels)

    def members(self, cluster_id: int) -> List[int]:
        return [i for i, label in enumerate(self.labels) if label == cluster_id]

    def to_dict(self) -> Dict:
        return {'k': self.k, 'labels': list(self.labels)}


@dataclass
class ScoreReport:
    """
    Diarization error breakdown for one recording

    Percentages are relative to the scored reference speaker time.

    Attributes:
        recording_id: Scored recording
        der_pct: Diarization error rate
        miss_pct: Missed speech
        fa_pct: False alarm speech
        conf_pct: Speaker confusion
        nspk_est: Distinct hypothesis speakers
        nspk_ref: Distinct reference speakers
        scored_time: Scored reference speaker time in seconds
        miss_time: Missed speech in seconds
        fa_time: False alarm in seconds
        conf_time: Confusion in seconds
    """
    recording_id: str
    der_pct: float
    miss_pct: float
    fa_pct: float
    conf_pct: float
    nspk_est: int
    nspk_ref: int
    scored_time: float
    miss_time: float = 0.0
    fa_time: float = 0.0
    conf_time: float = 0.0

    def to_dict(self) -> Dict:
        return {
            'recording_id': self.recording_id,
            'der': self.der_pct,
            'miss': self.miss_pct,
            'fa': self.fa_pct,
            'conf': self.conf_pct,
            'nspk_est': self.nspk_est,
            'nspk_ref': self.nspk_ref,
            'scored_time': self.scored_time,
            'miss_time': self.miss_time,
            'fa_time': self.fa_time,
            'conf_time': self.conf_time
        }


@dataclass
class CorpusReport:
    """
    Aggregate of per-recording score reports

    Attributes:
        reports: Member reports in corpus order
        mean_der: Mean DER
        mean_miss: Mean missed speech
        mean_fa: Mean false alarm
        mean_conf: Mean confusion
        mean_nspk: Mean estimated speaker count
        mean_nspk_ref: Mean reference speaker count
        count_accuracy: Fraction of recordings with the right speaker count
        overestimate_rate: Fraction of recordings with too many speakers
        weighting: 'recording' (unweighted mean) or 'time' (scored-time weighted)
    """
    reports: List[ScoreReport]
    mean_der: float
    mean_miss: float
    mean_fa: float
    mean_conf: float
    mean_nspk: float
    mean_nspk_ref: float = 0.0
    count_accuracy: float = 0.0
    overestimate_rate: float = 0.0
    weighting: str = "recording"

    def to_dict(self) -> Dict:
        return {
            'weighting': self.weighting,
            'recordings': len(self.reports),
            'mean_der': self.mean_der,
            'mean_miss': self.mean_miss,
            'mean_fa': self.mean_fa,
            'mean_conf': self.mean_conf,
            'mean_nspk': self.mean_nspk,
            'mean_nspk_ref': self.mean_nspk_ref,
            'count_accuracy': self.count_accuracy,
            'overestimate_rate': self.overestimate_rate,
            'reports': [report.to_dict() for report in self.reports]
        }
