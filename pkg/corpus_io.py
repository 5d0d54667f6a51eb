"""
Corpus storage module for the diarization simulation
Reads and writes simulated corpora (manifest, reference RTTM, embedding CSV),
hypothesis RTTMs and per-recording stage artifacts
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from errors import DiarizationError
from models import Annotation, FrameEmbedding, FrameSource, TimeInterval
from pipeline import DiarizationResult
from scoring import read_rttm_file, write_rttm
from synthworld import SimulatedRecording

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
RTTM_DIR = "rttm"
EMBEDDING_DIR = "embeddings"
ARTIFACT_DIR = "artifacts"
FRAME_COLUMNS = ['frame_start', 'frame_end', 'source', 'speaker', 'style']


def _vector_columns(d: int) -> List[str]:
    return [f"v{i}" for i in range(d)]


def _write_text(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w') as f:
            f.write(text)
    except OSError as e:
        raise DiarizationError("io_error", f"{path}: {e}")


def _write_json(path: Path, data: Dict):
    _write_text(path, json.dumps(data, indent=2) + "\n")


def _write_csv(path: Path, frame: pd.DataFrame):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
    except OSError as e:
        raise DiarizationError("io_error", f"{path}: {e}")


class CorpusStore:
    """
    Directory holding one simulated corpus

    Layout:
    - manifest.json: experiment config, world, frame settings, recording list
    - rttm/<recording_id>.rttm: reference turns
    - embeddings/<recording_id>.csv: one frame per row with its true speaker and style
    """

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self._manifest: Optional[Dict] = None

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST

    def exists(self) -> bool:
        return self.manifest_path.exists()

    def save_recording(self, recording: SimulatedRecording):
        """Write one recording's reference RTTM and embedding CSV"""
        _write_text(self.root / RTTM_DIR / f"{recording.recording_id}.rttm", write_rttm(recording.reference))

        matrix = recording.embedding_matrix()
        frame = pd.DataFrame(matrix, columns=_vector_columns(matrix.shape[1]))
        frame.insert(0, 'frame_start', [f.interval.start for f in recording.frames])
        frame.insert(1, 'frame_end', [f.interval.end for f in recording.frames])
        frame.insert(2, 'source', [f.source.value for f in recording.frames])
        frame.insert(3, 'speaker', recording.frame_speakers or [""] * len(recording.frames))
        frame.insert(4, 'style', recording.frame_styles or [""] * len(recording.frames))
        _write_csv(self.root / EMBEDDING_DIR / f"{recording.recording_id}.csv", frame)

    def save_corpus(self, recordings: List[SimulatedRecording], manifest: Dict):
        """
        Write a whole corpus

        Args:
            recordings: Recordings to store
            manifest: Corpus-level metadata; the recording list is added here
        """
        self.root.mkdir(parents=True, exist_ok=True)
        for recording in recordings:
            self.save_recording(recording)
        manifest = dict(manifest)
        manifest['recordings'] = [{
            'recording_id': r.recording_id,
            'duration': r.duration,
            'n_speakers': r.true_nspk,
            'n_frames': len(r.frames)
        } for r in recordings]
        _write_json(self.manifest_path, manifest)
        self._manifest = manifest
        logger.info(f"Saved {len(recordings)} recordings to {self.root}")

    def load_manifest(self) -> Dict:
        if self._manifest is None:
            if not self.exists():
                raise DiarizationError("corpus_not_found", f"no {MANIFEST} in {self.root}")
            try:
                with open(self.manifest_path, 'r') as f:
                    self._manifest = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                raise DiarizationError("io_error", f"{self.manifest_path}: {e}")
        return self._manifest

    @property
    def recording_ids(self) -> List[str]:
        return [entry['recording_id'] for entry in self.load_manifest()['recordings']]

    def load_references(self) -> Dict[str, Annotation]:
        """Reference annotation per recording, in manifest order"""
        references = {}
        for recording_id in self.recording_ids:
            parsed = read_rttm_file(self.root / RTTM_DIR / f"{recording_id}.rttm")
            references[recording_id] = parsed.get(recording_id, Annotation(recording_id))
        return references

    def load_recording(self, recording_id: str) -> SimulatedRecording:
        """Rebuild a recording from its RTTM and embedding CSV"""
        entry = next((e for e in self.load_manifest()['recordings'] if e['recording_id'] == recording_id), None)
        if entry is None:
            raise DiarizationError("corpus_not_found", f"{recording_id} is not in {self.manifest_path}")

        reference = read_rttm_file(self.root / RTTM_DIR / f"{recording_id}.rttm").get(
            recording_id, Annotation(recording_id))
        path = self.root / EMBEDDING_DIR / f"{recording_id}.csv"
        try:
            table = pd.read_csv(path, float_precision="round_trip", keep_default_na=False)
        except OSError as e:
            raise DiarizationError("io_error", f"{path}: {e}")

        vector_columns = [c for c in table.columns if c not in FRAME_COLUMNS]
        vectors = table[vector_columns].to_numpy(dtype=np.float64)
        frames = [
            FrameEmbedding(TimeInterval(float(start), float(end)), vectors[i], FrameSource(source))
            for i, (start, end, source) in enumerate(zip(table['frame_start'], table['frame_end'], table['source']))
        ]
        return SimulatedRecording(
            recording_id=recording_id,
            reference=reference,
            frames=frames,
            frame_speakers=[str(s) for s in table['speaker']],
            frame_styles=[str(s) for s in table['style']],
            duration=float(entry.get('duration', 0.0))
        )

    def get_corpus_statistics(self) -> Dict:
        """Summary counts from the manifest"""
        entries = self.load_manifest()['recordings']
        if not entries:
            return {'recordings': 0}
        return {
            'recordings': len(entries),
            'total_duration': sum(e['duration'] for e in entries),
            'total_frames': sum(e['n_frames'] for e in entries),
            'mean_speakers': float(np.mean([e['n_speakers'] for e in entries]))
        }


def write_hypothesis(out_dir: Union[str, Path], hypothesis: Annotation) -> Path:
    path = Path(out_dir) / RTTM_DIR / f"{hypothesis.recording_id}.rttm"
    _write_text(path, write_rttm(hypothesis))
    return path


def load_hypotheses(hyp_dir: Union[str, Path]) -> Dict[str, Annotation]:
    """
    Hypothesis annotations from a directory of RTTM files

    Looks in <hyp_dir>/rttm when it exists, otherwise in hyp_dir itself. An
    empty file still yields an empty annotation named after the file.
    """
    hyp_dir = Path(hyp_dir)
    folder = hyp_dir / RTTM_DIR if (hyp_dir / RTTM_DIR).is_dir() else hyp_dir
    if not folder.is_dir():
        raise DiarizationError("corpus_not_found", f"no hypothesis directory {folder}")

    hypotheses: Dict[str, Annotation] = {}
    for path in sorted(folder.glob("*.rttm")):
        parsed = read_rttm_file(path)
        hypotheses.update(parsed)
        if path.stem not in parsed:
            hypotheses[path.stem] = Annotation(path.stem)
    return hypotheses


def write_artifacts(out_dir: Union[str, Path], recording: SimulatedRecording, result: DiarizationResult):
    """
    Stage artifacts for one recording

    Writes initial and final frame labels, the augmentation sidecar and a
    labeled embedding dump (label_system, label_truth, source, v0..) under
    <out_dir>/artifacts/<recording_id>/.
    """
    folder = Path(out_dir) / ARTIFACT_DIR / recording.recording_id
    originals = [frame for frame in recording.frames if frame.is_original]
    starts = [frame.interval.start for frame in originals]

    _write_csv(folder / "initial_labels.csv",
               pd.DataFrame({'frame_start': starts, 'label': list(result.initial.labels)}))
    _write_csv(folder / "final_labels.csv",
               pd.DataFrame({'frame_start': starts, 'label': list(result.final.labels)}))
    _write_json(folder / "augmentation.json", result.to_dict())

    frames = originals + list(result.augmented_frames)
    system = list(result.blended.labels) if result.blended is not None else list(result.final.labels)
    truth = list(recording.frame_speakers) if recording.frame_speakers else [""] * len(originals)
    truth = truth[:len(originals)] + [""] * result.n_augmented
    matrix = np.vstack([frame.embedding for frame in frames])
    dump = pd.DataFrame(matrix, columns=_vector_columns(matrix.shape[1]))
    dump.insert(0, 'label_system', system)
    dump.insert(1, 'label_truth', truth)
    dump.insert(2, 'source', [frame.source.value for frame in frames])
    _write_csv(folder / "embeddings.csv", dump)
