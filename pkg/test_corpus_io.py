"""
Tests for corpus storage, hypothesis files and stage artifacts
"""

import json

import numpy as np
import pandas as pd
import pytest

from config import CorpusPreset, PipelineConfig
from core import SeededRng
from corpus_io import CorpusStore, load_hypotheses, write_artifacts, write_hypothesis
from errors import DiarizationError
from models import Annotation, SpeakerTurn, TimeInterval
from pipeline import diarize
from scoring import write_rttm
from synthworld import simulate_corpus


@pytest.fixture
def stored_corpus(tmp_path, styled_world):
    recordings = simulate_corpus(styled_world, CorpusPreset('emotional', 2), None, SeededRng(1))
    store = CorpusStore(tmp_path / 'emotional')
    store.save_corpus(recordings, {'world': styled_world.to_dict()})
    return store, recordings


def test_recordings_survive_a_round_trip(stored_corpus):
    store, recordings = stored_corpus
    reopened = CorpusStore(store.root)
    loaded = [reopened.load_recording(recording_id) for recording_id in reopened.recording_ids]
    assert [r.recording_id for r in loaded] == [r.recording_id for r in recordings]
    for original, reloaded in zip(recordings, loaded):
        assert np.array_equal(original.embedding_matrix(), reloaded.embedding_matrix())
        assert write_rttm(original.reference) == write_rttm(reloaded.reference)
        assert [f.interval for f in original.frames] == [f.interval for f in reloaded.frames]
        assert original.frame_speakers == reloaded.frame_speakers
        assert original.frame_styles == reloaded.frame_styles
        assert reloaded.duration == original.duration


def test_manifest_lists_recordings(stored_corpus):
    store, recordings = stored_corpus
    manifest = CorpusStore(store.root).load_manifest()
    assert [e['recording_id'] for e in manifest['recordings']] == ['emotional_000', 'emotional_001']
    assert manifest['world']['d'] == 48
    stats = store.get_corpus_statistics()
    assert stats['recordings'] == 2
    assert stats['total_frames'] == sum(len(r.frames) for r in recordings)


def test_references_in_manifest_order(stored_corpus):
    store, recordings = stored_corpus
    references = store.load_references()
    assert list(references) == [r.recording_id for r in recordings]


def test_missing_corpus(tmp_path):
    with pytest.raises(DiarizationError) as info:
        CorpusStore(tmp_path / 'nowhere').load_manifest()
    assert info.value.code == "corpus_not_found"


def test_unknown_recording(stored_corpus):
    store, _ = stored_corpus
    with pytest.raises(DiarizationError) as info:
        store.load_recording('emotional_999')
    assert info.value.code == "corpus_not_found"


def test_hypotheses_round_trip(tmp_path):
    hyp = Annotation('rec', (SpeakerTurn(TimeInterval(0.0, 1.5), 'cluster_0'),))
    path = write_hypothesis(tmp_path, hyp)
    assert path == tmp_path / 'rttm' / 'rec.rttm'
    assert load_hypotheses(tmp_path) == {'rec': hyp}
    assert load_hypotheses(tmp_path / 'rttm') == {'rec': hyp}


def test_empty_hypothesis_file_is_an_empty_annotation(tmp_path):
    (tmp_path / 'rttm').mkdir()
    (tmp_path / 'rttm' / 'quiet.rttm').write_text('')
    assert load_hypotheses(tmp_path) == {'quiet': Annotation('quiet')}


def test_hypothesis_directory_must_exist(tmp_path):
    with pytest.raises(DiarizationError) as info:
        load_hypotheses(tmp_path / 'none')
    assert info.value.code == "corpus_not_found"


def test_stage_artifacts(tmp_path, stored_corpus, styled_world):
    _, recordings = stored_corpus
    recording = recordings[0]
    result = diarize(recording, PipelineConfig(), styled_world)
    write_artifacts(tmp_path, recording, result)

    folder = tmp_path / 'artifacts' / recording.recording_id
    initial = pd.read_csv(folder / 'initial_labels.csv')
    assert list(initial['label']) == list(result.initial.labels)
    final = pd.read_csv(folder / 'final_labels.csv')
    assert list(final['label']) == list(result.final.labels)
    with open(folder / 'augmentation.json') as f:
        assert json.load(f)['n_augmented'] == result.n_augmented

    dump = pd.read_csv(folder / 'embeddings.csv', keep_default_na=False)
    assert len(dump) == len(recording.frames) + result.n_augmented
    assert list(dump['source']).count('augmented') == result.n_augmented
    assert set(dump['label_truth'][:len(recording.frames)]) == set(recording.reference.speakers)
