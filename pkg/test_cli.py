#!/usr/bin/env python3
"""
Command-line tests: run sim-diarization.py as a subprocess the way the
study scripts do and check exit codes, output files and printed tables
"""

import json

import pandas as pd
import pytest

from conftest import run_cli, write_config

CLEAN_WORLD = {'d': 64, 'K': 4, 'alpha': 0.0, 'sigma': 0.05, 'max_speaker_cos': 0.0}


@pytest.fixture
def clean_config(tmp_path):
    return write_config(tmp_path / 'clean.json', {
        'seed': 17,
        'world': CLEAN_WORLD,
        'corpora': [{'preset': 'emotional', 'n': 2}]
    })


@pytest.fixture
def simulated(tmp_path, clean_config):
    result = run_cli('simulate', '--config', clean_config, '--out', tmp_path / 'corpora')
    assert result.returncode == 0, result.stderr
    return tmp_path / 'corpora' / 'emotional'


def test_simulate_writes_corpus(simulated):
    manifest = json.loads((simulated / 'manifest.json').read_text())
    assert [e['recording_id'] for e in manifest['recordings']] == ['emotional_000', 'emotional_001']
    assert (simulated / 'rttm' / 'emotional_000.rttm').exists()
    assert (simulated / 'embeddings' / 'emotional_001.csv').exists()


def test_simulate_is_reproducible(tmp_path, clean_config):
    outputs = []
    for name in ('first', 'second'):
        workdir = tmp_path / name
        workdir.mkdir()
        result = run_cli('simulate', '--config', clean_config, '--out', 'corpora', cwd=workdir)
        assert result.returncode == 0, result.stderr
        corpus = workdir / 'corpora' / 'emotional'
        outputs.append({p.relative_to(corpus): p.read_bytes() for p in sorted(corpus.rglob('*')) if p.is_file()})
    assert outputs[0] == outputs[1]


def test_seed_override_changes_corpus(tmp_path, clean_config, simulated):
    result = run_cli('simulate', '--config', clean_config, '--seed', '18', '--out', tmp_path / 'other')
    assert result.returncode == 0, result.stderr
    first = (simulated / 'rttm' / 'emotional_000.rttm').read_text()
    assert (tmp_path / 'other' / 'emotional' / 'rttm' / 'emotional_000.rttm').read_text() != first


def test_baseline_on_clean_world_scores_zero(tmp_path, clean_config, simulated):
    hyp_dir = tmp_path / 'baseline'
    result = run_cli('diarize', '--config', clean_config, '--corpus', simulated, '--out', hyp_dir, '--no-augment')
    assert result.returncode == 0, result.stderr
    assert sorted(p.name for p in (hyp_dir / 'rttm').iterdir()) == ['emotional_000.rttm', 'emotional_001.rttm']

    result = run_cli('score', '--config', clean_config, '--ref', simulated, '--hyp', hyp_dir,
                     '--out', tmp_path / 'scores')
    assert result.returncode == 0, result.stderr
    assert result.stdout.split()[:6] == ['System', 'DER', 'Miss', 'FA', 'Conf', 'Nspk']
    scores = pd.read_csv(tmp_path / 'scores' / 'scores.csv')
    assert list(scores['recording_id']) == ['emotional_000', 'emotional_001', 'AGGREGATE']
    assert scores['der'].abs().max() < 1e-6
    assert list(scores['nspk_est'][:2]) == [2, 2]


def test_augmented_diarize_writes_artifacts(tmp_path, clean_config, simulated):
    out = tmp_path / 'augmented'
    result = run_cli('diarize', '--config', clean_config, '--corpus', simulated, '--out', out)
    assert result.returncode == 0, result.stderr
    summary = json.loads((out / 'diarization.json').read_text())
    assert summary['arm'] == 'augmented'
    for entry in summary['recordings']:
        assert entry['n_augmented'] > 0
        assert entry['outside_reference'] == 0.0
    artifacts = out / 'artifacts' / 'emotional_000'
    for name in ('initial_labels.csv', 'final_labels.csv', 'augmentation.json', 'embeddings.csv'):
        assert (artifacts / name).exists()


def test_score_against_rttm_directory(tmp_path, clean_config, simulated):
    result = run_cli('score', '--config', clean_config, '--ref', simulated / 'rttm', '--hyp', simulated / 'rttm',
                     '--out', tmp_path / 'self', '--keep-overlap', '--collar', '0.25')
    assert result.returncode == 0, result.stderr
    assert '0.00' in result.stdout


def test_missing_hypothesis_fails(tmp_path, clean_config, simulated):
    hyp_dir = tmp_path / 'partial'
    run_cli('diarize', '--config', clean_config, '--corpus', simulated, '--out', hyp_dir, '--no-augment')
    (hyp_dir / 'rttm' / 'emotional_001.rttm').unlink()
    result = run_cli('score', '--config', clean_config, '--ref', simulated, '--hyp', hyp_dir,
                     '--out', tmp_path / 'scores')
    assert result.returncode == 1
    assert 'emotional_001' in result.stderr


def test_hypothesis_without_reference_fails(tmp_path, clean_config, simulated):
    hyp_dir = tmp_path / 'extra'
    run_cli('diarize', '--config', clean_config, '--corpus', simulated, '--out', hyp_dir, '--no-augment')
    (hyp_dir / 'rttm' / 'stray.rttm').write_text('SPEAKER stray 1 0.000 1.000 <NA> <NA> cluster_0 <NA> <NA>\n')
    result = run_cli('score', '--config', clean_config, '--ref', simulated, '--hyp', hyp_dir,
                     '--out', tmp_path / 'scores')
    assert result.returncode == 1
    assert 'stray' in result.stderr and 'hypothesis without reference' in result.stderr
    scores = pd.read_csv(tmp_path / 'scores' / 'scores.csv')
    assert list(scores['recording_id']) == ['emotional_000', 'emotional_001', 'AGGREGATE']


def test_missing_corpus_fails(tmp_path, clean_config):
    result = run_cli('diarize', '--config', clean_config, '--corpus', tmp_path / 'nowhere', '--out', tmp_path / 'h')
    assert result.returncode == 1
    assert 'corpus_not_found' in result.stderr


def test_no_corpora_is_a_usage_error(tmp_path):
    config = write_config(tmp_path / 'empty.json', {'seed': 1})
    result = run_cli('simulate', '--config', config, '--out', tmp_path / 'corpora')
    assert result.returncode == 2
    assert 'no corpora' in result.stderr


def test_invalid_config_is_a_usage_error(tmp_path):
    config = write_config(tmp_path / 'bad.json', {'pipeline': {'kmax': 0}, 'corpora': [{'preset': 'emotional'}]})
    result = run_cli('simulate', '--config', config)
    assert result.returncode == 2
    assert 'invalid_config' in result.stderr


def test_unknown_command():
    assert run_cli('transcribe').returncode == 2


def test_experiment_and_report(tmp_path, clean_config):
    out = tmp_path / 'study'
    result = run_cli('experiment', '--config', clean_config, '--out', out, '--jobs', '2')
    assert result.returncode == 0, result.stderr
    assert 'emotional / baseline' in result.stdout
    assert 'emotional / augmented' in result.stdout

    sweep = pd.read_csv(out / 'sweep.csv')
    assert list(sweep['arm']) == ['baseline', 'augmented']
    summary = json.loads((out / 'summary.json').read_text())
    assert summary['audit']['gate_violations'] == 0
    assert summary['errors'] == {}
    assert (out / 'corpora' / 'emotional' / 'manifest.json').exists()
    assert (out / 'emotional' / 'baseline' / 'scores.csv').exists()

    report = run_cli('report', '--results', out)
    assert report.returncode == 0, report.stderr
    assert 'Reduction' in report.stdout
    assert 'gate_violations' in report.stdout


def test_report_without_results(tmp_path):
    result = run_cli('report', '--results', tmp_path / 'none')
    assert result.returncode == 1
    assert 'io_error' in result.stderr
