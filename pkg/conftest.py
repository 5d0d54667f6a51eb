"""
Shared fixtures for the diarization tests
"""

import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from config import ConversationSpec
from core import SeededRng, unit_normalize
from models import FrameEmbedding, FrameSource, TimeInterval
from synthworld import make_world, simulate_conversation

ROOT = Path(__file__).resolve().parent
SCRIPT = ROOT / "sim-diarization.py"


@pytest.fixture
def clean_world():
    """Well-separated speakers, no style variability"""
    return make_world(seed=11, d=64, K=4, alpha=0.0, sigma=0.05, max_speaker_cos=0.0)


@pytest.fixture
def styled_world():
    """Default-strength style variability in a small dimension"""
    return make_world(seed=5, d=48, K=6, alpha=0.8, sigma=0.1, max_speaker_cos=0.25)


@pytest.fixture
def two_speaker_spec():
    return ConversationSpec(n_speakers=2, duration_range=(20.0, 30.0))


@pytest.fixture
def clean_recording(clean_world, two_speaker_spec):
    return simulate_conversation(clean_world, two_speaker_spec, SeededRng(3).derive("clean"), "clean_000")


def make_frames(vectors, source=FrameSource.ORIGINAL, start=0.0, hop=0.2, window=1.0):
    """Frames at consecutive hops for a list of raw vectors"""
    frames = []
    for i, vector in enumerate(vectors):
        t = round(start + i * hop, 9)
        frames.append(FrameEmbedding(TimeInterval(t, round(t + window, 9)), unit_normalize(vector), source))
    return frames


def noisy_cluster(center, n, scale, rng):
    center = np.asarray(center, dtype=np.float64)
    return [unit_normalize(center + scale * rng.standard_normal(center.shape[0])) for _ in range(n)]


def write_config(path: Path, data: dict) -> Path:
    path.write_text(json.dumps(data, indent=2))
    return path


def run_cli(*args, cwd=None, timeout=600):
    """Run the command-line entry point and capture its output"""
    env = dict(os.environ)
    env.setdefault("PYTHONHASHSEED", "0")
    return subprocess.run([sys.executable, str(SCRIPT), *map(str, args)], capture_output=True, text=True,
                          timeout=timeout, cwd=cwd, env=env)
