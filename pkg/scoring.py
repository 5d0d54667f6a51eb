"""
Scoring module for diarization output
RTTM reading and writing, optimal speaker mapping, diarization error rate with
miss / false alarm / confusion breakdown, and corpus aggregation
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment

from core import merge_intervals, overlap_regions, subtract_intervals
from errors import DiarizationError
from models import Annotation, CorpusReport, ScoreReport, SpeakerTurn, TimeInterval

logger = logging.getLogger(__name__)

RTTM_FIELDS = 10
RTTM_LINE = "SPEAKER {rec} 1 {onset:.3f} {duration:.3f} <NA> <NA> {speaker} <NA> <NA>"
MS = 1000


def parse_rttm(text: str) -> Dict[str, Annotation]:
    """
    Parse RTTM text into annotations

    Blank lines and lines starting with '#' are ignored, as are records of
    any type other than SPEAKER.

    Args:
        text: RTTM file contents

    Returns:
        Annotation per recording id, in order of first appearance
    """
    turns: Dict[str, List[SpeakerTurn]] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith('#'):
            continue
        items = stripped.split()
        if len(items) != RTTM_FIELDS:
            raise DiarizationError("malformed_rttm", f"expected {RTTM_FIELDS} fields, got {len(items)}", line=number)
        if items[0] != "SPEAKER":
            continue
        try:
            onset, duration = float(items[3]), float(items[4])
        except ValueError:
            raise DiarizationError("malformed_rttm", f"bad onset/duration '{items[3]} {items[4]}'", line=number)
        if duration < 0:
            raise DiarizationError("bad_duration", f"negative duration {duration}", line=number)
        if onset < 0:
            raise DiarizationError("malformed_rttm", f"negative onset {onset}", line=number)
        interval = TimeInterval(onset, round(onset + duration, 3))
        turns.setdefault(items[1], []).append(SpeakerTurn(interval, items[7]))
    return {rec: Annotation(rec, tuple(rec_turns)) for rec, rec_turns in turns.items()}


def write_rttm(annotation: Annotation) -> str:
    """One SPEAKER line per turn, in annotation order"""
    lines = [RTTM_LINE.format(rec=annotation.recording_id, onset=turn.start, duration=turn.end - turn.start,
                              speaker=turn.speaker)
             for turn in annotation.turns]
    return "".join(line + "\n" for line in lines)


def read_rttm_file(path: Union[str, Path]) -> Dict[str, Annotation]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DiarizationError("io_error", f"{path}: {e}")
    try:
        return parse_rttm(text)
    except DiarizationError as e:
        raise DiarizationError(e.code, f"{path}: {e.message}", line=e.line)


def best_assignment(matrix: np.ndarray) -> List[Tuple[int, int]]:
    """
    Row/column pairs maximizing the summed matrix entries

    Pairs with zero weight are dropped, so the result is a partial matching.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.size == 0:
        return []
    rows, cols = linear_sum_assignment(-matrix)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if matrix[r, c] > 0]


def _to_ms(intervals) -> List[TimeInterval]:
    return [TimeInterval(float(round(i.start * MS)), float(round(i.end * MS))) for i in intervals]


def scored_regions(ref: Annotation, exclude_overlap: bool = True, collar: float = 0.0) -> List[TimeInterval]:
    """
    Reference speech that counts toward the score

    Args:
        ref: Reference annotation
        exclude_overlap: Remove regions with two or more reference speakers
        collar: Remove +/- collar seconds around every reference boundary

    Returns:
        Disjoint sorted regions in seconds
    """
    regions = merge_intervals(ref.intervals())
    holes = []
    if exclude_overlap:
        holes.extend(overlap_regions(ref))
    if collar > 0:
        for turn in ref.turns:
            for boundary in (turn.start, turn.end):
                holes.append(TimeInterval(max(0.0, boundary - collar), boundary + collar))
    return subtract_intervals(regions, holes)


def _activity(annotation: Annotation) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    """Merged millisecond turns per speaker as (starts, ends) arrays"""
    activity = {}
    for speaker in annotation.speakers:
        merged = merge_intervals(_to_ms(annotation.speaker_intervals(speaker)))
        activity[speaker] = (np.array([i.start for i in merged]), np.array([i.end for i in merged]))
    return activity


def _active(activity: Dict[str, Tuple[np.ndarray, np.ndarray]], t: float) -> List[str]:
    speakers = []
    for speaker, (starts, ends) in activity.items():
        k = int(np.searchsorted(starts, t, side='right')) - 1
        if k >= 0 and t < ends[k]:
            speakers.append(speaker)
    return speakers


def _elementary_segments(ref: Annotation, hyp: Annotation, regions: Sequence[TimeInterval]):
    """
    Split the scored regions at every boundary and list who is talking

    Yields (duration_ms, ref speakers, hyp speakers) per piece.
    """
    regions_ms = _to_ms(regions)
    boundaries = {b for i in regions_ms for b in (i.start, i.end)}
    for annotation in (ref, hyp):
        for interval in _to_ms(annotation.intervals()):
            boundaries.update((interval.start, interval.end))
    points = sorted(boundaries)

    ref_activity, hyp_activity = _activity(ref), _activity(hyp)
    region_starts = np.array([i.start for i in regions_ms])
    region_ends = np.array([i.end for i in regions_ms])
    for left, right in zip(points, points[1:]):
        middle = 0.5 * (left + right)
        k = int(np.searchsorted(region_starts, middle, side='right')) - 1
        if k < 0 or middle >= region_ends[k]:
            continue
        yield right - left, _active(ref_activity, middle), _active(hyp_activity, middle)


def _overlap_matrix(segments, ref_labels: List[str], hyp_labels: List[str]) -> np.ndarray:
    ref_index = {label: i for i, label in enumerate(ref_labels)}
    hyp_index = {label: j for j, label in enumerate(hyp_labels)}
    matrix = np.zeros((len(ref_labels), len(hyp_labels)))
    for duration, ref_active, hyp_active in segments:
        for r in ref_active:
            for h in hyp_active:
                matrix[ref_index[r], hyp_index[h]] += duration
    return matrix


def optimal_speaker_mapping(ref: Annotation, hyp: Annotation,
                            regions: Sequence[TimeInterval]) -> Dict[str, str]:
    """
    Injective hypothesis-to-reference label mapping with the largest joint time

    Args:
        ref: Reference annotation
        hyp: Hypothesis annotation
        regions: Scored regions in seconds

    Returns:
        Mapping hyp label -> ref label; unmatched labels are absent
    """
    segments = list(_elementary_segments(ref, hyp, regions))
    ref_labels, hyp_labels = ref.speakers, hyp.speakers
    matrix = _overlap_matrix(segments, ref_labels, hyp_labels)
    return {hyp_labels[c]: ref_labels[r] for r, c in best_assignment(matrix)}


def score(ref: Annotation, hyp: Annotation, exclude_overlap: bool = True, collar: float = 0.0) -> ScoreReport:
    """
    Diarization error rate of a hypothesis against its reference

    Errors are counted in speaker time over elementary segments of the scored
    regions: with Nr reference and Nh hypothesis speakers active, miss is
    max(0, Nr - Nh), false alarm max(0, Nh - Nr) and confusion the part of
    min(Nr, Nh) not covered by mapped pairs. Times are quantized to 1 ms.

    Args:
        ref: Reference annotation
        hyp: Hypothesis annotation for the same recording
        exclude_overlap: Leave overlapped reference speech unscored
        collar: Unscored margin around reference boundaries, seconds

    Returns:
        ScoreReport with percentages of scored reference speaker time
    """
    if ref.recording_id != hyp.recording_id:
        raise DiarizationError("id_mismatch", f"reference {ref.recording_id} vs hypothesis {hyp.recording_id}")

    regions = scored_regions(ref, exclude_overlap, collar)
    segments = list(_elementary_segments(ref, hyp, regions))
    ref_labels, hyp_labels = ref.speakers, hyp.speakers
    mapping = {hyp_labels[c]: ref_labels[r]
               for r, c in best_assignment(_overlap_matrix(segments, ref_labels, hyp_labels))}

    total = miss = fa = conf = 0.0
    for duration, ref_active, hyp_active in segments:
        n_ref, n_hyp = len(ref_active), len(hyp_active)
        correct = sum(1 for h in hyp_active if mapping.get(h) in ref_active)
        total += n_ref * duration
        miss += max(0, n_ref - n_hyp) * duration
        fa += max(0, n_hyp - n_ref) * duration
        conf += (min(n_ref, n_hyp) - correct) * duration

    if total <= 0:
        raise DiarizationError("empty_reference", f"{ref.recording_id} has no scored reference speech")

    miss_pct, fa_pct, conf_pct = (100.0 * value / total for value in (miss, fa, conf))
    return ScoreReport(
        recording_id=ref.recording_id,
        der_pct=miss_pct + fa_pct + conf_pct,
        miss_pct=miss_pct,
        fa_pct=fa_pct,
        conf_pct=conf_pct,
        nspk_est=len(hyp_labels),
        nspk_ref=len(ref_labels),
        scored_time=total / MS,
        miss_time=miss / MS,
        fa_time=fa / MS,
        conf_time=conf / MS
    )


def aggregate(reports: Sequence[ScoreReport], weighting: str = "recording") -> CorpusReport:
    """
    Corpus-level means of per-recording reports

    'recording' weighting averages the percentages; 'time' divides summed
    error times by summed scored time. Speaker counts are always averaged
    per recording.
    """
    if not reports:
        raise DiarizationError("no_reports", "nothing to aggregate")
    if weighting not in ('recording', 'time'):
        raise DiarizationError("invalid_config", f"unknown weighting: {weighting}")

    reports = list(reports)
    if weighting == 'time':
        scored = sum(r.scored_time for r in reports)
        mean_miss = 100.0 * sum(r.miss_time for r in reports) / scored
        mean_fa = 100.0 * sum(r.fa_time for r in reports) / scored
        mean_conf = 100.0 * sum(r.conf_time for r in reports) / scored
        mean_der = mean_miss + mean_fa + mean_conf
    else:
        mean_der = float(np.mean([r.der_pct for r in reports]))
        mean_miss = float(np.mean([r.miss_pct for r in reports]))
        mean_fa = float(np.mean([r.fa_pct for r in reports]))
        mean_conf = float(np.mean([r.conf_pct for r in reports]))

    return CorpusReport(
        reports=reports,
        mean_der=mean_der,
        mean_miss=mean_miss,
        mean_fa=mean_fa,
        mean_conf=mean_conf,
        mean_nspk=float(np.mean([r.nspk_est for r in reports])),
        mean_nspk_ref=float(np.mean([r.nspk_ref for r in reports])),
        count_accuracy=float(np.mean([r.nspk_est == r.nspk_ref for r in reports])),
        overestimate_rate=float(np.mean([r.nspk_est > r.nspk_ref for r in reports])),
        weighting=weighting
    )


def reports_frame(corpus: CorpusReport) -> pd.DataFrame:
    """Per-recording rows followed by an AGGREGATE row"""
    rows = [report.to_dict() for report in corpus.reports]
    rows.append({
        'recording_id': 'AGGREGATE',
        'der': corpus.mean_der,
        'miss': corpus.mean_miss,
        'fa': corpus.mean_fa,
        'conf': corpus.mean_conf,
        'nspk_est': corpus.mean_nspk,
        'nspk_ref': corpus.mean_nspk_ref,
        'scored_time': sum(r.scored_time for r in corpus.reports),
        'miss_time': sum(r.miss_time for r in corpus.reports),
        'fa_time': sum(r.fa_time for r in corpus.reports),
        'conf_time': sum(r.conf_time for r in corpus.reports)
    })
    return pd.DataFrame(rows)


def write_reports(corpus: CorpusReport, out_dir: Union[str, Path], stem: str = "scores") -> Tuple[Path, Path]:
    """
    Write the CSV and JSON score reports

    Returns:
        (csv path, json path)
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    json_path = out_dir / f"{stem}.json"
    reports_frame(corpus).to_csv(csv_path, index=False, float_format="%.6f")
    with open(json_path, 'w') as f:
        json.dump(corpus.to_dict(), f, indent=2)
    logger.info(f"Score reports written to {csv_path} and {json_path}")
    return csv_path, json_path


def score_corpus(references: Dict[str, Annotation], hypotheses: Dict[str, Annotation],
                 exclude_overlap: bool = True, collar: float = 0.0
                 ) -> Tuple[List[ScoreReport], Dict[str, DiarizationError]]:
    """
    Score every reference recording against its hypothesis

    A reference without a hypothesis and a hypothesis without a reference
    are both reported as id_mismatch errors.

    Returns:
        (reports in reference order, error per failed or unmatched recording)
    """
    reports = []
    errors: Dict[str, DiarizationError] = {}
    for recording_id, ref in references.items():
        hyp = hypotheses.get(recording_id)
        if hyp is None:
            errors[recording_id] = DiarizationError("id_mismatch", "missing hypothesis")
            continue
        try:
            reports.append(score(ref, hyp, exclude_overlap, collar))
        except DiarizationError as e:
            errors[recording_id] = e
    for recording_id in hypotheses:
        if recording_id not in references:
            errors[recording_id] = DiarizationError("id_mismatch", "hypothesis without reference")
    return reports, errors
