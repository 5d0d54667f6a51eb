#!/usr/bin/env python3
"""
Results table builder for diarization experiments
Prints DER / Miss / FA / Conf / Nspk summaries and the duration sweep from a
results directory written by the experiment runner
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd
from tabulate import tabulate

from errors import DiarizationError
from models import CorpusReport

logger = logging.getLogger(__name__)

SUMMARY_HEADER = ['System', 'DER', 'Miss', 'FA', 'Conf', 'Nspk']
SWEEP_FILE = 'sweep.csv'
SUMMARY_FILE = 'summary.json'
ARMS = ('baseline', 'augmented')


def summary_row(label: str, report: Union[CorpusReport, Dict]) -> List:
    """One table row from a corpus report or its dict form"""
    if isinstance(report, CorpusReport):
        report = report.to_dict()
    return [label, report['mean_der'], report['mean_miss'], report['mean_fa'], report['mean_conf'],
            report['mean_nspk']]


def format_summary_table(rows: Sequence[List]) -> str:
    return tabulate(rows, headers=SUMMARY_HEADER, floatfmt='.2f', tablefmt='simple')


def relative_reduction(baseline: float, augmented: float) -> Optional[float]:
    """Percent of the baseline error removed by augmentation"""
    if baseline <= 0:
        return None
    return 100.0 * (baseline - augmented) / baseline


def relative_reductions(sweep: pd.DataFrame) -> Dict[str, Optional[float]]:
    """Relative DER reduction per corpus, for corpora with both arms"""
    reductions = {}
    for corpus, group in sweep.groupby('corpus', sort=False):
        by_arm = group.set_index('arm')['der']
        if all(arm in by_arm.index for arm in ARMS):
            reductions[corpus] = relative_reduction(by_arm['baseline'], by_arm['augmented'])
    return reductions


def format_sweep_table(sweep: pd.DataFrame) -> str:
    """DER and Nspk per corpus and arm, with the relative reduction"""
    reductions = relative_reductions(sweep)
    rows = []
    for corpus, group in sweep.groupby('corpus', sort=False):
        by_arm = group.set_index('arm')
        duration = group['duration'].iloc[0]
        row = [corpus, None if pd.isna(duration) or duration == '' else duration]
        for arm in ARMS:
            row.append(by_arm.at[arm, 'der'] if arm in by_arm.index else None)
        for arm in ARMS:
            row.append(by_arm.at[arm, 'nspk'] if arm in by_arm.index else None)
        reduction = reductions.get(corpus)
        row.append(f"{reduction:.1f}%" if reduction is not None else "-")
        rows.append(row)
    headers = ['Corpus', 'Duration', 'DER base', 'DER aug', 'Nspk base', 'Nspk aug', 'Reduction']
    return tabulate(rows, headers=headers, floatfmt='.2f', tablefmt='simple', missingval='-')


def sweep_summary_rows(sweep: pd.DataFrame) -> List[List]:
    rows = []
    for _, record in sweep.iterrows():
        rows.append([f"{record['corpus']} / {record['arm']}", record['der'], record['miss'],
                     record['fa'], record['conf'], record['nspk']])
    return rows


def load_results(results_dir: Union[str, Path]):
    """Sweep table and summary from a results directory"""
    results_dir = Path(results_dir)
    sweep_path = results_dir / SWEEP_FILE
    if not sweep_path.exists():
        raise DiarizationError("io_error", f"no {SWEEP_FILE} in {results_dir}")
    sweep = pd.read_csv(sweep_path)
    summary = {}
    summary_path = results_dir / SUMMARY_FILE
    if summary_path.exists():
        with open(summary_path) as f:
            summary = json.load(f)
    return sweep, summary


def build_report(results_dir: Union[str, Path]) -> str:
    """Summary table, sweep table and gate audit as one text block"""
    sweep, summary = load_results(results_dir)
    parts = [format_summary_table(sweep_summary_rows(sweep)), "", format_sweep_table(sweep)]
    audit = summary.get('audit')
    if audit:
        parts.extend(["", tabulate(sorted(audit.items()), headers=['Audit', 'Value'], tablefmt='simple')])
    return "\n".join(parts)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description='Print diarization result tables')
    parser.add_argument('results', nargs='?', default='results', help='Results directory')
    args = parser.parse_args(argv)
    try:
        print(build_report(args.results))
    except DiarizationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
