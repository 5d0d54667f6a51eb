"""
Main diarization experiment module
Coordinates corpus simulation, the diarization pipeline and scoring, and
provides the command-line interface
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import pandas as pd
from tqdm import tqdm

from config import LOG_CONFIG, ExperimentConfig, PipelineConfig, ScoringConfig, WorldConfig
from core import SeededRng, interval_total, subtract_intervals
from corpus_io import CorpusStore, load_hypotheses, write_artifacts, write_hypothesis
from errors import DiarizationError
from generate_results_table import (
    SUMMARY_FILE, SWEEP_FILE, build_report, format_summary_table, format_sweep_table,
    relative_reductions, summary_row
)
from models import Annotation, CorpusReport
from pipeline import diarize
from scoring import aggregate, score_corpus, write_reports
from synthworld import World, simulate_corpus, world_from_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUN_ERROR = 1
EXIT_USAGE = 2

CORPORA_DIR = "corpora"
ARMS = ('baseline', 'augmented')


class UsageError(Exception):
    """Command line or config problem detected before any work starts"""


class ExperimentRunner:
    """
    Diarization experiment orchestrator

    Coordinates:
    - Corpus simulation and storage
    - Diarization of stored corpora, one recording per task
    - Scoring against reference RTTMs
    - Duration sweeps over both pipeline arms
    """

    def __init__(self, config: ExperimentConfig, jobs: int = 1, log_level: Optional[str] = None,
                 log_file: Optional[str] = None):
        if jobs < 1:
            raise UsageError("--jobs must be at least 1")
        self.config = config
        self.jobs = jobs
        self.errors: Dict[str, str] = {}
        self._setup_logging(log_level or LOG_CONFIG['level'], log_file or LOG_CONFIG['file'])
        logger.info(f"Experiment runner initialized (seed {config.seed}, {jobs} jobs)")

    def _setup_logging(self, level: str, log_file: Optional[str]):
        """Setup logging configuration; diagnostics go to stderr and optionally a file"""
        handlers = [logging.StreamHandler(sys.stderr)]
        if log_file:
            handlers.append(logging.FileHandler(log_file))
        logging.basicConfig(level=getattr(logging, level), format=LOG_CONFIG['format'],
                            handlers=handlers, force=True)

    def _map(self, fn: Callable, items: Sequence, desc: str) -> List:
        """Apply fn to every item on the worker pool; results keep item order"""
        results = [None] * len(items)
        with ThreadPoolExecutor(max_workers=self.jobs) as executor, \
                tqdm(total=len(items), desc=desc, file=sys.stderr, disable=None, leave=False) as bar:
            futures = {executor.submit(fn, item): i for i, item in enumerate(items)}
            for future in as_completed(futures):
                results[futures[future]] = future.result()
                bar.update(1)
        return results

    def _record_error(self, key: str, error: Exception):
        self.errors[key] = str(error)
        logger.error(f"{key}: {error}")

    @property
    def world(self) -> World:
        return world_from_config(self.config.world, self.config.world_seed)

    def simulate(self, out_dir: Path) -> Dict[str, Path]:
        """
        Simulate every configured corpus and store it on disk

        Args:
            out_dir: Parent directory; each corpus goes to <out_dir>/<corpus name>

        Returns:
            Corpus directory per corpus name
        """
        world = self.world
        window, hop = self.config.pipeline.window, self.config.pipeline.hop
        stores = {}
        for preset in self.config.corpora:
            rng = SeededRng(self.config.seed).derive("corpus", preset.name)
            try:
                recordings = simulate_corpus(world, preset, None, rng, window, hop)
                store = CorpusStore(out_dir / preset.name)
                store.save_corpus(recordings, {
                    'schema_version': self.config.schema_version,
                    'corpus': preset.to_dict(),
                    'world': world.to_dict(),
                    'window': window,
                    'hop': hop,
                    'config': self.config.to_dict()
                })
            except DiarizationError as e:
                self._record_error(preset.name, e)
                continue
            stores[preset.name] = store.root
        return stores

    def diarize_corpus(self, corpus_dir: Path, pipeline: PipelineConfig, out_dir: Path,
                       artifacts: bool = True) -> List[Dict]:
        """
        Diarize every recording of a stored corpus

        Args:
            corpus_dir: Corpus written by simulate
            pipeline: Pipeline settings for this arm
            out_dir: Receives rttm/, artifacts/ and diarization.json
            artifacts: Write per-recording stage artifacts

        Returns:
            Per-recording result summaries, in manifest order
        """
        store = CorpusStore(corpus_dir)
        manifest = store.load_manifest()
        world_data = dict(manifest['world'])
        world = world_from_config(WorldConfig.from_dict(world_data), world_data['seed'])

        corpus_window, corpus_hop = manifest.get('window', pipeline.window), manifest.get('hop', pipeline.hop)
        if (corpus_window, corpus_hop) != (pipeline.window, pipeline.hop):
            logger.warning(f"Using the corpus frame settings window={corpus_window} hop={corpus_hop}")
            pipeline = replace(pipeline, window=corpus_window, hop=corpus_hop)

        def run(recording_id: str) -> Dict:
            try:
                recording = store.load_recording(recording_id)
                result = diarize(recording, pipeline, world)
                write_hypothesis(out_dir, result.hypothesis)
                if artifacts:
                    write_artifacts(out_dir, recording, result)
            except DiarizationError as e:
                self._record_error(recording_id, e)
                return {'recording_id': recording_id, 'error': str(e)}
            summary = result.to_dict()
            outside = subtract_intervals(result.hypothesis.intervals(), recording.reference.intervals())
            summary['outside_reference'] = interval_total(outside)
            return summary

        arm = 'augmented' if pipeline.augment_enabled else 'baseline'
        results = self._map(run, store.recording_ids, f"diarize {corpus_dir.name} ({arm})")
        with open(out_dir / 'diarization.json', 'w') as f:
            json.dump({'corpus': str(corpus_dir), 'arm': arm, 'pipeline': pipeline.to_dict(),
                       'recordings': results}, f, indent=2)
        return results

    def score_corpus(self, references: Dict[str, Annotation], hyp_dir: Path, scoring: ScoringConfig,
                     out_dir: Path) -> Optional[CorpusReport]:
        """
        Score hypotheses against references and write the reports

        Returns:
            Aggregate report, None when nothing could be scored
        """
        hypotheses = load_hypotheses(hyp_dir)
        reports, errors = score_corpus(references, hypotheses, scoring.exclude_overlap, scoring.collar)
        for recording_id, error in errors.items():
            self._record_error(recording_id, error)
        if not reports:
            self._record_error(str(hyp_dir), DiarizationError("no_reports", "no recording could be scored"))
            return None
        corpus = aggregate(reports, scoring.weighting)
        write_reports(corpus, out_dir)
        return corpus

    def run_experiment(self) -> Dict:
        """
        Full study: simulate, diarize both arms, score, and tabulate

        Returns:
            Summary with the sweep rows, relative reductions and the gate audit
        """
        out_dir = Path(self.config.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / 'experiment.json', 'w') as f:
            json.dump(self.config.to_dict(), f, indent=2)

        stores = self.simulate(out_dir / CORPORA_DIR)
        arms = ARMS if self.config.pipeline.augment_enabled else ARMS[:1]
        rows = []
        audit = {'augmented_frames': 0, 'gate_violations': 0, 'outside_reference': 0.0,
                 'min_accepted_cos': None, 'max_augmented_ratio': 0.0}

        for preset in self.config.corpora:
            if preset.name not in stores:
                continue
            references = CorpusStore(stores[preset.name]).load_references()
            for arm in arms:
                arm_dir = out_dir / preset.name / arm
                arm_dir.mkdir(parents=True, exist_ok=True)
                results = self.diarize_corpus(stores[preset.name], self.config.pipeline_for_arm(arm), arm_dir,
                                              artifacts=False)
                self._audit(results, audit)
                corpus = self.score_corpus(references, arm_dir, self.config.scoring, arm_dir)
                if corpus is None:
                    continue
                rows.append({
                    'corpus': preset.name,
                    'kind': preset.kind,
                    'duration': preset.duration if preset.duration is not None else '',
                    'arm': arm,
                    'der': corpus.mean_der,
                    'miss': corpus.mean_miss,
                    'fa': corpus.mean_fa,
                    'conf': corpus.mean_conf,
                    'nspk': corpus.mean_nspk,
                    'nspk_ref': corpus.mean_nspk_ref,
                    'count_accuracy': corpus.count_accuracy,
                    'overestimate_rate': corpus.overestimate_rate,
                    'n': len(corpus.reports)
                })

        sweep = pd.DataFrame(rows, columns=['corpus', 'kind', 'duration', 'arm', 'der', 'miss', 'fa', 'conf',
                                            'nspk', 'nspk_ref', 'count_accuracy', 'overestimate_rate', 'n'])
        sweep.to_csv(out_dir / SWEEP_FILE, index=False, float_format="%.6f")
        summary = {
            'config': self.config.to_dict(),
            'rows': rows,
            'relative_reduction': relative_reductions(sweep) if rows else {},
            'audit': audit,
            'errors': dict(sorted(self.errors.items()))
        }
        with open(out_dir / SUMMARY_FILE, 'w') as f:
            json.dump(summary, f, indent=2)
        logger.info(f"Experiment results written to {out_dir}")
        return summary

    def _audit(self, results: List[Dict], audit: Dict):
        """Fold gate and balance bookkeeping of one arm into the audit"""
        for result in results:
            audit['outside_reference'] += result.get('outside_reference', 0.0)
            for stats in result.get('augmentation', []):
                audit['augmented_frames'] += stats['balanced']
                if stats['n_original']:
                    audit['max_augmented_ratio'] = max(audit['max_augmented_ratio'],
                                                       stats['balanced'] / stats['n_original'])
                cos = stats['min_accepted_cos']
                if cos is None:
                    continue
                if cos < stats['gate_threshold']:
                    audit['gate_violations'] += 1
                if audit['min_accepted_cos'] is None or cos < audit['min_accepted_cos']:
                    audit['min_accepted_cos'] = cos


def _runner(args, config: ExperimentConfig) -> ExperimentRunner:
    level = 'DEBUG' if args.debug else None
    return ExperimentRunner(config, jobs=args.jobs, log_level=level, log_file=args.log_file)


def _require_corpora(config: ExperimentConfig):
    if not config.corpora:
        raise UsageError("no corpora configured; list at least one preset under 'corpora'")


def cmd_simulate(args) -> int:
    """simulate: write the configured corpora under --out"""
    config = ExperimentConfig.from_args(args)
    _require_corpora(config)
    runner = _runner(args, config)
    stores = runner.simulate(Path(config.output_dir))
    for name, root in stores.items():
        logger.info(f"Corpus {name}: {CorpusStore(root).get_corpus_statistics()}")
    return EXIT_RUN_ERROR if runner.errors else EXIT_OK


def cmd_diarize(args) -> int:
    """diarize: hypothesis RTTMs and stage artifacts for one stored corpus"""
    config = ExperimentConfig.from_args(args)
    runner = _runner(args, config)
    corpus_dir = Path(args.corpus)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    arm = 'augmented' if config.pipeline.augment_enabled else 'baseline'
    try:
        runner.diarize_corpus(corpus_dir, config.pipeline_for_arm(arm), out_dir)
    except DiarizationError as e:
        runner._record_error(str(corpus_dir), e)
    return EXIT_RUN_ERROR if runner.errors else EXIT_OK


def cmd_score(args) -> int:
    """score: compare hypothesis RTTMs with references, print the summary table"""
    config = ExperimentConfig.from_args(args)
    if args.keep_overlap:
        config.scoring.exclude_overlap = False
    if args.collar is not None:
        config.scoring.collar = args.collar
    config.scoring.validate()
    runner = _runner(args, config)

    ref_dir = Path(args.ref)
    try:
        store = CorpusStore(ref_dir)
        references = store.load_references() if store.exists() else load_hypotheses(ref_dir)
        corpus = runner.score_corpus(references, Path(args.hyp), config.scoring, Path(config.output_dir))
    except DiarizationError as e:
        runner._record_error(str(ref_dir), e)
        corpus = None
    if corpus is not None:
        print(format_summary_table([summary_row(Path(args.hyp).name or 'hypothesis', corpus)]))
    return EXIT_RUN_ERROR if runner.errors else EXIT_OK


def cmd_experiment(args) -> int:
    """experiment: the full study from one config file"""
    config = ExperimentConfig.from_args(args)
    _require_corpora(config)
    runner = _runner(args, config)
    summary = runner.run_experiment()
    if summary['rows']:
        sweep = pd.DataFrame(summary['rows'])
        rows = [summary_row(f"{row['corpus']} / {row['arm']}",
                            {'mean_der': row['der'], 'mean_miss': row['miss'], 'mean_fa': row['fa'],
                             'mean_conf': row['conf'], 'mean_nspk': row['nspk']})
                for row in summary['rows']]
        print(format_summary_table(rows))
        print()
        print(format_sweep_table(sweep))
    return EXIT_RUN_ERROR if runner.errors else EXIT_OK


def cmd_report(args) -> int:
    """report: print the tables of an experiment results directory"""
    print(build_report(args.results))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, help='Experiment config file (JSON)')
    common.add_argument('--seed', type=int, help='Master seed (unsigned 64-bit)')
    common.add_argument('--jobs', type=int, default=1, help='Recordings processed in parallel')
    common.add_argument('--out', type=str, help='Output directory')
    common.add_argument('--debug', action='store_true', help='Enable debug logging')
    common.add_argument('--log-file', type=str, help='Also write the log to this file')

    parser = argparse.ArgumentParser(description='Diarization with style-controllable augmentation')
    subparsers = parser.add_subparsers(dest='command', required=True)

    simulate_parser = subparsers.add_parser('simulate', parents=[common], help='Simulate corpora')
    simulate_parser.set_defaults(handler=cmd_simulate)

    diarize_parser = subparsers.add_parser('diarize', parents=[common], help='Diarize a stored corpus')
    diarize_parser.add_argument('--corpus', type=str, required=True, help='Corpus directory')
    diarize_parser.add_argument('--no-augment', action='store_true', help='Run the single-pass baseline')
    diarize_parser.set_defaults(handler=cmd_diarize)

    score_parser = subparsers.add_parser('score', parents=[common], help='Score hypothesis RTTMs')
    score_parser.add_argument('--ref', type=str, required=True, help='Corpus or reference RTTM directory')
    score_parser.add_argument('--hyp', type=str, required=True, help='Hypothesis RTTM directory')
    score_parser.add_argument('--keep-overlap', action='store_true', help='Score overlapped speech too')
    score_parser.add_argument('--collar', type=float, help='Unscored collar in seconds')
    score_parser.set_defaults(handler=cmd_score)

    experiment_parser = subparsers.add_parser('experiment', parents=[common], help='Run a full study')
    experiment_parser.add_argument('--no-augment', action='store_true', help='Run the baseline arm only')
    experiment_parser.set_defaults(handler=cmd_experiment)

    report_parser = subparsers.add_parser('report', parents=[common], help='Print result tables')
    report_parser.add_argument('--results', type=str, default='results', help='Experiment results directory')
    report_parser.set_defaults(handler=cmd_report)
    return parser


def main(argv=None) -> int:
    """Main entry point for the experiment runner"""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DiarizationError as e:
        if e.code == 'invalid_config':
            parser.print_usage(sys.stderr)
            print(f"error: {e}", file=sys.stderr)
            return EXIT_USAGE
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUN_ERROR
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUN_ERROR


if __name__ == "__main__":
    sys.exit(main())
