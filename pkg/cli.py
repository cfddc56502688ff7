"""
Command-line driver: widths, sweep, extension-demo and duality
"""
import argparse
import os
import sys
from typing import Dict, List, Optional

import structlog

# Add current directory to path for imports
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from config import COMMANDS, Config, ScenarioConfig
from exceptions import OutputExistsError, ScenarioError
from pipeline import WidthsLabPipeline, configure_logging

logger = structlog.get_logger()

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_EXISTS = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so main() owns the exit codes"""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='widths-lab', description='Numerical laboratory for n-widths')
    parser.add_argument('command', choices=COMMANDS)
    parser.add_argument('--config', help='key=value scenario file')
    parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='K=V',
                        help='override one scenario key (repeatable)')
    parser.add_argument('--out', help='output directory')
    parser.add_argument('--seed', type=int, help='master seed')
    parser.add_argument('--plot', action='store_true', help='write a static SVG plot for sweeps')
    parser.add_argument('--force', action='store_true', help='overwrite existing outputs')
    return parser


def parse_overrides(pairs: List[str]) -> Dict[str, str]:
    overrides = {}
    for pair in pairs:
        key, sep, value = pair.partition('=')
        if not sep or not key.strip():
            raise UsageError(f'Override must look like key=value, got {pair!r}')
        overrides[key.strip()] = value.strip()
    return overrides


def summarize(command: str, results: dict) -> List[str]:
    """Console lines for a finished command; uncertified numbers keep their flag"""
    lines = []
    if command == 'widths':
        for label, e in zip(results['labels'], results['estimates']):
            lines.append(f'{label:>10}  n={e.n}  [{e.lower:.6g}, {e.upper:.6g}]  gap={e.gap:.3g}  '
                         f'certified={e.certified}  converged={e.converged}')
    elif command == 'sweep':
        report = results['verdict']
        lines.append(results['sweep'].description)
        lines.extend(report.summary_lines() if report else ['verdict: NONE (unclassified regime)'])
    elif command == 'extension-demo':
        for e in results['chain']:
            lines.append(f'm={e.m}  [{e.lower:.6g}, {e.upper:.6g}]  certified={e.certified}')
        if 'margin' in results:
            lines.append(f'chain margin: {results["margin"]:.6g}')
        if results.get('slack'):
            lines.append(f'sampling slack: {results["slack"]:.3g}')
        if 'certificate' in results:
            lines.append(f'certified margin: {results["certificate"]["certified_margin"]:.6g} '
                         f'(certified={results["certificate"]["certified"]})')
    elif command == 'duality':
        report = results['report']
        lines.append(f'rows: {len(report.rows)}  max gelfand gap: {report.max_gelfand_gap:.4g}  '
                     f'max linear gap: {report.max_linear_gap:.4g}  passed={report.passed}')
    lines.extend(f'wrote {path}' for path in results.get('saved_files', []))
    return lines


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code"""
    try:
        args = build_parser().parse_args(argv)
        overrides = parse_overrides(args.overrides)
        if args.seed is not None:
            overrides['seed'] = str(args.seed)
        configure_logging()
        if not Config.validate_config():
            raise UsageError('Invalid WIDTHS_* environment settings')
        scenario = ScenarioConfig.from_sources(args.command, args.config, overrides)
    except (UsageError, ScenarioError) as e:
        print(f'error: {e}', file=sys.stderr)
        return EXIT_USAGE

    try:
        pipeline = WidthsLabPipeline(scenario, output_dir=args.out or Config.OUTPUT_DIR,
                                     force=args.force, plot=args.plot)
        results = pipeline.run()
    except OutputExistsError as e:
        print(f'error: {e}', file=sys.stderr)
        return EXIT_EXISTS
    except ScenarioError as e:
        print(f'error: {e}', file=sys.stderr)
        return EXIT_USAGE

    if not results['success']:
        print(f'error: {results["error"]}', file=sys.stderr)
        return EXIT_FAILED
    for line in summarize(args.command, results):
        print(line)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
