"""
Result storage for the n-widths laboratory
"""
import json
import os
from typing import List, Dict, Any, Optional, Iterable

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import pandas as pd
import structlog

from exceptions import OutputExistsError
from models import SCHEMA_VERSION, WidthEstimate, SweepResult, DualityReport, ExtensionRecord, VerdictReport

logger = structlog.get_logger()

ESTIMATE_COLUMNS = ['n', 'lower', 'upper', 'method', 'certified', 'converged', 'rank']


def estimates_frame(estimates: List[WidthEstimate], label_key: Optional[str] = None,
                    labels: Optional[List[str]] = None) -> pd.DataFrame:
    """WidthEstimates as rows with the fixed columns; an optional label column goes first"""
    rows = []
    for i, e in enumerate(estimates):
        row = {
            'n': e.n,
            'lower': e.lower,
            'upper': e.upper,
            'method': '+'.join(e.method),
            'certified': e.certified,
            'converged': e.converged,
            'rank': e.rank,
        }
        if label_key:
            row[label_key] = labels[i]
        if e.m is not None:
            row['m'] = e.m
        if e.flags:
            row['flags'] = '+'.join(e.flags)
        rows.append(row)
    columns = ([label_key] if label_key else []) + ESTIMATE_COLUMNS
    extra = [c for c in ('m', 'flags') if any(c in r for r in rows)]
    return pd.DataFrame(rows, columns=columns + extra)


class WidthsStorage:
    """Writes CSV, JSON, text and plot artifacts under one output directory"""

    def __init__(self, output_dir: str = "./output", force: bool = False):
        self.output_dir = output_dir
        self.force = force
        self.logger = logger.bind(component='widths_storage')

        # Create output directory if it doesn't exist
        os.makedirs(output_dir, exist_ok=True)

    def path(self, filename: str) -> str:
        return os.path.join(self.output_dir, filename)

    def ensure_writable(self, filenames: Iterable[str]):
        """Refuse up front when any target exists and force is off"""
        if self.force:
            return
        existing = [name for name in filenames if os.path.exists(self.path(name))]
        if existing:
            self.logger.error(f"Refusing to overwrite existing outputs: {existing}")
            raise OutputExistsError(f'Output exists (use --force): {", ".join(existing)}')

    def _target(self, filename: str) -> str:
        self.ensure_writable([filename])
        return self.path(filename)

    def save_frame_csv(self, frame: pd.DataFrame, filename: str) -> str:
        """CSV with a schema_version comment line and a header row"""
        try:
            filepath = self._target(filename)
            with open(filepath, 'w', newline='', encoding='utf-8') as f:
                f.write(f'# schema_version={SCHEMA_VERSION}\n')
                frame.to_csv(f, index=False, float_format='%.12g', lineterminator='\n')

            self.logger.info(f"Saved {len(frame)} rows to {filepath}")
            return filepath

        except OutputExistsError:
            raise
        except Exception as e:
            self.logger.error(f"Error saving CSV {filename}: {e}")
            raise

    def save_estimates_csv(self, estimates: List[WidthEstimate], filename: str = 'widths.csv',
                           label_key: Optional[str] = None, labels: Optional[List[str]] = None) -> str:
        return self.save_frame_csv(estimates_frame(estimates, label_key, labels), filename)

    def save_json(self, payload: Any, filename: str) -> str:
        """Sorted-key JSON; pydantic models are dumped in JSON mode"""
        try:
            filepath = self._target(filename)
            if hasattr(payload, 'model_dump'):
                payload = payload.model_dump(mode='json')
            with open(filepath, 'w', encoding='utf-8') as f:
                json.dump(payload, f, indent=2, sort_keys=True)
                f.write('\n')

            self.logger.info(f"Saved JSON to {filepath}")
            return filepath

        except OutputExistsError:
            raise
        except Exception as e:
            self.logger.error(f"Error saving JSON {filename}: {e}")
            raise

    def save_sweep(self, result: SweepResult, frame: pd.DataFrame) -> Dict[str, str]:
        return {
            'csv': self.save_frame_csv(frame, 'sweep.csv'),
            'json': self.save_json(result, 'sweep.json'),
        }

    def save_verdict(self, report: VerdictReport, header: List[str], filename: str = 'verdict.txt') -> str:
        return self.save_text(header + report.summary_lines(), filename)

    def save_duality(self, report: DualityReport, filename: str = 'duality.csv') -> str:
        frame = pd.DataFrame([row.model_dump() for row in report.rows])
        return self.save_frame_csv(frame, filename)

    def save_extension(self, record: ExtensionRecord, filename: str = 'extension.json') -> str:
        return self.save_json(record, filename)

    def load_extension(self, filepath: str) -> ExtensionRecord:
        """Replay file back into an ExtensionRecord"""
        try:
            with open(filepath, 'r', encoding='utf-8') as f:
                record = ExtensionRecord(**json.load(f))
            self.logger.info(f"Loaded extension record from {filepath}")
            return record

        except Exception as e:
            self.logger.error(f"Error loading extension record: {e}")
            raise

    def save_text(self, lines: List[str], filename: str) -> str:
        try:
            filepath = self._target(filename)
            with open(filepath, 'w', encoding='utf-8') as f:
                f.write('\n'.join(lines) + '\n')
            self.logger.info(f"Saved text report to {filepath}")
            return filepath

        except OutputExistsError:
            raise
        except Exception as e:
            self.logger.error(f"Error saving text {filename}: {e}")
            raise

    def save_sweep_plot(self, result: SweepResult, curves: Dict[str, Any], filename: str = 'sweep.svg') -> str:
        """Log-log chart of both trackers with bracket lines"""
        try:
            filepath = self._target(filename)
            plt.rcParams['svg.hashsalt'] = 'widths'
            m = [n + 1 for n in result.n_list]
            fig, ax = plt.subplots(figsize=(7, 5))
            ax.loglog(m, [e.upper for e in result.estimates], 'ko-', label='upper (projection)')
            lowers = [e.lower for e in result.estimates]
            if all(v > 0 for v in lowers):
                ax.loglog(m, lowers, 'bs-', label='lower (trig bound)')
            for name, values in curves.items():
                ax.loglog(m, values, '--', label=name)
            ax.set_xlabel('n + 1')
            ax.set_ylabel('width estimate')
            ax.set_title(result.description)
            ax.grid(True)
            ax.legend(loc='lower left')
            fig.savefig(filepath, format='svg', bbox_inches='tight', metadata={'Date': None})
            plt.close(fig)

            self.logger.info(f"Saved sweep plot to {filepath}")
            return filepath

        except OutputExistsError:
            raise
        except Exception as e:
            self.logger.error(f"Error saving sweep plot: {e}")
            raise

    def get_storage_stats(self) -> Dict[str, Any]:
        """Get storage statistics"""
        return {
            'output_directory': self.output_dir,
            'files_in_output': len(os.listdir(self.output_dir)) if os.path.exists(self.output_dir) else 0,
        }
