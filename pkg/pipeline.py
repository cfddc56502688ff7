"""
Main orchestrator for the n-widths laboratory
"""
import logging
import os
import sys
import time
from typing import List, Dict, Any, Optional, Tuple

import numpy as np
import structlog

# Add current directory to path for imports
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from config import Config, ScenarioConfig
from classes import (FunctionClass, MultiplierSequence, custom, exponential, predicted_orders,
                     regime_classify, sobolev, super_small)
from exceptions import OutputExistsError, RegimeError, ScenarioError, WidthsLabError
from extension_lab import (STRICT_GAP_MARGIN, exhaustive_gap_certificate, extension_record, hilbert_fixture,
                           preabsolute_chain, strict_gap_fixture)
from finite_spaces import CompactBody, FiniteNormedSpace, dual_ball_sample, polytope, weighted_lp
from models import DualityReport, SearchBudget, SmoothnessRegime, WidthEstimate
from storage import WidthsStorage
import asymptotics
import widths_engine

OUTPUT_FILES = {
    'widths': ['widths.csv', 'widths.json'],
    'sweep': ['sweep.csv', 'sweep.json', 'verdict.txt'],
    'extension-demo': ['chain.csv', 'extension.json'],
    'duality': ['duality.csv'],
}


def configure_logging(level: str = None):
    """structlog with a JSON renderer on stderr"""
    level = (level or Config.LOG_LEVEL).upper()
    logging.basicConfig(format='%(message)s', stream=sys.stderr, level=getattr(logging, level, logging.INFO))
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            structlog.processors.JSONRenderer()
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


logger = structlog.get_logger()


def build_multiplier(scenario: ScenarioConfig) -> MultiplierSequence:
    """Multiplier sequence named by the scenario's regime key"""
    def need(name):
        value = getattr(scenario, name)
        if value is None:
            raise ScenarioError(f'{scenario.regime} classes need {name}')
        return value

    if scenario.regime == 'sobolev':
        return sobolev(need('r'))
    if scenario.regime == 'super_small':
        return super_small(need('rho'), scenario.p, scenario.q)
    if scenario.regime == 'exponential':
        return exponential(need('mu'), need('gamma'))
    if scenario.regime == 'custom':
        return custom(need('custom'))
    raise ScenarioError(f'Unknown regime: {scenario.regime}')


def build_spaces(scenario: ScenarioConfig) -> Tuple[CompactBody, FiniteNormedSpace]:
    """A = diag . B(l_p^d) and the target space of a widths scenario"""
    d = scenario.dimension
    diag = scenario.diag or [1.0 / k for k in range(1, d + 1)]
    A = CompactBody(p=scenario.p, diag=diag)
    if scenario.target == 'polytope':
        X = polytope(scenario.parsed_facets())
        if X.dim != d:
            raise ScenarioError(f'Facets have dimension {X.dim}, expected {d}')
    else:
        X = weighted_lp(d, scenario.q)
    return A, X


class WidthsLabPipeline:
    """One scenario in, result files out"""

    def __init__(self, scenario: ScenarioConfig, output_dir: Optional[str] = None,
                 force: bool = False, plot: bool = False):
        self.scenario = scenario
        self.plot = plot
        self.logger = logger.bind(component='pipeline', command=scenario.command)
        self.storage = WidthsStorage(output_dir=output_dir or Config.OUTPUT_DIR, force=force)
        self.budget = SearchBudget(restarts=scenario.restarts, inner_starts=scenario.inner_starts,
                                   max_iter=scenario.max_iter, alt_rounds=scenario.alt_rounds,
                                   workers=scenario.workers, seed=scenario.seed)

    def _failed_row(self, n: int, lower: float, error: Exception) -> WidthEstimate:
        self.logger.error(f"Width computation failed: {error}", n=n)
        return WidthEstimate(n=n, lower=lower, upper=float('nan'), method=['failed'],
                             converged=False, flags=[f'search-failed: {error}'])

    def run_widths(self) -> Dict[str, Any]:
        """Oracle and search brackets for one finite-dimensional scenario"""
        s = self.scenario
        self.storage.ensure_writable(OUTPUT_FILES['widths'])
        A, X = build_spaces(s)
        requested = list(s.widths)
        labels, rows = [], []

        if 'oracle' in requested:
            if s.p == 2 and s.q == 2 and X.kind == 'lp':
                u = widths_engine.DiagonalOperator(entries=A.diag, p=2.0, q=2.0)
                labels.append('oracle')
                rows.append(widths_engine.svd_oracle(u, s.n))
            else:
                self.logger.info("SVD oracle not applicable", p=s.p, q=s.q, target=X.kind)

        searches = [w for w in requested if w in ('kolmogorov', 'gelfand', 'linear')]
        bundle = {}
        if {'kolmogorov', 'gelfand', 'linear'} <= set(searches):
            try:
                bundle = widths_engine.width_bundle(A, X, s.n, self.budget)
            except WidthsLabError as e:
                self.logger.warning(f"Cross-seeded bundle unavailable, searching separately: {e}")
        lower, _ = widths_engine.certified_lower(A, X, s.n)
        for name in searches:
            try:
                if name in bundle:
                    estimate = bundle[name]
                elif name == 'kolmogorov':
                    estimate = widths_engine.kolmogorov_search(A, X, s.n, self.budget)
                elif name == 'gelfand':
                    estimate, _ = widths_engine.gelfand_search(A, X, s.n, self.budget)
                else:
                    estimate = widths_engine.linear_search(A, X, s.n, self.budget)
            except WidthsLabError as e:
                estimate = self._failed_row(s.n, lower, e)
            labels.append(name)
            rows.append(estimate)

        if 'cowidth' in requested:
            labels.append('cowidth')
            try:
                rows.append(widths_engine.cowidth(A, X, s.n, self.budget))
            except WidthsLabError as e:
                rows.append(self._failed_row(s.n, 2 * lower, e))

        saved = [
            self.storage.save_estimates_csv(rows, 'widths.csv', label_key='width', labels=labels),
            self.storage.save_json([{'width': label, 'estimate': e.model_dump(mode='json')}
                                    for label, e in zip(labels, rows)], 'widths.json'),
        ]
        return {'labels': labels, 'estimates': rows, 'saved_files': saved}

    def _predicted(self, cls: FunctionClass) -> Tuple[SmoothnessRegime, Any]:
        s = self.scenario
        regime = regime_classify(cls.multiplier, s.p, s.q)
        if regime == SmoothnessRegime.UNCLASSIFIED and s.assume_regime:
            self.logger.warning("Classifier abstained; using the assumed regime",
                                assumed=s.assume_regime, p=s.p, q=s.q)
            regime = SmoothnessRegime(s.assume_regime)
        try:
            return regime, predicted_orders(regime, s.p, s.q, cls.multiplier)
        except RegimeError as e:
            self.logger.warning(f"No predicted bracket: {e}")
            return regime, None

    def run_sweep(self) -> Dict[str, Any]:
        """Sweep, fits and verdict for one multiplier class"""
        s = self.scenario
        targets = OUTPUT_FILES['sweep'] + (['sweep.svg'] if self.plot else [])
        self.storage.ensure_writable(targets)
        cls = FunctionClass(multiplier=build_multiplier(s), p=s.p, beta=s.beta)
        regime, predicted = self._predicted(cls)

        result = asymptotics.sweep(cls, s.q, s.n_list, self.budget, regime=regime)
        header = [f'# {result.description}', f'# seed={result.seed} K={result.K} N={result.N}']
        report = None
        if predicted is not None:
            result = asymptotics.fit_sweep(result, predicted)
            header.append(f'# bracket model={predicted.model} lower={predicted.lower_exponent} '
                          f'upper={predicted.upper_exponent}')
            report = asymptotics.verdict(result, predicted, slope_tol=s.slope_tol, envelope_tol=s.envelope_tol,
                                         ratio_c=s.ratio_c, gamma_rtol=s.gamma_rtol)

        saved = list(self.storage.save_sweep(result, asymptotics.sweep_frame(result)).values())
        if report is not None:
            saved.append(self.storage.save_verdict(report, header))
        else:
            saved.append(self.storage.save_text(header + [f'regime: {regime.value}', 'verdict: NONE'],
                                                'verdict.txt'))
        if self.plot:
            curves = asymptotics.reference_curves(result, predicted) if predicted is not None else {}
            saved.append(self.storage.save_sweep_plot(result, curves))
        return {'sweep': result, 'verdict': report, 'saved_files': saved}

    def run_extension_demo(self) -> Dict[str, Any]:
        """Preabsolute chain on a fixture, with the replay file"""
        s = self.scenario
        strict = s.fixture == 'strict_gap'
        targets = OUTPUT_FILES['extension-demo'] + (['certificate.json'] if strict else [])
        self.storage.ensure_writable(targets)
        A, X, _ = strict_gap_fixture() if strict else hilbert_fixture(s.dimension)
        sample = None if X.kind == 'polytope' else dual_ball_sample(X, s.sample_size, s.seed)
        chain, ext, Phi = preabsolute_chain(A, X, s.n, self.budget, epsilon=s.epsilon, sample=sample)
        for e in chain:
            self.logger.info("Chain entry", m=e.m, lower=e.lower, upper=e.upper)

        saved = [
            self.storage.save_estimates_csv(chain, 'chain.csv'),
            self.storage.save_extension(extension_record(ext, Phi, A)),
        ]
        results = {'chain': chain, 'slack': ext.slack, 'saved_files': saved}
        if strict:
            certificate = exhaustive_gap_certificate(A, X)
            saved.append(self.storage.save_json(certificate, 'certificate.json'))
            results['certificate'] = certificate
            if s.n >= 1:
                results['margin'] = chain[0].upper - chain[-1].upper
                if results['margin'] < STRICT_GAP_MARGIN / 2:
                    self.logger.warning("Observed chain margin below half the certified margin",
                                        margin=results['margin'], certified=STRICT_GAP_MARGIN)
        return results

    def run_duality(self) -> Dict[str, Any]:
        """Relative gaps of the duality identities over a seeded operator suite"""
        s = self.scenario
        self.storage.ensure_writable(OUTPUT_FILES['duality'])
        rng = np.random.default_rng(s.seed)
        orders = s.n_list or [1, 2]
        rows = []
        for i in range(s.suite_size):
            entries = np.sort(rng.uniform(0.1, 1.0, s.dimension))[::-1]
            p, q = (float(v) for v in rng.choice(s.exponents, size=2))
            n = min(orders[i % len(orders)], s.dimension - 1)
            try:
                u = widths_engine.DiagonalOperator(entries=entries, p=p, q=q)
                rows.append(widths_engine.duality_check(u, n, self.budget.with_seed(s.seed + i)))
            except WidthsLabError as e:
                self.logger.error(f"Duality row {i} failed: {e}", p=p, q=q, n=n)
        report = DualityReport(rows=rows)
        self.logger.info("Duality suite finished", rows=len(rows), max_gelfand_gap=report.max_gelfand_gap,
                         max_linear_gap=report.max_linear_gap, passed=report.passed)
        saved = [self.storage.save_duality(report)]
        return {'report': report, 'saved_files': saved}

    def run(self) -> Dict[str, Any]:
        """Run the scenario's command"""
        start_time = time.time()
        handlers = {
            'widths': self.run_widths,
            'sweep': self.run_sweep,
            'extension-demo': self.run_extension_demo,
            'duality': self.run_duality,
        }
        try:
            self.logger.info("Starting command", seed=self.scenario.seed)
            results = handlers[self.scenario.command]()
            execution_time = time.time() - start_time
            results.update({'success': True, 'execution_time_seconds': round(execution_time, 2),
                            'storage_stats': self.storage.get_storage_stats()})
            self.logger.info(f"Command completed in {execution_time:.2f} seconds")
            return results

        except (OutputExistsError, ScenarioError):
            raise
        except Exception as e:
            self.logger.error(f"Command failed: {e}")
            return {
                'success': False,
                'error': str(e),
                'execution_time_seconds': time.time() - start_time,
            }
