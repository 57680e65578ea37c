# thermopepo/cli.py
"""Batch commands behind `main.py`; each writes one CSV and returns its path."""
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from thermopepo.config import DEFAULT_MU_GRID, DEFAULT_TEMPERATURES, RunConfig
from thermopepo.datastructures import ObservableRecord
from thermopepo.exceptions import NumericalError, ThermoPepoError, UsageError
from thermopepo.models import build_model, hardcore_bh, ising_model
from thermopepo.observables import onsager_magnetization
from thermopepo.orchestrator import ScanOrchestrator, anneal_and_measure, measure_state
from thermopepo.reference_oracle import (
    SmallLattice, exact_thermal_expectation, trotter_slice_error, trotterized_thermal_expectation,
    trotterized_thermal_state, vectorized_trotter_state,
)
from thermopepo.results import runlog_path, write_results
from thermopepo.thermal_pepo import SWEEP_ORDER, exact_ising_pepo, vectorize

ANNEAL_COLUMNS = ['beta', 'requested_beta', 'T', 'magnetization', 'density', 'sf_param', 'var_n',
                  'trunc_err', 'trunc_err_max', 'herm_dev', 'ctm_iters', 'converged', 'sublattice_flag',
                  'warnings']
RUNLOG_COLUMNS = ['beta', 'requested_beta', 'slice', 'trunc_err_sum', 'trunc_err_max', 'herm_dev',
                  'wall_time', 'warnings']
SCAN_COLUMNS = ['mu', 'T', 'D', 'beta', 'n', 'sf_param', 'var_n', 'trunc_err', 'herm_dev', 'ctm_iters',
                'converged', 'sublattice_flag', 'error']
BENCH_COLUMNS = ['beta', 'm_anneal', 'm_exact_pepo', 'm_onsager', 'abs_err', 'rel_err',
                 'exact_pepo_abs_err', 'herm_dev', 'converged']
EXACT_COLUMNS = ['beta', 'T', 'magnetization', 'm_onsager', 'abs_err', 'ctm_iters', 'converged']
ORACLE_COLUMNS = ['check', 'value', 'lower', 'upper', 'passed']

ISING_BENCH_BETAS = tuple(float(np.round(0.05 * i, 12)) for i in range(1, 17))
CRITICAL_WINDOW = (0.40, 0.48)
REL_ERR_FLOOR = 1e-3


def _output(run_config: RunConfig) -> Path:
    if not run_config.output:
        raise UsageError("no output path: pass --out or set OUTPUT in the config")
    return Path(run_config.output)


def _checkpoints(run_config: RunConfig) -> list[float]:
    if run_config.checkpoints:
        return list(run_config.checkpoints)
    if run_config.temperatures:
        return sorted(1.0 / t for t in run_config.temperatures)
    return [run_config.beta_max]


def _anneal_row(snapshot, record: ObservableRecord) -> dict:
    return {
        'beta': snapshot.beta,
        'requested_beta': snapshot.requested_beta,
        'T': record.temperature,
        'magnetization': record.values.get('magnetization'),
        'density': record.values.get('density'),
        'sf_param': record.values.get('sf_param'),
        'var_n': record.values.get('var_n'),
        'trunc_err': snapshot.trunc_err_sum,
        'trunc_err_max': snapshot.trunc_err_max,
        'herm_dev': snapshot.herm_dev,
        'ctm_iters': record.meta['ctm_iters'],
        'converged': record.meta['converged'],
        'sublattice_flag': record.meta['sublattice_flag'],
        'warnings': '; '.join(snapshot.warnings),
    }


def cmd_anneal(run_config: RunConfig, resume: Optional[str | Path] = None) -> Path:
    """One anneal, one row per checkpoint, plus the run log next to it."""
    output = _output(run_config)
    rows, runlog = [], []
    try:
        for snapshot, record in anneal_and_measure(run_config, _checkpoints(run_config), resume=resume):
            rows.append(_anneal_row(snapshot, record))
            runlog.append(snapshot.runlog_row())
    except ThermoPepoError:
        if rows:
            logging.error(f"ANNEAL: run failed after {len(rows)} checkpoints, writing partial results")
            write_results(output, rows, ANNEAL_COLUMNS, 'anneal')
            write_results(runlog_path(output), runlog, RUNLOG_COLUMNS, 'anneal runlog')
        raise
    write_results(runlog_path(output), runlog, RUNLOG_COLUMNS, 'anneal runlog')
    return write_results(output, rows, ANNEAL_COLUMNS, 'anneal')


def cmd_scan(
    run_config: RunConfig,
    mu_grid: Optional[Sequence[float]] = None,
    temperatures: Optional[Sequence[float]] = None,
    workers: Optional[int] = None,
) -> Path:
    """One independent anneal per μ, measured at every temperature; rows sorted by (μ, T)."""
    if mu_grid is None:
        mu_grid = run_config.mu_grid if run_config.mu_grid is not None else DEFAULT_MU_GRID
    if temperatures is None:
        temperatures = run_config.temperatures if run_config.temperatures is not None else DEFAULT_TEMPERATURES
    if len(mu_grid) == 0:
        raise UsageError("empty mu grid")
    if len(temperatures) == 0:
        raise UsageError("empty temperature list")
    if any(t <= 0 for t in temperatures):
        raise UsageError(f"temperatures must be positive: {list(temperatures)}")
    output = _output(run_config)

    points = ScanOrchestrator(run_config, workers).run_sync(list(mu_grid), list(temperatures))
    rows = []
    for point in points:
        row = {'mu': point.mu, 'T': point.temperature, 'D': point.bond_dim, 'error': point.error}
        if point.record is not None:
            row.update({
                'beta': point.snapped_beta,
                'n': point.record.values.get('density'),
                'sf_param': point.record.values.get('sf_param'),
                'var_n': point.record.values.get('var_n'),
                'trunc_err': point.snapshot.trunc_err_sum if point.snapshot else None,
                'herm_dev': point.snapshot.herm_dev if point.snapshot else None,
                'ctm_iters': point.record.meta['ctm_iters'],
                'converged': point.record.meta['converged'],
                'sublattice_flag': point.record.meta['sublattice_flag'],
            })
        rows.append(row)
    return write_results(output, rows, SCAN_COLUMNS, 'scan')


def _in_critical_window(beta: float) -> bool:
    return CRITICAL_WINDOW[0] <= beta <= CRITICAL_WINDOW[1]


def cmd_ising_bench(run_config: RunConfig) -> tuple[Path, dict]:
    """Annealed and exact Ising PEPOs against Onsager; the summary skips the critical window."""
    if run_config.model != 'ising':
        raise UsageError(f"ising-bench needs MODEL=ising, got {run_config.model!r}")
    output = _output(run_config)
    betas = list(run_config.checkpoints) or list(ISING_BENCH_BETAS)
    model = build_model('ising', run_config.model_params)

    rows = []
    for snapshot, record in anneal_and_measure(run_config, betas):
        exact_record = measure_state(model, exact_ising_pepo(snapshot.beta), run_config, snapshot.beta)
        m_anneal = record.values['magnetization']
        m_exact = exact_record.values['magnetization']
        m_onsager = onsager_magnetization(snapshot.beta)
        abs_err = abs(m_anneal - m_onsager)
        rows.append({
            'beta': snapshot.beta,
            'm_anneal': m_anneal,
            'm_exact_pepo': m_exact,
            'm_onsager': m_onsager,
            'abs_err': abs_err,
            'rel_err': abs_err / max(m_onsager, REL_ERR_FLOOR),
            'exact_pepo_abs_err': abs(m_exact - m_onsager),
            'herm_dev': snapshot.herm_dev,
            'converged': record.meta['converged'] and exact_record.meta['converged'],
        })

    outside = [row for row in rows if not _in_critical_window(row['beta'])]
    summary = {
        'max_abs_err': max((row['abs_err'] for row in outside), default=0.0),
        'max_rel_err': max((row['rel_err'] for row in outside), default=0.0),
        'max_exact_pepo_abs_err': max((row['exact_pepo_abs_err'] for row in outside), default=0.0),
        'points': len(rows),
        'excluded': len(rows) - len(outside),
    }
    logging.info(f"ISING BENCH: max |m - m_onsager| = {summary['max_abs_err']:.3e}, "
                 f"max rel err = {summary['max_rel_err']:.3e} outside beta in {list(CRITICAL_WINDOW)} "
                 f"({summary['excluded']} points excluded)")
    return write_results(output, rows, BENCH_COLUMNS, 'ising-bench'), summary


def cmd_exact_ising(run_config: RunConfig) -> Path:
    """Builds the exact D=2 Ising PEPO at every checkpoint and measures it through CTM."""
    output = _output(run_config)
    betas = list(run_config.checkpoints) or list(ISING_BENCH_BETAS)
    model = ising_model(0.0)
    rows = []
    for beta in betas:
        record = measure_state(model, exact_ising_pepo(beta), run_config, beta)
        m_onsager = onsager_magnetization(beta)
        rows.append({
            'beta': beta,
            'T': record.temperature,
            'magnetization': record.values['magnetization'],
            'm_onsager': m_onsager,
            'abs_err': abs(record.values['magnetization'] - m_onsager),
            'ctm_iters': record.meta['ctm_iters'],
            'converged': record.meta['converged'],
        })
    return write_results(output, rows, EXACT_COLUMNS, 'exact-ising')


def oracle_checks(seed: Optional[int] = None) -> list[dict]:
    """Dense checks of the machinery: Trotter order, sweep-order independence, vectorization."""
    checks = []

    def check(name, value, lower=None, upper=None):
        passed = (lower is None or value >= lower) and (upper is None or value <= upper)
        level = logging.INFO if passed else logging.ERROR
        logging.log(level, f"ORACLE: {name} = {value:.3e} ({'pass' if passed else 'FAIL'})")
        checks.append({'check': name, 'value': float(value), 'lower': lower, 'upper': upper, 'passed': passed})

    n = np.diag([0.0, 1.0])
    chain = SmallLattice(1, 3)
    plaquette = SmallLattice(2, 2)
    hardcore = hardcore_bh(1.0, 0.3)

    ratio = trotter_slice_error(hardcore, chain, 0.01) / trotter_slice_error(hardcore, chain, 0.005)
    check('trotter_error_ratio', ratio, 3.5, 4.5)

    reversed_order = tuple(reversed(SWEEP_ORDER))
    forward = trotterized_thermal_expectation(hardcore, plaquette, 0.1, 1e-4, n, 0)
    backward = trotterized_thermal_expectation(hardcore, plaquette, 0.1, 1e-4, n, 0, sweep_order=reversed_order)
    check('sweep_order_independence', abs(forward - backward), upper=1e-6)

    dense = trotterized_thermal_state(hardcore, plaquette, 0.1, 0.01)
    vectorized = vectorized_trotter_state(hardcore, plaquette, 0.1, 0.01)
    check('vectorized_evolution', np.max(np.abs(dense - vectorized)) / np.max(np.abs(dense)), upper=1e-12)

    ising = ising_model()
    sz = np.diag([1.0, -1.0])
    exact = exact_thermal_expectation(ising, plaquette, 0.1, sz, 0)
    trotter = trotterized_thermal_expectation(ising, plaquette, 0.1, 1e-5, sz, 0)
    check('small_step_agreement', abs(exact - trotter), upper=1e-8)

    rng = np.random.default_rng(seed)
    a, rho, b = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(3))
    identity_error = np.max(np.abs(vectorize(a @ rho @ b) - np.kron(a, b.T) @ vectorize(rho)))
    check('vectorization_identity', identity_error, upper=1e-12)
    return checks


def cmd_oracle(run_config: RunConfig) -> Path:
    output = _output(run_config)
    checks = oracle_checks(run_config.seed)
    path = write_results(output, checks, ORACLE_COLUMNS, 'oracle')
    failed = [c['check'] for c in checks if not c['passed']]
    if failed:
        raise NumericalError(f"oracle checks failed: {', '.join(failed)}")
    return path
