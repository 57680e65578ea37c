# thermopepo/orchestrator.py
import asyncio
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterator, Optional, Sequence

from thermopepo.config import RunConfig
from thermopepo.ctm_env import ctm_converge
from thermopepo.datastructures import AnnealSchedule, AnnealSnapshot, ObservableRecord, ScanPoint
from thermopepo.evolution import anneal
from thermopepo.exceptions import ConfigError
from thermopepo.models import Model, build_model
from thermopepo.observables import measure
from thermopepo.thermal_pepo import VectorizedPepo, identity_pepo, load_pepo, save_pepo


def measure_state(model: Model, p: VectorizedPepo, run_config: RunConfig, beta: float) -> ObservableRecord:
    env = ctm_converge(p, run_config.chi, run_config.ctm_tol, run_config.ctm_max_iters,
                       boundary_seed=model.boundary_seed)
    return measure(model, env, p, beta)


def anneal_and_measure(
    run_config: RunConfig,
    checkpoints: Sequence[float],
    resume: Optional[str | Path] = None,
) -> Iterator[tuple[AnnealSnapshot, ObservableRecord]]:
    """Anneals from β = 0 (or a snapshot) and measures through CTM at every checkpoint."""
    model = build_model(run_config.model, run_config.model_params)
    if resume is not None:
        p, header = load_pepo(resume)
        if p.d != model.d:
            raise ConfigError(f"snapshot {resume} has d={p.d}, model {model.name} needs d={model.d}")
        if header.get('delta_beta') not in (None, run_config.delta_beta):
            logging.warning(f"PIPELINE: snapshot was annealed with delta_beta={header['delta_beta']}, "
                            f"continuing with {run_config.delta_beta}")
        logging.info(f"PIPELINE: resuming from {resume} at beta={p.beta:.6g}")
    else:
        p = identity_pepo(model.d, run_config.bond_dim)

    checkpoints = sorted(checkpoints)
    beta_max = checkpoints[-1] if checkpoints else run_config.beta_max
    schedule = AnnealSchedule(delta_beta=run_config.delta_beta, beta_max=beta_max, checkpoints=tuple(checkpoints))

    for snapshot in anneal(p, model, schedule, d_max=run_config.bond_dim,
                           cutoff=run_config.svd_cutoff, floor=run_config.lambda_floor):
        if run_config.snapshot_dir:
            save_pepo(snapshot.pepo, Path(run_config.snapshot_dir) / f"snapshot_beta_{snapshot.beta:.6g}.npz",
                      delta_beta=run_config.delta_beta)
        yield snapshot, measure_state(model, snapshot.pepo, run_config, snapshot.beta)


def run_scan_point(run_config: RunConfig, mu: float, temperatures: Sequence[float]) -> list[ScanPoint]:
    """One independent anneal at chemical potential `mu`, measured at every temperature."""
    point_config = run_config.with_mu(mu)
    by_beta = sorted(temperatures, reverse=True)
    logging.info(f"SCAN: starting mu={mu:g} over T={list(temperatures)}")
    points = []
    try:
        measured = anneal_and_measure(point_config, [1.0 / t for t in by_beta])
        for temperature, (snapshot, record) in zip(by_beta, measured):
            points.append(ScanPoint(mu=mu, temperature=temperature, bond_dim=run_config.bond_dim,
                                    record=record, snapped_beta=snapshot.beta,
                                    snapshot=snapshot))
    except Exception as e:
        logging.error(f"SCAN: point mu={mu:g} failed: {e}", exc_info=True)
        done = {point.temperature for point in points}
        points.extend(ScanPoint(mu=mu, temperature=t, bond_dim=run_config.bond_dim, error=str(e))
                      for t in by_beta if t not in done)
    logging.info(f"SCAN: finished mu={mu:g}")
    return points


class ScanOrchestrator:
    """Fans independent μ points out to a worker pool and collects rows in a fixed order."""

    def __init__(self, run_config: RunConfig, workers: Optional[int] = None):
        self.run_config = run_config
        self.workers = workers or run_config.workers

    async def run(self, mu_grid: Sequence[float], temperatures: Sequence[float]) -> list[ScanPoint]:
        logging.info(f"--- Starting scan: {len(mu_grid)} mu points x {len(temperatures)} temperatures "
                     f"on {self.workers} worker(s) ---")
        loop = asyncio.get_running_loop()
        pool = ProcessPoolExecutor(max_workers=self.workers) if self.workers > 1 else None
        try:
            tasks = [loop.run_in_executor(pool, run_scan_point, self.run_config, mu, tuple(temperatures))
                     for mu in mu_grid]
            results = await asyncio.gather(*tasks, return_exceptions=True)
        finally:
            if pool is not None:
                pool.shutdown()

        points = []
        for mu, result in zip(mu_grid, results):
            if isinstance(result, BaseException):
                logging.error(f"SCAN: worker for mu={mu:g} crashed: {result!r}")
                points.extend(ScanPoint(mu=mu, temperature=t, bond_dim=self.run_config.bond_dim,
                                        error=repr(result)) for t in temperatures)
            else:
                points.extend(result)
        points.sort(key=lambda point: (point.mu, point.temperature))
        logging.info(f"--- Scan complete: {sum(p.error is None for p in points)}/{len(points)} points succeeded ---")
        return points

    def run_sync(self, mu_grid: Sequence[float], temperatures: Sequence[float]) -> list[ScanPoint]:
        return asyncio.run(self.run(mu_grid, temperatures))
