"""
step_4_replicate.py - Repeated simulate -> fit -> evaluate runs over scenarios and
models. Replications fan out over worker processes; each returns plain records
that step 5 aggregates.
"""

import logging
import traceback
from dataclasses import dataclass

import numpy as np
from tqdm import tqdm
from tqdm.contrib.concurrent import process_map

from ehreg import config
from ehreg.analysis.metrics import average_inefficiency, predict_clean, rmspe, summarize
from ehreg.errors import ValidationError
from ehreg.model import OutlierScenario, PriorConfig, RandomEffectSpec, parse_model_flag, validate
from ehreg.samplers import run_model
from ehreg.samplers.chain import replication_seed
from ehreg.simulation import RandomInterceptDesign, RegressionDesign, simulate_random_intercept, simulate_regression

if not logging.getLogger().hasHandlers():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')


@dataclass(frozen=True)
class ReplicationTask:
    scenario: OutlierScenario
    replication: int
    models: tuple
    seed: int
    design: str = "regression"
    n_iter: int = config.DEFAULT_N_ITER
    burn_in: int = config.DEFAULT_BURN_IN
    thin: int = config.DEFAULT_THIN
    prior: PriorConfig = None
    regression_design: RegressionDesign = None


def _simulate(task: ReplicationTask):
    rng = np.random.default_rng(np.random.SeedSequence(replication_seed(task.seed, task.replication)))
    if task.design == "ri":
        return simulate_random_intercept(RandomInterceptDesign(), task.scenario, rng)
    return simulate_regression(task.regression_design or RegressionDesign(), task.scenario, rng)


def _fit_record(task, model_flag, simulated):
    effect = RandomEffectSpec("intercept") if task.design == "ri" else None
    spec = parse_model_flag(model_flag, random_effect=effect)
    handle = validate(task.prior or PriorConfig(), simulated.dataset, spec)
    chain_seed = replication_seed(task.seed, task.replication) + [1]
    output = run_model(handle, n_iter=task.n_iter, burn_in=task.burn_in, thin=task.thin,
                       seed=chain_seed, progress=False)
    beta = summarize(output["beta"])
    record = {
        "estimates": beta.mean.tolist(), "lowers": beta.lower.tolist(), "uppers": beta.upper.tolist(),
        "truth": simulated.truth["beta"],
        "if_avg": average_inefficiency(output),
        "runtime_seconds": output.runtime_seconds,
    }
    if simulated.holdout is not None:
        prediction, _ = predict_clean(output, simulated.holdout.X, np.random.default_rng(chain_seed + [2]))
        record.update(pred_mean=prediction.mean.tolist(), pred_lower=prediction.lower.tolist(),
                      pred_upper=prediction.upper.tolist(), y_true=simulated.holdout.y.tolist())
    if task.design == "ri":
        record["rmspe"] = rmspe(output["b"].mean(axis=0), simulated.truth["random_effects"])
    return record


def run_replication(task: ReplicationTask):
    """One replication: simulate once, fit every model. Failures are recorded, not raised."""
    simulated = _simulate(task)
    records = []
    for model_flag in task.models:
        base = {"scenario": task.scenario.label, "model": model_flag, "replication": task.replication}
        try:
            records.append(dict(base, status="ok", **_fit_record(task, model_flag, simulated)))
        except Exception as e:
            logging.error(f"Replication {task.replication} of {task.scenario.label} failed for {model_flag}: {e}")
            logging.debug(traceback.format_exc())
            records.append(dict(base, status="failed", error=str(e)))
    return records


def run_replications(scenarios, models, n_reps, seed, design="regression", n_iter=config.DEFAULT_N_ITER,
                     burn_in=config.DEFAULT_BURN_IN, thin=config.DEFAULT_THIN, prior=None,
                     regression_design=None, workers=None, progress=None):
    """All (scenario, replication) tasks; returns the flat list of per-model records."""
    if n_reps < 2:
        raise ValidationError(f"Need at least 2 replications, got {n_reps}")
    tasks = [ReplicationTask(scenario=scenario, replication=r, models=tuple(models), seed=seed, design=design,
                             n_iter=n_iter, burn_in=burn_in, thin=thin, prior=prior,
                             regression_design=regression_design)
             for scenario in scenarios for r in range(n_reps)]
    workers = config.WORKERS if workers is None else workers
    show = config.SHOW_PROGRESS if progress is None else progress
    logging.info(f"Running {len(tasks)} replications x {len(models)} models on {workers} worker(s)")

    if workers > 1:
        results = process_map(run_replication, tasks, max_workers=workers, chunksize=1,
                              desc="Replications", disable=not show)
    else:
        results = [run_replication(task) for task in tqdm(tasks, desc="Replications", disable=not show)]

    records = [record for batch in results for record in batch]
    failed = sum(record["status"] == "failed" for record in records)
    logging.info("--- Replication Summary ---")
    logging.info(f"Fits completed: {len(records) - failed}")
    logging.info(f"Fits failed and excluded: {failed}")
    return records
