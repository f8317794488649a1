"""
step_3_evaluate.py - Evaluate fitted chains: clean predictive intervals for new
covariates, DIC on the fitted data, and the planted-outlier robustness curve.
"""

import logging

import numpy as np
import pandas as pd

from ehreg.analysis.metrics import dic, predict_clean
from ehreg.analysis.robustness import robustness_sweep
from ehreg.errors import ValidationError
from ehreg.model import OutlierProbe, load_prior, parse_model_flag
from ehreg.steps.step_2_fit import RESERVED_COLUMNS, load_chain_output, load_fit_dataset
from ehreg.utils.io import load_dataset_csv, read_csv, save_json, write_csv

if not logging.getLogger().hasHandlers():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')


def run_predict(draws_path, summary_path, new_data_path, out_path, seed=0):
    """Predictive mean and 95% interval for each row of new covariates, given z = 0."""
    output, summary = load_chain_output(draws_path, summary_path)
    covariates = summary["data"]["covariates"]
    frame = read_csv(new_data_path, "new covariates")
    missing = [c for c in covariates if c not in frame.columns]
    if missing:
        raise ValidationError(f"New covariate file lacks columns: {', '.join(missing)}")
    X_new = frame[covariates].to_numpy(dtype=float)
    if summary["data"].get("add_intercept", True):
        X_new = np.column_stack([np.ones(len(frame)), X_new])

    prediction, _ = predict_clean(output, X_new, np.random.default_rng(seed))
    result = pd.DataFrame({"mean": prediction.mean, "lower": prediction.lower, "upper": prediction.upper})
    if "y" in frame.columns:
        result.insert(0, "y", frame["y"].to_numpy())
    write_csv(result, out_path, "predictions")
    logging.info(f"Predicted {len(result)} new points from {output.n_retained} draws")
    return result


def run_dic(draws_path, summary_path, data_path, out_path, max_draws=None):
    output, summary = load_chain_output(draws_path, summary_path)
    dataset = load_fit_dataset(data_path, summary["data"])
    value = dic(output, dataset, max_draws=max_draws)
    record = {"model_tag": output.model_tag, "prior_kind": output.prior_kind, "dic": value,
              "n_draws_used": min(output.n_retained, max_draws or output.n_retained)}
    save_json(record, out_path, "DIC")
    return record


def run_robustness(data_path, out_path, model_flag="eh", prior_kind="normal", prior_path=None,
                   indices=(0,), a=(0.0,), b=(1.0,), magnitudes=(1e2, 1e3, 1e4),
                   n_iter=4000, burn_in=1000, thin=1, seed=0, progress=None):
    """Distance curve of the posterior mean of beta against the outlier magnitude."""
    spec = parse_model_flag(model_flag, prior_kind=prior_kind)
    dataset = load_dataset_csv(data_path, add_intercept=prior_kind == "normal", exclude=RESERVED_COLUMNS)
    probe = OutlierProbe(indices=tuple(indices), a=tuple(a), b=tuple(b))
    curve = robustness_sweep(dataset, probe, spec, load_prior(prior_path), magnitudes,
                             n_iter=n_iter, burn_in=burn_in, thin=thin, seed=seed, progress=progress)
    write_csv(curve, out_path, "robustness curve")
    return curve
