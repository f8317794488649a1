"""
step_2_fit.py - Fit one model to a CSV dataset and write the draw table (draws.csv)
and a summary (summary.json) with posterior means, 95% intervals and IFs.
"""

import os
import logging

import numpy as np

from ehreg.analysis.metrics import MIN_TRACE_LENGTH, inefficiency_factor, summarize
from ehreg.model import ChainOutput, RandomEffectSpec, load_prior, parse_model_flag, validate
from ehreg.samplers import run_model
from ehreg.utils.io import load_dataset_csv, load_json, read_csv, save_json, write_csv

if not logging.getLogger().hasHandlers():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')

DRAWS_FILE = "draws.csv"
SUMMARY_FILE = "summary.json"
# Columns written by the simulator that are not covariates
RESERVED_COLUMNS = ("outlier",)


def chain_summary(output: ChainOutput):
    """Per-column posterior mean, 2.5% / 97.5% quantiles and inefficiency factor."""
    frame = output.to_frame()
    summary = summarize(frame.to_numpy())
    long_enough = output.n_retained >= MIN_TRACE_LENGTH
    parameters = {}
    for k, column in enumerate(frame.columns):
        trace = frame[column].to_numpy()
        parameters[column] = {
            "mean": float(summary.mean[k]),
            "lower": float(summary.lower[k]),
            "upper": float(summary.upper[k]),
            "if": inefficiency_factor(trace) if long_enough else None,
        }
    record = dict(output.metadata(), parameters=parameters)
    if output.z_mean is not None:
        record["z_mean"] = output.z_mean.tolist()
    if output.acceptance_rate is not None:
        record["mh_acceptance_rate"] = output.acceptance_rate
    return record


def load_fit_dataset(data_path, data_options):
    return load_dataset_csv(
        data_path, response=data_options.get("response", "y"), covariates=data_options.get("covariates"),
        add_intercept=data_options.get("add_intercept", True), group_column=data_options.get("group_column"),
        coord_columns=data_options.get("coord_columns"), exclude=RESERVED_COLUMNS,
    )


def load_chain_output(draws_path, summary_path):
    """Rebuild a ChainOutput from draws.csv and its summary.json."""
    summary = load_json(summary_path, "fit summary")
    return ChainOutput.from_frame(read_csv(draws_path, "draw table"), summary), summary


def run_fit(data_path, out_dir, model_flag="eh", prior_kind="normal", prior_path=None, random_effect=None,
            response="y", group_column=None, coord_columns=None, n_iter=4000, burn_in=1000, thin=1, seed=0,
            record_latent=False, progress=None):
    """Fit `model_flag` to the CSV at data_path. Returns the paths written."""
    effect = RandomEffectSpec(random_effect) if random_effect else None
    spec = parse_model_flag(model_flag, prior_kind=prior_kind, random_effect=effect, record_latent=record_latent)
    prior = load_prior(prior_path)
    data_options = {
        "response": response,
        # the horseshoe prior carries its own intercept
        "add_intercept": prior_kind == "normal",
        "group_column": group_column if random_effect == "intercept" else None,
        "coord_columns": list(coord_columns) if random_effect == "spatial" and coord_columns else None,
    }
    dataset = load_fit_dataset(data_path, data_options)
    data_options["covariates"] = [c for c in dataset.covariate_names if c != "intercept"]
    handle = validate(prior, dataset, spec)

    logging.info(f"Fitting {spec.tag} ({prior_kind} prior) to {data_path}: n={dataset.n}, p={dataset.p}")
    output = run_model(handle, n_iter=n_iter, burn_in=burn_in, thin=thin, seed=seed, progress=progress)
    logging.info(f"Chain finished in {output.runtime_seconds:.1f}s with {output.n_retained} retained draws")

    summary = chain_summary(output)
    summary.update(data=data_options, prior=prior.to_dict(), warnings=handle.warnings,
                   covariate_names=dataset.covariate_names)
    finite_if = [v["if"] for k, v in summary["parameters"].items() if k.startswith("beta") and v["if"] is not None]
    if finite_if:
        logging.info(f"Average IF over coefficients: {np.mean(finite_if):.2f}")

    paths = {"draws": os.path.join(out_dir, DRAWS_FILE), "summary": os.path.join(out_dir, SUMMARY_FILE)}
    write_csv(output.to_frame(), paths["draws"], "draw table")
    save_json(summary, paths["summary"], "fit summary")
    return paths
