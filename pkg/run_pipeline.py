#!/usr/bin/env python3
"""
run_pipeline.py - Command-line entry point. Each subcommand calls one pipeline step:

  simulate    write a contaminated dataset (step 1)
  fit         fit one model and write draws + summary (step 2)
  predict     clean predictive intervals from a fit (step 3)
  dic         deviance information criterion of a fit (step 3)
  robustness  distance curve for planted outliers (step 3)
  replicate   simulate -> fit -> metrics over scenarios, then tables (steps 4 and 5)
"""

import argparse
import logging
import os
import sys
import traceback

from ehreg import config
from ehreg.errors import EXIT_OK, EXIT_VALIDATION, NumericError, ValidationError, exit_code_for
from ehreg.model import SIMULATION_SCENARIOS, load_prior, parse_model_flag, parse_scenario
from ehreg.simulation import RegressionDesign
from ehreg.steps.step_1_simulate import run_simulation
from ehreg.steps.step_2_fit import DRAWS_FILE, SUMMARY_FILE, run_fit
from ehreg.steps.step_3_evaluate import run_dic, run_predict, run_robustness
from ehreg.steps.step_4_replicate import run_replications
from ehreg.steps.step_5_prepare_output import write_replication_outputs

DEFAULT_REPLICATE_MODELS = "normal,t:3,mt,eh"


def _csv_list(text, cast=str):
    return [cast(part.strip()) for part in text.split(",") if part.strip()]


def _fit_draw_paths(args):
    draws = args.draws or os.path.join(args.fit_dir, DRAWS_FILE)
    summary = args.summary or os.path.join(args.fit_dir, SUMMARY_FILE)
    return draws, summary


# --- Subcommands ---
def cmd_simulate(args):
    scenario = parse_scenario(args.scenario)
    paths = run_simulation(scenario, args.output, args.seed, design=args.design, n=args.n, p=args.p)
    for name, path in paths.items():
        logging.info(f"  {name}: {path}")


def cmd_fit(args):
    run_fit(args.data, args.output, model_flag=args.model, prior_kind=args.prior, prior_path=args.config,
            random_effect=args.random_effect, response=args.response, group_column=args.group_column,
            coord_columns=_csv_list(args.coords) if args.coords else None, n_iter=args.iters,
            burn_in=args.burnin, thin=args.thin, seed=args.seed, record_latent=args.record_latent)


def cmd_predict(args):
    draws, summary = _fit_draw_paths(args)
    run_predict(draws, summary, args.new_data, args.output, seed=args.seed)


def cmd_dic(args):
    draws, summary = _fit_draw_paths(args)
    record = run_dic(draws, summary, args.data, args.output, max_draws=args.max_draws)
    logging.info(f"DIC = {record['dic']:.2f}")


def cmd_robustness(args):
    indices = _csv_list(args.outlier_index, int)
    a = _csv_list(args.a, float) if args.a else [0.0] * len(indices)
    b = _csv_list(args.b, float) if args.b else [1.0] * len(indices)
    run_robustness(args.data, args.output, model_flag=args.model, prior_kind=args.prior, prior_path=args.config,
                   indices=indices, a=a, b=b, magnitudes=_csv_list(args.magnitudes, float), n_iter=args.iters,
                   burn_in=args.burnin, thin=args.thin, seed=args.seed)


def cmd_replicate(args):
    scenarios = [parse_scenario(text) for text in args.scenario] if args.scenario else list(SIMULATION_SCENARIOS)
    models = _csv_list(args.models)
    for flag in models:
        parse_model_flag(flag)
    design = RegressionDesign.with_size(args.n or 300, args.p or 20) if args.n or args.p else None
    records = run_replications(scenarios, models, args.reps, args.seed, design=args.design, n_iter=args.iters,
                               burn_in=args.burnin, thin=args.thin, prior=load_prior(args.config),
                               regression_design=design, workers=args.workers)
    run_info = {"seed": args.seed, "n_reps": args.reps, "design": args.design, "models": models,
                "n_iter": args.iters, "burn_in": args.burnin, "thin": args.thin}
    frame, _ = write_replication_outputs(records, args.output, run_info)
    logging.info(f"Aggregated {len(frame)} (scenario, model) cells")


# --- Parser ---
def _add_shared(parser, output_help, default_output=None):
    parser.add_argument("--seed", type=int, default=0, help="Root seed (default: 0).")
    parser.add_argument("--iters", type=int, default=config.DEFAULT_N_ITER,
                        help=f"Total Gibbs iterations (default: {config.DEFAULT_N_ITER}).")
    parser.add_argument("--burnin", type=int, default=config.DEFAULT_BURN_IN,
                        help=f"Discarded iterations (default: {config.DEFAULT_BURN_IN}).")
    parser.add_argument("--thin", type=int, default=config.DEFAULT_THIN, help="Keep every k-th draw (default: 1).")
    parser.add_argument("--output", default=default_output, required=default_output is None, help=output_help)
    parser.add_argument("--verbose", action="store_true", help="Debug logging.")


def _add_model(parser):
    parser.add_argument("--model", default="eh", help="eh | aeh | normal | t[:df] | at | mt[:df] (default: eh).")
    parser.add_argument("--prior", default="normal", choices=("normal", "horseshoe"),
                        help="Coefficient prior (default: normal).")
    parser.add_argument("--config", default=None, help="PriorConfig JSON file.")


def build_parser():
    parser = argparse.ArgumentParser(description="Robust Bayesian linear regression with extremely heavy-tailed errors.")
    sub = parser.add_subparsers(dest="command", required=True)
    fit_dir = os.path.join(config.RESULTS_DIR, "fit")

    simulate = sub.add_parser("simulate", help="Write a simulated contamination dataset.")
    _add_shared(simulate, f"Output directory (default: {config.DATA_DIR}).", config.DATA_DIR)
    simulate.add_argument("--scenario", default="0", help="'percent,shift', e.g. '10,20' (default: clean).")
    simulate.add_argument("--design", default="regression", choices=("regression", "ri"))
    simulate.add_argument("--n", type=int, default=None)
    simulate.add_argument("--p", type=int, default=None)

    fit = sub.add_parser("fit", help="Fit one model to a CSV dataset.")
    _add_shared(fit, f"Output directory for draws.csv and summary.json (default: {fit_dir}).", fit_dir)
    _add_model(fit)
    fit.add_argument("--data", required=True, help="CSV with header.")
    fit.add_argument("--response", default="y")
    fit.add_argument("--random-effect", default=None, choices=("intercept", "spatial"))
    fit.add_argument("--group-column", default=None, help="Group labels for random intercepts.")
    fit.add_argument("--coords", default=None, help="Comma-separated coordinate columns for spatial effects.")
    fit.add_argument("--record-latent", action="store_true", help="Also record z and u traces.")

    predict = sub.add_parser("predict", help="Clean predictive means and intervals for new covariates.")
    _add_shared(predict, "Output CSV.")
    predict.add_argument("--fit-dir", default=fit_dir, help="Directory written by 'fit'.")
    predict.add_argument("--draws", default=None)
    predict.add_argument("--summary", default=None)
    predict.add_argument("--new-data", required=True, help="CSV with the fitted covariate columns.")

    dic = sub.add_parser("dic", help="DIC of a fitted chain.")
    _add_shared(dic, "Output JSON.")
    dic.add_argument("--fit-dir", default=fit_dir, help="Directory written by 'fit'.")
    dic.add_argument("--draws", default=None)
    dic.add_argument("--summary", default=None)
    dic.add_argument("--data", required=True, help="The CSV the chain was fitted to.")
    dic.add_argument("--max-draws", type=int, default=None, help="Subsample draws for the likelihood.")

    robustness = sub.add_parser("robustness", help="Posterior-mean distance against planted outlier magnitude.")
    _add_shared(robustness, "Output CSV.")
    _add_model(robustness)
    robustness.add_argument("--data", required=True)
    robustness.add_argument("--outlier-index", default="0", help="Comma-separated 0-based rows to contaminate.")
    robustness.add_argument("--a", default=None, help="Comma-separated intercepts a_i (default 0).")
    robustness.add_argument("--b", default=None, help="Comma-separated slopes b_i (default 1).")
    robustness.add_argument("--magnitudes", default="10,100,1000,10000")

    replicate = sub.add_parser("replicate", help="Simulation study over scenarios and models.")
    _add_shared(replicate, f"Output directory for the tables and JSON (default: {config.RESULTS_DIR}).",
                config.RESULTS_DIR)
    replicate.add_argument("--scenario", action="append", default=None,
                           help="Repeatable 'percent,shift'; default is the full nine-scenario grid.")
    replicate.add_argument("--models", default=DEFAULT_REPLICATE_MODELS,
                           help=f"Comma-separated model flags (default: {DEFAULT_REPLICATE_MODELS}).")
    replicate.add_argument("--reps", type=int, default=50)
    replicate.add_argument("--design", default="regression", choices=("regression", "ri"))
    replicate.add_argument("--n", type=int, default=None)
    replicate.add_argument("--p", type=int, default=None)
    replicate.add_argument("--workers", type=int, default=None, help="Worker processes (default: EHREG_WORKERS).")
    replicate.add_argument("--config", default=None, help="PriorConfig JSON file.")
    return parser


COMMANDS = {
    "simulate": cmd_simulate, "fit": cmd_fit, "predict": cmd_predict,
    "dic": cmd_dic, "robustness": cmd_robustness, "replicate": cmd_replicate,
}


def main(argv=None):
    """Parse argv, run one subcommand and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_VALIDATION
    config.configure_logging("DEBUG" if args.verbose else None)

    logging.info(f"=== Running '{args.command}' ===")
    try:
        COMMANDS[args.command](args)
    except ValidationError as e:
        logging.error(f"'{args.command}' FAILED: {e}")
        if len(e.violations) > 1:
            for violation in e.violations:
                logging.error(f"  - {violation}")
        return exit_code_for(e)
    except NumericError as e:
        logging.error(f"'{args.command}' FAILED with a numeric error: {e}")
        logging.error(traceback.format_exc())
        return exit_code_for(e)
    except Exception as e:
        logging.error(f"'{args.command}' FAILED: {e}")
        traceback.print_exc()
        return exit_code_for(e)
    logging.info(f"=== '{args.command}' completed successfully ===")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
