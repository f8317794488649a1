"""
step_5_prepare_output.py - Reduce replication records to per-(scenario, model)
metrics and write the coefficient table, the prediction table and the raw JSON.
Tables scale every metric except IF by 100; the JSON keeps raw values.
"""

import os
import logging

import numpy as np
import pandas as pd

from ehreg.analysis.metrics import coefficient_metrics, predictive_metrics
from ehreg.utils.io import save_json, write_text

if not logging.getLogger().hasHandlers():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')

TABLE1_FILE = "table1.txt"
TABLE2_FILE = "table2.txt"
AGGREGATE_FILE = "replicate.json"

COEFFICIENT_COLUMNS = ["rmse", "cp", "al", "if"]
PREDICTION_COLUMNS = ["pred_rmse", "pred_cp", "pred_al"]


def _aggregate_group(records):
    ok = [r for r in records if r["status"] == "ok"]
    row = {"n_ok": len(ok), "n_failed": len(records) - len(ok)}
    if not ok:
        return row
    report = coefficient_metrics([r["estimates"] for r in ok], [r["lowers"] for r in ok],
                                 [r["uppers"] for r in ok], ok[0]["truth"])
    row.update(rmse=report.rmse_avg, cp=report.cp_avg, al=report.al_avg)
    row["if"] = float(np.mean([r["if_avg"] for r in ok]))
    if "pred_mean" in ok[0]:
        prediction = predictive_metrics([r["pred_mean"] for r in ok], [r["pred_lower"] for r in ok],
                                        [r["pred_upper"] for r in ok], [r["y_true"] for r in ok])
        row.update(pred_rmse=prediction.rmse_avg, pred_cp=prediction.cp_avg, pred_al=prediction.al_avg)
    if "rmspe" in ok[0]:
        row["rmspe"] = float(np.mean([r["rmspe"] for r in ok]))
    return row


def aggregate(records):
    """One row per (scenario, model), in first-seen order, with success and failure counts."""
    groups = {}
    for record in records:
        groups.setdefault((record["scenario"], record["model"]), []).append(record)
    rows = [dict(scenario=scenario, model=model, **_aggregate_group(group))
            for (scenario, model), group in groups.items()]
    frame = pd.DataFrame(rows)
    failed = int(frame["n_failed"].sum()) if not frame.empty else 0
    if failed:
        logging.warning(f"{failed} fits failed and were excluded from the aggregates")
    return frame


def _metric_blocks(frame, columns, scaled):
    """Scenario rows x model columns, one block per metric."""
    scenarios = list(dict.fromkeys(frame["scenario"]))
    models = list(dict.fromkeys(frame["model"]))
    blocks = []
    for column in columns:
        if column not in frame.columns:
            continue
        block = frame.pivot(index="scenario", columns="model", values=column).reindex(index=scenarios, columns=models)
        if column in scaled:
            block = block * 100.0
        blocks.append(f"{column.upper()}\n{block.to_string(float_format=lambda v: f'{v:8.2f}', na_rep='      --')}")
    return "\n\n".join(blocks) + "\n"


def format_table1(frame):
    """RMSE, CP and AL x100 and unscaled IF; adds RMSPE x100 for the random-intercept study."""
    columns = COEFFICIENT_COLUMNS + (["rmspe"] if "rmspe" in frame.columns else [])
    return _metric_blocks(frame, columns, scaled={"rmse", "cp", "al", "rmspe"})


def format_table2(frame):
    return _metric_blocks(frame, PREDICTION_COLUMNS, scaled=set(PREDICTION_COLUMNS))


def write_replication_outputs(records, out_dir, run_info=None):
    """Aggregate and write the tables plus raw JSON under out_dir. Returns (frame, paths)."""
    frame = aggregate(records)
    paths = {"table1": os.path.join(out_dir, TABLE1_FILE), "json": os.path.join(out_dir, AGGREGATE_FILE)}
    write_text(format_table1(frame), paths["table1"], "coefficient table")
    if "pred_rmse" in frame.columns:
        paths["table2"] = os.path.join(out_dir, TABLE2_FILE)
        write_text(format_table2(frame), paths["table2"], "prediction table")

    payload = dict(run_info or {}, aggregates=frame.astype(object).where(frame.notna(), None).to_dict(orient="records"),
                   n_failed=int(frame["n_failed"].sum()) if not frame.empty else 0)
    save_json(payload, paths["json"], "replication aggregates")
    logging.info(f"Wrote replication outputs for {len(frame)} (scenario, model) cells to {out_dir}")
    return frame, paths
