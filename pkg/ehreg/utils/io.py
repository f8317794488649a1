"""
io.py - JSON and CSV persistence. Every write goes to a temporary file in the
target directory and is then renamed over the destination.
"""

import os
import json
import logging
import tempfile

import numpy as np
import pandas as pd

from ehreg.errors import ValidationError
from ehreg.model import Dataset

if not logging.getLogger().hasHandlers():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')


def _atomic_write(path, write):
    """Call write(handle) on a temp file next to `path`, then os.replace it into place."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp_", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, 'w', newline='') as handle:
            write(handle)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def _to_jsonable(value):
    if isinstance(value, dict):
        return {str(k): _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


def load_json(path, name="JSON"):
    """Loads a JSON file; a missing or unreadable file is a validation error."""
    if not os.path.exists(path):
        raise ValidationError(f"No {name} file found at {path}")
    try:
        with open(path, 'r') as f:
            logging.info(f"Loading {name} from {path}")
            return json.load(f)
    except (json.JSONDecodeError, IOError) as e:
        raise ValidationError(f"Could not load {name} file {path}: {e}")


def save_json(data, path, name="JSON"):
    """Saves data to a JSON file (indent=2), atomically."""
    payload = _to_jsonable(data)
    _atomic_write(path, lambda handle: json.dump(payload, handle, indent=2))
    logging.info(f"Saved {name} to {path}")


def write_csv(frame: pd.DataFrame, path, name="CSV", float_format=None):
    _atomic_write(path, lambda handle: frame.to_csv(handle, index=False, float_format=float_format))
    logging.info(f"Saved {name} ({len(frame)} rows) to {path}")


def write_text(text, path, name="text"):
    _atomic_write(path, lambda handle: handle.write(text))
    logging.info(f"Saved {name} to {path}")


def read_csv(path, name="CSV"):
    if not os.path.exists(path):
        raise ValidationError(f"No {name} file found at {path}")
    try:
        return pd.read_csv(path)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise ValidationError(f"Could not parse {name} file {path}: {e}")


def load_dataset_csv(path, response="y", covariates=None, add_intercept=True,
                     group_column=None, coord_columns=None, exclude=()):
    """Read a CSV with header into a Dataset.

    Covariates default to every column other than the response, group, coordinate
    and excluded columns. Group labels are recoded to 0..m-1.
    """
    frame = read_csv(path, "dataset")
    coord_columns = list(coord_columns) if coord_columns else []
    reserved = {response, group_column, *coord_columns, *exclude}
    if covariates is None:
        covariates = [c for c in frame.columns if c not in reserved]
    missing = [c for c in [response, *covariates, *coord_columns] + ([group_column] if group_column else [])
               if c not in frame.columns]
    if missing:
        raise ValidationError(f"Dataset {path} is missing columns: {', '.join(missing)}",
                              [f"missing column {c}" for c in missing])
    non_numeric = [c for c in [response, *covariates, *coord_columns] if not pd.api.types.is_numeric_dtype(frame[c])]
    if non_numeric:
        raise ValidationError(f"Non-numeric columns in {path}: {', '.join(non_numeric)}",
                              [f"non-numeric column {c}" for c in non_numeric])

    X = frame[covariates].to_numpy(dtype=float)
    names = list(covariates)
    if add_intercept:
        X = np.column_stack([np.ones(len(frame)), X])
        names = ["intercept"] + names
    groups = None
    if group_column:
        groups = pd.factorize(frame[group_column], sort=True)[0]
    coords = frame[coord_columns].to_numpy(dtype=float) if coord_columns else None
    logging.info(f"Loaded dataset {path}: n={len(frame)}, p={X.shape[1]}")
    return Dataset(y=frame[response].to_numpy(dtype=float), X=X, groups=groups, coords=coords,
                   covariate_names=names, has_intercept=add_intercept)
