"""
config.py - Run settings loaded from the environment / .env file.
"""

import os
import logging
from dotenv import load_dotenv

# Load environment variables from .env file in the project root
load_dotenv()

PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))

DATA_DIR = os.getenv("EHREG_DATA_DIR", os.path.join(PROJECT_ROOT, "data"))
RESULTS_DIR = os.getenv("EHREG_RESULTS_DIR", os.path.join(PROJECT_ROOT, "results"))
LOG_LEVEL = os.getenv("EHREG_LOG_LEVEL", "INFO").upper()
WORKERS = int(os.getenv("EHREG_WORKERS", str(os.cpu_count() or 1)))
SHOW_PROGRESS = os.getenv("EHREG_PROGRESS", "1") not in ("0", "false", "False", "")

# MCMC defaults (3000 retained draws after 1000 burn-in)
DEFAULT_N_ITER = 4000
DEFAULT_BURN_IN = 1000
DEFAULT_THIN = 1

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


def configure_logging(level=None):
    """Configure root logging once; later calls only adjust the level."""
    level_name = (level or LOG_LEVEL).upper()
    numeric_level = getattr(logging, level_name, logging.INFO)
    if not logging.getLogger().hasHandlers():
        logging.basicConfig(level=numeric_level, format=LOG_FORMAT)
    logging.getLogger().setLevel(numeric_level)
