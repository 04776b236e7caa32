# config.py
import os
from dotenv import load_dotenv

# Values in a local .env override nothing that is already set in the environment
load_dotenv()

DEFAULT_SEED = int(os.getenv("FH_SEED", "0"))
DEFAULT_TOL = float(os.getenv("FH_TOL", "1e-10"))
EQUIV_TOL = float(os.getenv("FH_EQUIV_TOL", "1e-8"))
DEFAULT_TRIALS = int(os.getenv("FH_TRIALS", "32"))
LOG_LEVEL = os.getenv("FH_LOG_LEVEL", "INFO").upper()
RESULTS_DIR = os.getenv("FH_RESULTS_DIR", "results")
