"""Configuration settings for cell-free EMF-constrained power control."""

import os
from pathlib import Path

# Physical constants
SPEED_OF_LIGHT = 299_792_458.0  # m/s

# Deployment (micro-urban, wrapped-around square)
AREA_SIDE_M = 1000.0
NUM_USERS = 20
NUM_APS = 40
ANTENNAS_PER_AP = 4
ASSOCIATION_SIZE = 5
CARRIER_FREQUENCY_HZ = 2.5e9  # UMi default
AP_HEIGHT_M = 10.0
USER_HEIGHT_M = 1.5
AP_LAYOUT = "grid"  # grid (with jitter) or random
AP_JITTER = 0.1  # fraction of the grid pitch, per axis
ANTENNA_SPACING_WAVELENGTHS = 0.5
SHADOWING_STD_DB = 0.0  # log-normal shadowing hook, off by default

# Radio parameters (dB/dBm values are converted at the configuration boundary)
BANDWIDTH_HZ = 20e6
AP_POWER_DBM = 23.0
UL_POWER_BUDGET_DBM = 20.0
PILOT_POWER_DBM = 20.0
NOISE_PSD_DBM_HZ = -174.0

# Frame structure (symbols)
COHERENCE_BLOCK = 200

# Pilot assignment
PILOT_PAIRING = "max_distance"  # or random

# Exposure limits (whole-body, general public)
IPD_CAP_W_M2 = 10.0
SAR_CAP_W_KG = 0.08
SAR_COEFF_PER_KG = 8.0
NUM_BODY_PARTS = 1

# Channel model guards
LOS_PROBABILITY_CAP = 1.0 - 1e-3
MIN_PATHLOSS_DISTANCE_M = 1.0
MAX_CONDITION_NUMBER = 1e12

# Convex core
FEASIBILITY_TOL = 1e-6
BISECTION_TOL = 1e-4
BARRIER_T0 = 1.0
BARRIER_MU = 10.0
BARRIER_GAP_TOL = 1e-8
NEWTON_TOL = 1e-9
MAX_NEWTON_ITERATIONS = 100
MAX_BACKTRACKING_STEPS = 50
MAX_BARRIER_ITERATIONS = 64

# Uplink fixed point
UL_FIXED_POINT_MAX_ITER = 100_000
UL_FIXED_POINT_TOL = 1e-12
UL_SINR_SLACK = 1e-9

# Downlink successive convex optimization
SCO_TOLERANCE = 1e-3
MAX_OUTER_ITERATIONS = 50
DL_LOOP_NESTING = "bisection_inner"  # or bisection_outer

# Baselines
FPC_EXPONENT = 0.5
BASELINES_RESPECT_EMF = False

# Campaign
NUM_DROPS = 100
MASTER_SEED = 2024
SCHEMES = ["opc", "uo", "upc", "ppc", "fpc"]
DEPLOYMENTS = ["cell_free", "multi_cell"]
DIRECTIONS = ["dl", "ul"]
RECORD_TIMING = False
MAX_WORKERS = 4  # for parallel drop processing

# Output
RESULT_COLUMNS = [
    "drop", "deployment", "direction", "scheme", "user",
    "rate_bps", "ipd_w_m2", "sar_w_kg", "solve_time_s", "sweep_k", "sweep_e",
]
DEFAULT_OUT_DIR = Path("results")
RESULTS_FILENAME = "results.csv"

# Working directories
BASE_DIR = Path(
    os.getenv("CELLFREE_EMF_HOME", Path(os.path.expanduser("~")) / ".cellfree_emf")
)
CHECKPOINT_DIR = BASE_DIR / "checkpoints"

# Logging
LOG_DIR = BASE_DIR / "logs"
LOG_LEVEL = "INFO"
LOG_RETENTION_DAYS = 30  # older dated logs move to LOG_DIR/archive
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
