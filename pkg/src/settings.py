import math

from dotenv import load_dotenv

# Global resources
load_dotenv()

TOOL_NAME = "bellsim"
TWO_PI = 2.0 * math.pi

OUTPUT_DIR_ENV = "BELLSIM_OUTPUT_DIR"
WORKERS_ENV = "BELLSIM_WORKERS"
DEFAULT_OUTPUT_DIR = "bellsim-out"

default_chunk_size = 65536
default_panels = 256
default_tolerance = 1e-11
default_max_evaluations = 2_000_000

normalization_tolerance = 1e-9
mi_tolerance = 1e-9
regularity_alpha = 1e-3
density_grid_points = 10_000

EVENTS_FILE = "events.csv"
REPORT_FILE = "report.json"
MANIFEST_FILE = "manifest.json"
SCAN_FILE = "scan.csv"
