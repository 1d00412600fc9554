import os

from dotenv import load_dotenv

load_dotenv()

# empty values in .env fall back to the defaults
THREADS = int(os.environ.get("FREECONV_THREADS") or os.cpu_count() or 1)
LOG_LEVEL = os.environ.get("FREECONV_LOG_LEVEL") or "WARNING"
ETA_EVAL = float(os.environ.get("FREECONV_ETA_EVAL") or 1e-9)

# real-axis evaluation starts its eta continuation here
ETA_SWEEP_START = 1.0
# below this height a direct solve is replaced by a continuation in eta
ETA_SWEEP_BELOW = 0.1
SWEEP_STEPS_PER_DECADE = 6


def worker_count(requested=None) -> int:
    if requested is None:
        requested = THREADS
    return max(1, min(int(requested), THREADS))
