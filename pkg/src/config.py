"""Configuration constants for semiqa."""

from pathlib import Path

# Paths
PACKAGE_DIR = Path(__file__).resolve().parent
DATA_DIR = PACKAGE_DIR.parent / "data"
STATUTE_DIR = DATA_DIR / "statutes"
EXEMPLAR_DIR = DATA_DIR / "exemplars"

# Prompting
SARA_EXEMPLARS = 8
FINQA_EXEMPLARS = 12
MAX_PROMPT_TOKENS = 3500
CHARS_PER_TOKEN = 4

# Model backend
TEMPERATURE = 0.0
MAX_OUTPUT_TOKENS = 512
TIMEOUT_S = 60.0
MAX_RETRIES = 5
MAX_PARALLEL = 4
RETRY_BASE_S = 1.0
AUTH_ENV_VAR = "OPENAI_API_KEY"

# Retrieval
LEXICAL_K = 3

# Scoring
Z_90 = 1.645
PROGRAM_REL_TOL = 1e-4
ANSWER_REL_TOL = 5e-3
ENTAILMENT_CUES = ("entailment", "entailed", "entails")
CONTRADICTION_CUES = ("contradiction", "contradicted", "contradicts")

# Runs
VALIDATION_SIZE = 40
DEFAULT_SEED = 0
