"""
Configuration settings for the decision-focused learning toolkit

Copy this file to settings.py and adjust the values for your machine.
Never commit settings.py to Git (it's in .gitignore)
"""

# Training defaults
DEFAULT_LR = 0.01
DEFAULT_MOMENTUM = 0.9
DEFAULT_BATCH_SIZE = 32
DEFAULT_EPOCHS = 20

# Loss hyperparameters
DEFAULT_LAMBDA = 15.0  # DBB interpolation strength, sensible range 10-20
DEFAULT_N_SAMPLES = 1  # perturbation samples K
DEFAULT_SIGMA = 1.0  # perturbation amplitude

# Evaluation
ENUMERATION_BUDGET = 100000  # max optimal solutions enumerated per instance

# Solver size limits
TSP_EXACT_LIMIT = 18  # Held-Karp
TSP_LP_LIMIT = 12  # MTZ / GG LP builders
TSP_ENUMERATION_LIMIT = 9
KNAPSACK_ENUMERATION_LIMIT = 20
GRID_ENUMERATION_LIMIT = 8  # max(h, w)

# Parallel solving
DEFAULT_WORKERS = 1

# Data Storage Settings
DATA_DIR = "data"
DATASET_DIR = "data/datasets"
RESULTS_DIR = "data/results"

# Logging
LOG_LEVEL = "INFO"
