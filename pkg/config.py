# config.py

# This file contains the run-time switches for the swing identification toolkit.
# Algorithm hyper-parameters live in src/swing_ident/estimation/parameters.py.

# --- Master Debug Switch ---
# This is the master switch to enable or disable all console logging.
# When set to False, it overrides all other debug flags.
ENABLE_CONSOLE_LOGGING = True

# --- Granular Debug Flags ---
# Set individual flags to True to enable specific debug messages.
DEBUG_FLAGS = {
    # Logs every sampled state while integrating (very verbose)
    'log_integration_samples': False,

    # Logs loss and lambda every `log_every` epochs in the PINN loop
    'log_pinn_progress': True,

    # Logs ensemble mean/std every `log_every` iterations in the SVGD loop
    'log_bpinn_progress': True,

    # Logs each finished sweep cell
    'log_sweep_cells': True,
}

# --- Component-Specific Debug Flags ---
COMPONENT_DEBUG_FLAGS = {
    'simulator': False,
    'sindy': True,
    'pinn': True,
    'bpinn': True,
    'svgd': False,
    'harness': True,
}

# --- File and Directory Paths ---
# Results of `sweep` and `report` are written below this directory by default.
OUTPUT_DIRECTORY = "output"

# --- Sweep Workers ---
# Number of worker processes for sweep cells. None uses the physical core count.
SWEEP_WORKERS = None
