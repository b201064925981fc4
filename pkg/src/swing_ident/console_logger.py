# src/swing_ident/console_logger.py

import logging
import config  # Import the main config file
from .json_log_handler import JSONLogHandler

# --- Package Logger ---
# Every module logs through this one instance; sweep workers re-route it to a queue.
logger = logging.getLogger("swing_ident")
logger.setLevel(logging.DEBUG)
logger.propagate = False

# --- In-Memory Structured Records ---
json_log_handler = JSONLogHandler()
logger.addHandler(json_log_handler)

# --- Conditional Console Handler ---
if config.ENABLE_CONSOLE_LOGGING:
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))
    console_handler.setLevel(logging.INFO)
    logger.addHandler(console_handler)


def log_debug(message, flag=None):
    """Logs at DEBUG when `flag` is None or enabled in config.DEBUG_FLAGS."""
    if flag is None or config.DEBUG_FLAGS.get(flag, False):
        logger.debug(message, extra={'flag': flag})


def log_component_debug(message, component):
    if config.COMPONENT_DEBUG_FLAGS.get(component, False):
        logger.debug(f"[{component.upper()}] {message}", extra={'component': component})


def log_progress(component, step_name, step, flag, **metrics):
    """
    Logs one line of training progress when `flag` is enabled, e.g.
    `[PINN] epoch 200: loss = 1.234e-03, m = 0.3012`.

    The values are stored on the record as well, so
    `json_log_handler.progress(component)` returns the curve as numbers.
    """
    if not config.DEBUG_FLAGS.get(flag, False):
        return
    metrics = {k: float(v) for k, v in metrics.items()}
    text = ", ".join(f"{k} = {v:.4g}" for k, v in metrics.items())
    logger.debug(f"[{component.upper()}] {step_name} {step}: {text}",
                 extra={'component': component, 'flag': flag, 'step': int(step), 'metrics': metrics})
