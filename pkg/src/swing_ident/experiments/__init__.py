from .metrics import percent_error
from .harness import ExperimentSpec, ResultRecord, run_length_sweep, run_noise_sweep
from .reconstruct import reconstruct
from .report import emit_report
