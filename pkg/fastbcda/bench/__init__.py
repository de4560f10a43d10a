"""Target-value benchmark protocol and performance profiles."""

from fastbcda.bench.experiment import (
    RESULT_COLUMNS,
    Cell,
    experiment_cells,
    load_experiment_spec,
    read_results_csv,
    run_experiment,
    run_experiment_async,
    solver_overrides,
    write_error_averages,
    write_results_csv,
)
from fastbcda.bench.profiles import (
    ERROR_COLUMNS,
    average_error_traces,
    performance_profile,
    relative_error_trace,
    write_error_csv,
    write_profile_csv,
)
