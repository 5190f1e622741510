"""Dictionary-learning data pruning for reduced polynomial NARX identification."""

__version__ = "0.1.0"

from .datasets import (
    Dataset,
    SimulationConfig,
    generate_adse,
    generate_sdse,
    generate_sine_demo,
    load_benchmark_csv,
    load_manifest,
    simulate_dse,
)
from .dictionary import Dictionary, KMeansOptions, learn_dictionary
from .evaluation import coefficient_r2, fit_baseline, pca_project, run_trials, sweep
from .fastcan import select_greedy
from .narx import (
    PRESETS,
    ReducedNarxModel,
    fit,
    predict_one_step,
    select_terms,
    simulate_free_run,
)
from .pruning import (
    build_batch_matrix,
    prune_minibatch_fastcan,
    prune_random,
    resolve_batch_size,
)
from .termlib import (
    TermDescriptor,
    TermLibrary,
    TimeSeries,
    build_library,
    build_shift_matrix,
    expand_polynomial,
)
