"""AutoML for energy disaggregation.

TPE search over a conditional method/hyper-parameter tree, natively
implemented NILM estimators (decision tree, random forest, FCNN, CO, FHMM),
a data harness for REDD-format and synthetic homes, and pipeline constraint
checking.
"""
from .data import (
    DataError,
    RawRecording,
    SynthSpec,
    TimeSeriesDataset,
    default_synth_spec,
    generate_synthetic,
    load_csv,
    load_redd,
    resample,
    save_csv,
)
from .harness import (
    SplitSpec,
    disaggregation_accuracy,
    mae,
    make_windows,
    objective_for,
    standardize,
)
from .pipeline import Diagnostic, PipelineDescription, validate_pipeline
from .searchspace import (
    Configuration,
    ParamSpec,
    SearchSpace,
    builtin_space,
    sample_prior,
    subspace,
    validate_config,
)
from .tpe import (
    ParzenDensity,
    TpeConfig,
    Trial,
    TrialHistory,
    fit_parzen,
    report,
    run_optimization,
    score_candidates,
    split_observations,
    suggest,
)

__version__ = "0.1.0"
