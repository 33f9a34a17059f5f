from .base import RegressionDataset, TrainingDivergedError
from .disaggregation import (
    ApplianceChain,
    ApplianceStateLibrary,
    FhmmModel,
    disaggregate_co,
    disaggregate_fhmm,
    fit_fhmm,
    fit_states,
    joint_viterbi,
    path_log_likelihood,
)
from .external import ENV_PREFIX, ExternalObjectiveError, external_objective
from .fcnn import FcnnModel, fit_fcnn, network_loss_and_gradients, predict_fcnn
from .tree import (
    ForestModel,
    TreeModel,
    fit_forest,
    fit_tree,
    predict_forest,
    predict_tree,
)

__all__ = [
    "ApplianceChain",
    "ApplianceStateLibrary",
    "ENV_PREFIX",
    "ExternalObjectiveError",
    "FcnnModel",
    "FhmmModel",
    "ForestModel",
    "RegressionDataset",
    "TrainingDivergedError",
    "TreeModel",
    "disaggregate_co",
    "disaggregate_fhmm",
    "external_objective",
    "fit_fcnn",
    "fit_fhmm",
    "fit_forest",
    "fit_states",
    "fit_tree",
    "joint_viterbi",
    "network_loss_and_gradients",
    "path_log_likelihood",
    "predict_fcnn",
    "predict_forest",
    "predict_tree",
]
