"""Regression engines used by the calibration methods."""

from .boosting import BoostedModel, Loss, gbm_fit, gbm_predict
from .forest import Forest, forest_fit
from .nn import NeuralFit, nn_fit
from .quantiles import weighted_quantile
from .trees import Tree, build_tree, presort
from .wls import WlsFit, wls_fit


def forest_quantiles(forest: Forest, x0, probs=(0.025, 0.5, 0.975)):
    return forest.quantiles(x0, probs)


__all__ = [
    "BoostedModel", "Forest", "Loss", "NeuralFit", "Tree", "WlsFit",
    "build_tree", "forest_fit", "forest_quantiles", "gbm_fit", "gbm_predict",
    "nn_fit", "presort", "weighted_quantile", "wls_fit",
]
