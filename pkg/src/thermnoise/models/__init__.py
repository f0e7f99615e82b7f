from .base import (
    SPEC_TYPES,
    ForestSpec,
    GnbSpec,
    KnnSpec,
    MlpSpec,
    TrainedModel,
    TreeSpec,
    default_specs,
    fit,
    spec_from_dict,
)
from .mlp import mlp_gradient_check


def predict(model: TrainedModel, X):
    return model.predict(X)


def predict_proba(model: TrainedModel, X):
    return model.predict_proba(X)
