"""
Small numpy network scoring GFF matrices and aggregating them into a
video verdict, with hand-written backward passes and a Nesterov SGD
training loop.
"""

from .params import (
    MODEL_FORMAT, CnnBlockParams, AggregatorParams, ModelParams, save_model, load_model,
)
from .network import (
    cnnblock_forward, cnnblock_backward, aggregator_forward, aggregator_backward,
    model_forward, model_backward, bce_loss, bce_grad,
)
from .optim import sgd_nesterov_step, lookahead
from .training import VideoPrediction, train, predict_video, write_loss_history
from .gradcheck import GradCheckResult, gradient_check


__all__ = [
    "MODEL_FORMAT",
    "CnnBlockParams",
    "AggregatorParams",
    "ModelParams",
    "save_model",
    "load_model",
    "cnnblock_forward",
    "cnnblock_backward",
    "aggregator_forward",
    "aggregator_backward",
    "model_forward",
    "model_backward",
    "bce_loss",
    "bce_grad",
    "sgd_nesterov_step",
    "lookahead",
    "VideoPrediction",
    "train",
    "predict_video",
    "write_loss_history",
    "GradCheckResult",
    "gradient_check",
]
