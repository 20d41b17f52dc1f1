from .checkpoint import load_checkpoint, save_checkpoint
from .functional import (BatchNormState, avg_pool, batch_norm, conv2d_forward, dropout,
                         fc_forward, leaky_relu, loss_rmse100, tanh_act)
from .model import ConvSpec, Mode, Model, ModelConfig, PoolSpec
from .optim import Adam
from .tensor import Tensor
from .training import EpochRecord, History, TrainConfig, TrainingDiverged, train

__all__ = [
    "Adam", "BatchNormState", "ConvSpec", "EpochRecord", "History", "Mode", "Model",
    "ModelConfig", "PoolSpec", "Tensor", "TrainConfig", "TrainingDiverged", "avg_pool",
    "batch_norm", "conv2d_forward", "dropout", "fc_forward", "leaky_relu", "load_checkpoint",
    "loss_rmse100", "save_checkpoint", "tanh_act", "train",
]
