from .net import FeedforwardNet, TrainResult, TrainSchedule, TrainingDiverged, nn_train
from .optimize import LsqFitResult, lsq_minimize
from .ridge import PolyRidgeModel, RankDeficientError, fit_poly_ridge


def nn_forward(net: FeedforwardNet, features) -> float:
    return net(features)


__all__ = [
    "FeedforwardNet", "TrainResult", "TrainSchedule", "TrainingDiverged", "nn_train",
    "nn_forward", "LsqFitResult", "lsq_minimize", "PolyRidgeModel",
    "RankDeficientError", "fit_poly_ridge",
]
