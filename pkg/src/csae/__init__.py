"""Classification-supervised autoencoder on predefined evenly-distributed
class centroids, at desk scale: centroid generation, Haar wavelets loss,
a small fully-connected autoencoder, nearest-centroid classification and
class-conditional sampling."""
from .kernels import BACKEND
from .pedcc import CentroidSet, PedccConfig, generate
from .trainer import TrainConfig, evaluate, train

__version__ = "0.1.0"

__all__ = ["BACKEND", "CentroidSet", "PedccConfig", "generate", "TrainConfig", "train", "evaluate"]
