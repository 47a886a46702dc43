"""Multivariate time-series imputation with hypernetwork-generated implicit neural representations."""
import os as _os

# IMPUTEINR_THREADS caps BLAS threads; it must be applied before numpy loads.
if _os.environ.get("IMPUTEINR_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["IMPUTEINR_THREADS"])

from .clustering import ClusterPartition, agglomerate, similarity_matrix  # noqa: E402
from .data import TimeSeriesWindow, load_csv, make_windows, standardize  # noqa: E402
from .model import ImputeINR, ModelConfig  # noqa: E402
from .training import TrainConfig, train  # noqa: E402

__version__ = "0.1.0"
__all__ = ["ClusterPartition", "ImputeINR", "ModelConfig", "TimeSeriesWindow", "TrainConfig", "agglomerate",
           "load_csv", "make_windows", "similarity_matrix", "standardize", "train"]
