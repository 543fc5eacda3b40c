"""Trainer for the bipartite primal-dual reasoning network.

Consumes trajectory datasets and writes portable weights files; the solver
package runs the exported weights for inference and benchmarking.
"""

from .evaluate import evaluate, free_run, ratio_summary
from .model import GraphBatch, PrimalDualNet
from .records import TrainRecord, read_dataset_dir, read_records
from .train import TrainConfig, train

__version__ = "0.1.0"
