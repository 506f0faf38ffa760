"""Quality-resilient snapshot ensembles trained with random-quality mixup."""

from .autodiff import Architecture, ModelParams, default_architecture, init_params
from .data import Dataset, SynthConfig, generate_synthetic, load_qrds, save_qrds, split
from .distortion import DistortionSpec, LevelFamily
from .ensemble import EnsembleModel, Snapshot, predict_ensemble, predict_single, top_k
from .evaluation import SweepGrid, evaluate, sweep
from .mixup import MixPolicy, mix_batch, mix_pair
from .schedule import SchedulePlan, lr_at, make_cycle_plan, snapshot_points
from .trainer import TrainConfig, train_baseline, train_gspecialist

__version__ = "0.1.0"
