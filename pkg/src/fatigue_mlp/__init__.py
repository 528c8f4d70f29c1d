"""Fatigue crack-length regression with a small from-scratch MLP."""

from .dataset import (
    CrackGrowthRecord,
    CrackGrowthSeries,
    Dataset,
    LoadCondition,
    condition_features,
    generate_synthetic,
    parse_csv,
    read_csv,
    serialize_csv,
)
from .evaluation import EvalReport, evaluate, export_scatter, mape, render_tables
from .nn import Mlp, MlpConfig, TrainConfig, TrainReport, init, load, predict, save, train
from .pipeline import DataSplits, Normalizer, SplitSpec, fit_normalizer, make_splits

__version__ = "0.1.0"
