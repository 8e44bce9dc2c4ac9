# -*- coding: utf-8 -*-

"""Tempo-embed trains interaction-network embeddings with t-batching and compares batch losses."""

from .errors import TempoEmbedError
from .graphdata import InteractionLog, chronological_split, load_csv, save_csv, summary_stats
from .losses import LossKind, batch_loss
from .tbatcher import build_batches
from .trainer import TrainConfig, train
from .version import get_version

__all__ = [
    "InteractionLog",
    "LossKind",
    "TempoEmbedError",
    "TrainConfig",
    "batch_loss",
    "build_batches",
    "chronological_split",
    "get_version",
    "load_csv",
    "save_csv",
    "summary_stats",
    "train",
]
