"""Multi-grain LDA topic extraction."""

from .backend import BACKEND
from .model import (
    GibbsState,
    MgldaParams,
    TopicModel,
    estimate_phi,
    init_state,
    load_model,
    save_model,
    top_words,
    train,
    write_top_words,
)

__all__ = [
    "BACKEND", "GibbsState", "MgldaParams", "TopicModel", "estimate_phi", "init_state",
    "load_model", "save_model", "top_words", "train", "write_top_words",
]
