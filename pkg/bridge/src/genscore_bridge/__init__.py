"""Serves a pretrained sequence-to-sequence checkpoint over the scoring wire protocol."""

from .config import BridgeConfig
from .model import ScoringModel

__version__ = "0.1.0"

__all__ = ["BridgeConfig", "ScoringModel", "__version__"]
