"""DM-GNN: dual message-passing graph neural network for scene-graph QA."""

from .backend import USING_COMPILED

__version__ = "0.1.0"

__all__ = ["USING_COMPILED", "__version__"]
