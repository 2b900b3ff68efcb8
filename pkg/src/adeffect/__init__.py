"""Video advertisement effectiveness: features, per-feature learners and a routing ensemble."""

__version__ = "0.1.0"
