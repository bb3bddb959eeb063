"""BeamVQ: physics-scored beam search over a VQ code bank with self-training."""

__version__ = "0.1.0"
