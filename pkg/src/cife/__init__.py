"""Category-invariant feature enhancement for adversarial domain adaptation."""

__version__ = "0.1.0"
