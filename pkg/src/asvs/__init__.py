"""Adversarially trained multi-singer sequence-to-sequence singing acoustic model."""

__version__ = "0.1.0"
