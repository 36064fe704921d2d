"""Unsupervised painting stylometry.

Colour patches are mapped into a Cartesian HSL double cone. Each channel
goes through a dual-tree complex wavelet transform. Hidden-Markov-tree
parameters of the fused magnitudes become 120-entry style features. These
are quantized into a binary-tree vocabulary, and LDA is run over per
sub-image keyword bags. Results come out as pattern profiles, heatmaps and
a t-SNE map.
"""
from . import colorspace, embed, hmt, topics, transform, vocab
from .errors import ConfigError, DomainError, InputError, PaintStyleError, PipelineError, ShapeError

__version__ = "0.1.0"

__all__ = ["colorspace", "transform", "hmt", "vocab", "topics", "embed", "PaintStyleError", "InputError",
           "ShapeError", "DomainError", "ConfigError", "PipelineError", "__version__"]
