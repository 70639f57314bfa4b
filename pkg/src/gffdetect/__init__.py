"""
Multi-face deepfake detection from geometric and fakeness features.
"""

try:
    from ._version import version as __version__
except ImportError:  # pragma: no cover
    __version__ = "0.0.0"

from .tinynet.params import MODEL_FORMAT


__all__ = ['__version__', 'MODEL_FORMAT']
