"""Feature exporter: vision model activations into scoring containers."""

from .export import EmptyDirectory, ExportJob, build_model, export
from .hooks import PenultimateTap, UnsupportedArchitecture

__version__ = "0.1.0"

__all__ = [
    "EmptyDirectory",
    "ExportJob",
    "PenultimateTap",
    "UnsupportedArchitecture",
    "build_model",
    "export",
]
