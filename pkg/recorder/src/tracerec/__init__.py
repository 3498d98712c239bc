"""Trace recorder: drives a masked language model and records replayable traces."""

from .model import UnsupportedModelError, load_model
from .recorder import RecorderConfig, RecordedTrace, record_static_trace

__version__ = "0.1.0"

__all__ = [
    "RecorderConfig",
    "RecordedTrace",
    "UnsupportedModelError",
    "load_model",
    "record_static_trace",
]
