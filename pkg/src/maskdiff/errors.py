"""Exception hierarchy shared across the engine.

The split mirrors the CLI exit codes: configuration problems (1), broken
runtime contracts such as a scheduler touching an unmasked position (2),
and trace-file problems (3).
"""

from __future__ import annotations


class MaskdiffError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(MaskdiffError):
    """Invalid construction parameters, run configs, or CLI usage."""


class ContractViolation(MaskdiffError):
    """A runtime contract between modules was broken.

    Examples: a decision set targeting an already-unmasked position, a
    quota exceeding the number of masked positions, or a predictor asked
    to estimate a fully unmasked sequence.
    """


class PredictorError(MaskdiffError):
    """A predictor failed to produce an estimate."""


class TraceError(MaskdiffError):
    """Base class for trace-file problems."""


class TraceFormatError(TraceError):
    """A trace file failed to parse or validate."""


class TraceMissError(TraceError):
    """A replay predictor was queried with a state absent from its trace."""

    def __init__(self, key: str, step: int):
        self.key = key
        self.step = step
        super().__init__(f"trace has no record for state {key} at step {step}")
