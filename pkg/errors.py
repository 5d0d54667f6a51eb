"""
Error types for the diarization simulation
Every failure carries a short machine-readable code next to the message
"""

from typing import Optional


class DiarizationError(ValueError):
    """
    Error raised by any stage of the simulation, pipeline or scorer

    Attributes:
        code: Short identifier such as 'dim_mismatch' or 'empty_reference'
        message: Human-readable detail
        line: Line number for file-parsing errors, None otherwise
    """

    def __init__(self, code: str, message: str = "", line: Optional[int] = None):
        self.code = code
        self.message = message
        self.line = line
        text = f"{code}: {message}" if message else code
        if line is not None:
            text = f"line {line}: {text}"
        super().__init__(text)
