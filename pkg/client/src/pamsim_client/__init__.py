"""Dependency-free UDP client for the pamsim control service."""

__version__ = "0.1.0"

from .codec import (  # noqa: F401
    ClientError,
    ClientProtocolError,
    ClientTimeoutError,
    RobotState,
    decode_state,
    encode_command,
)
from .session import ClientSession  # noqa: F401
