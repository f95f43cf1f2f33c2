"""Toolkit for resistance-gene classification over sequence and text inputs."""

__version__ = "0.1.0"

from .errors import ArgkitError, BridgeError, DataError, InputError

__all__ = [
    "__version__",
    "ArgkitError",
    "BridgeError",
    "DataError",
    "InputError",
]
