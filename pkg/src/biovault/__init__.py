"""Chain-anchored biometric records: face and voice gates over content-addressed storage."""

__version__ = "0.1.0"

from .config import SystemConfig, load_config, save_config
from .errors import BiovaultError
from .workflows import App

__all__ = [
    "App",
    "BiovaultError",
    "SystemConfig",
    "__version__",
    "load_config",
    "save_config",
]
