"""Energy-provision control for multi-HAP wireless-powered edge computing."""
from .config import NetworkConfig, load_config, make_config, validate_config

__version__ = "0.1.0"
__all__ = ["NetworkConfig", "load_config", "make_config", "validate_config"]
