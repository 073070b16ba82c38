"""Design and simulation toolkit for a three-wheel, spring-loaded in-pipe robot."""

from .config import load_config, loads_config
from .sim import PRESETS, run_scenario

__version__ = "0.1.0"

__all__ = ["load_config", "loads_config", "PRESETS", "run_scenario", "__version__"]
