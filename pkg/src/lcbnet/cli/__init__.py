"""Command-line interface: ``lcbnet synth|train|decode|score|simulate|attention``."""
from .config import DecodeConfig, PathsConfig, RunConfig, load_config, parse_config
from .main import main

__all__ = ["DecodeConfig", "PathsConfig", "RunConfig", "load_config", "main", "parse_config"]
