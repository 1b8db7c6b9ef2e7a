"""
Run configuration and experiment orchestration for the command line.
"""

from src.services.config import ConfigError, RunConfig, build_config
from src.services.experiments import run

__all__ = [
    'ConfigError',
    'RunConfig',
    'build_config',
    'run',
]
