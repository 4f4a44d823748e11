"""
Run configuration and the shipped modality configs.
"""

from .settings import RunConfig, load_run_config

__all__ = ['RunConfig', 'load_run_config']
