"""
spikereg: spiking-network concurrent estimation and control experiments.

The Celery app is imported here so ``harness.tasks`` binds its shared tasks
to it whenever Django starts.
"""

from .celery import app as celery_app

__version__ = '0.1.0'

__all__ = ('celery_app', '__version__')
