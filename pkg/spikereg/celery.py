"""
Celery configuration for the spikereg simulation project.

Sweep and comparison cells are dispatched as ``harness.tasks.run_cell``.
CELERY_TASK_ALWAYS_EAGER defaults to True, so desk-scale runs need no
broker; start ``celery -A spikereg worker`` with eager mode off to spread
cells over processes.
"""

import os

from celery import Celery

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'spikereg.settings')

app = Celery('spikereg')

# CELERY_* keys of the Django settings configure the app
app.config_from_object('django.conf:settings', namespace='CELERY')

# picks up harness/tasks.py
app.autodiscover_tasks()
