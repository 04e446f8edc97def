"""
Django settings for the spikereg simulation project.

Spiking-network concurrent estimation and control experiments, driven from
management commands. No database or HTTP surface is configured; Django
supplies settings, the command line, logging and the test runner.
"""

import os
from pathlib import Path

# Environment variable loading (.env for local development)
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass

from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get('SECRET_KEY') or config('SECRET_KEY', default='spikereg-local-only-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition
LOCAL_APPS = [
    'core',
    'dynamics',
    'regulator',
    'filters',
    'spiking',
    'harness',
    'cli',
]

INSTALLED_APPS = LOCAL_APPS

# No ORM models: every app is pure computation.
DATABASES = {}

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

TIME_ZONE = "UTC"
USE_TZ = True

# ==============================================================================
# CELERY CONFIGURATION
# ==============================================================================

REDIS_URL = config('REDIS_URL', default='redis://localhost:6379/0')

CELERY_BROKER_URL = config('CELERY_BROKER_URL', default=REDIS_URL)
CELERY_RESULT_BACKEND = config('CELERY_RESULT_BACKEND', default=REDIS_URL)
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = TIME_ZONE

# Sweep cells run in-process unless a worker pool is explicitly configured
CELERY_TASK_ALWAYS_EAGER = config('CELERY_TASK_ALWAYS_EAGER', default=True, cast=bool)
CELERY_TASK_EAGER_PROPAGATES = True

# ==============================================================================
# SIMULATION CONFIGURATION
# ==============================================================================

# Master-seed fallback when the CLI receives no --seed
SPIKEREG_SEED = config('SPIKEREG_SEED', default=None, cast=lambda v: int(v) if v not in (None, '') else None)

# Seeds used by compare and sweeps when none are given
SPIKEREG_DEFAULT_SEEDS = config('SPIKEREG_DEFAULT_SEEDS', default=10, cast=int)

SPIKEREG_OUTPUT_DIR = config('SPIKEREG_OUTPUT_DIR', default='output')

# Relative CARE residual accepted by the regulator
SPIKEREG_CARE_TOLERANCE = config('SPIKEREG_CARE_TOLERANCE', default=1e-8, cast=float)

# Firing loop aborts after N * KMAX spikes in one step
SPIKEREG_FIRING_KMAX = config('SPIKEREG_FIRING_KMAX', default=10, cast=int)

# Window (steps) used to call a neuron "active"
SPIKEREG_ACTIVE_WINDOW = config('SPIKEREG_ACTIVE_WINDOW', default=10, cast=int)

SPIKEREG_PROGRESS = config('SPIKEREG_PROGRESS', default=True, cast=bool)

# ==============================================================================
# LOGGING CONFIGURATION
# ==============================================================================

SPIKEREG_LOG_LEVEL = config('SPIKEREG_LOG_LEVEL', default='DEBUG' if DEBUG else 'INFO')
SPIKEREG_LOG_FILE = config('SPIKEREG_LOG_FILE', default=str(BASE_DIR / 'spikereg.log'))

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
            'level': 'WARNING',
        },
        'file': {
            'class': 'logging.FileHandler',
            'filename': SPIKEREG_LOG_FILE,
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['console', 'file'],
            'level': 'INFO',
            'propagate': True,
        },
        **{
            app: {
                'handlers': ['console', 'file'],
                'level': SPIKEREG_LOG_LEVEL,
                'propagate': False,
            }
            for app in LOCAL_APPS
        },
    },
}
