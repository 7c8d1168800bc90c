"""
Django settings for the MCV quadrotor experiments project.

Batch simulator for minimum-cost-variance and LQR control of a quadrotor
in turbulent wind:
- Django for configuration, logging and the management-command CLI
- Django REST framework serializers for scenario validation
- numpy / scipy / pandas for the numerics and result files

For more information on this file, see
https://docs.djangoproject.com/en/5.2/topics/settings/
"""

import os
from pathlib import Path


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get(
    'DJANGO_SECRET_KEY',
    'django-insecure-mcv-experiments-local-only'
)

DEBUG = os.environ.get('DJANGO_DEBUG', 'False').lower() in ('true', '1', 'yes')

ALLOWED_HOSTS = []


# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
    'experiments',
]


# Database
# No model is stored; the default connection exists only because
# django.contrib.auth expects one.
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


# Internationalization
LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# =============================================================================
# EXPERIMENT CONFIGURATION
# =============================================================================
# Where commands write CSV and plot files unless [output] dir or --out is set
MCV_OUTPUT_DIR = Path(os.environ.get('MCV_OUTPUT_DIR', BASE_DIR / 'results'))

# Default scenario files for each command
MCV_SCENARIO_DIR = Path(os.environ.get('MCV_SCENARIO_DIR', BASE_DIR / 'scenarios'))

# Monte Carlo worker processes (1 runs inline)
MCV_WORKERS = int(os.environ.get('MCV_WORKERS', '1'))

# Base seed when neither [run] seed nor --seed is given
MCV_DEFAULT_SEED = int(os.environ.get('MCV_DEFAULT_SEED', '2024'))


# =============================================================================
# LOGGING CONFIGURATION
# =============================================================================
LOG_LEVEL = os.environ.get('MCV_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
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
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
        'mcv_control': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'data_manager': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'experiments': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}
