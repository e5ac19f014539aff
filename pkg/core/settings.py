"""
Django settings for the stegolab project.
"""

from dotenv import load_dotenv
load_dotenv()
import os
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get('SECRET_KEY', 'django-insecure-stegolab-local-only-7s1y^x4q!b2m')

DEBUG = os.environ.get('DEBUG', 'False').lower() in ('true', '1', 'yes', 'on')
ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'rest_framework',
    'codec',
    'generator',
    'channels',
    'optimizer',
    'security',
    'harness',
]

# Database (experiment ledger only)
DATABASE_ENGINE = os.environ.get('DATABASE_ENGINE', 'sqlite3')

if DATABASE_ENGINE == 'postgresql':
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.postgresql',
            'NAME': os.environ.get('DATABASE_NAME', 'stegolab'),
            'USER': os.environ.get('DATABASE_USER', 'stegolab'),
            'PASSWORD': os.environ.get('DATABASE_PASSWORD', ''),
            'HOST': os.environ.get('DATABASE_HOST', 'localhost'),
            'PORT': os.environ.get('DATABASE_PORT', '5432'),
        }
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': BASE_DIR / os.environ.get('DATABASE_NAME', 'db.sqlite3'),
        }
    }

TIME_ZONE = os.environ.get('TIME_ZONE', 'UTC')
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
    'COERCE_DECIMAL_TO_STRING': False,
}

# Logging
LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO').upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'terse': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'terse',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': LOG_LEVEL,
    },
    'loggers': {
        'django': {'handlers': ['console'], 'level': 'WARNING', 'propagate': False},
    },
}


def _env(name, default):
    return os.environ.get(f'STEGO_{name}', default)


# Experiment defaults
STEGO = {
    'LATENT_SHAPE': _env('LATENT_SHAPE', '4,16,16'),
    'IMAGE_SHAPE': _env('IMAGE_SHAPE', '128,128,3'),
    'HIDDEN_WIDTH': int(_env('HIDDEN_WIDTH', '8')),
    'ACTIVATION_SCALE': float(_env('ACTIVATION_SCALE', '1.0')),
    'SPATIAL_BLEND': float(_env('SPATIAL_BLEND', '0.015')),
    'GENERATOR_SEED': int(_env('GENERATOR_SEED', '42')),
    'SECOND_GENERATOR_SEED': int(_env('SECOND_GENERATOR_SEED', '4242')),
    'SECOND_HIDDEN_WIDTH': int(_env('SECOND_HIDDEN_WIDTH', '12')),
    'OPTIMIZER_STEPS': int(_env('OPTIMIZER_STEPS', '100')),
    'ETA': _env('ETA', 'auto'),
    'AUTO_SAFETY': float(_env('AUTO_SAFETY', '0.9')),
    'LIPSCHITZ_PROBES': int(_env('LIPSCHITZ_PROBES', '4')),
    'LIPSCHITZ_ITERS': int(_env('LIPSCHITZ_ITERS', '2000')),
    'TRIALS': int(_env('TRIALS', '100')),
    'MESSAGE_MODE': _env('MESSAGE_MODE', 'random'),
    'MASTER_SEED': int(_env('MASTER_SEED', '0')),
    'SIGNIFICANCE': float(_env('SIGNIFICANCE', '0.01')),
    'WORKERS': int(_env('WORKERS', '1')),
    'OUTPUT_DIR': BASE_DIR / _env('OUTPUT_DIR', 'results'),
}
