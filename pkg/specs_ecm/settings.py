"""
Django settings for the SPECS error-correction toolkit.
"""
from pathlib import Path

import dj_database_url
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-specs-ecm-local-only')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',

    # Third-party apps
    'rest_framework',

    # Local apps
    'core',
    'design',
    'solver',
    'tuning',
    'benchmarks',
    'simulation',
    'runs',
]

MIDDLEWARE = []

# Database
# The run ledger is the only table; sqlite is enough unless DATABASE_URL says otherwise.
DATABASE_URL = config('DATABASE_URL', default=f"sqlite:///{BASE_DIR / 'specs_ecm.sqlite3'}")

DATABASES = {
    'default': dj_database_url.parse(DATABASE_URL)
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# REST Framework settings (serializers only; nothing is served over HTTP)
REST_FRAMEWORK = {
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
    'UNAUTHENTICATED_USER': None,
    'COERCE_DECIMAL_TO_STRING': False,
}

# Cache settings (simulated critical values are memoized here)
CACHES = {
    'default': {
        'BACKEND': 'django.core.cache.backends.locmem.LocMemCache',
        'LOCATION': 'specs-ecm',
        'TIMEOUT': None,
        'OPTIONS': {
            'MAX_ENTRIES': 4096,
        },
    }
}

TEST_RUNNER = 'core.testing.SpecsTestRunner'
SPECS_RUN_SLOW = config('SPECS_RUN_SLOW', default=False, cast=bool)

# Parallelism cap; 0 means no cap
SPECS_NUM_THREADS = config('SPECS_NUM_THREADS', default=0, cast=int)

# Solver settings
SPECS_MAX_ITERATIONS = config('SPECS_MAX_ITERATIONS', default=10000, cast=int)
SPECS_TOLERANCE = config('SPECS_TOLERANCE', default=1e-8, cast=float)
SPECS_KKT_TOLERANCE = config('SPECS_KKT_TOLERANCE', default=1e-7, cast=float)
SPECS_POWER_ITERATIONS = config('SPECS_POWER_ITERATIONS', default=50, cast=int)
SPECS_POWER_TOLERANCE = config('SPECS_POWER_TOLERANCE', default=1e-6, cast=float)
SPECS_ACCELERATION = config('SPECS_ACCELERATION', default=True, cast=bool)
SPECS_STANDARDIZE = config('SPECS_STANDARDIZE', default=False, cast=bool)

# Penalty grid and adaptive weights
SPECS_N_LAMBDA_I = config('SPECS_N_LAMBDA_I', default=100, cast=int)
SPECS_N_LAMBDA_G = config('SPECS_N_LAMBDA_G', default=10, cast=int)
SPECS_EPS_RATIO = config('SPECS_EPS_RATIO', default=1e-4, cast=float)
SPECS_K_DELTA = config('SPECS_K_DELTA', default=2.0, cast=float)
SPECS_K_PI = config('SPECS_K_PI', default=1.0, cast=float)
SPECS_LAMBDA_RIDGE = config('SPECS_LAMBDA_RIDGE', default='auto')

# Simulation settings
SPECS_BURN_IN = config('SPECS_BURN_IN', default=200, cast=int)
SPECS_WALD_DRAWS = config('SPECS_WALD_DRAWS', default=1999, cast=int)

# Run ledger
SPECS_RECORD_RUNS = config('SPECS_RECORD_RUNS', default=True, cast=bool)
SPECS_VERSION = '0.4.0'

# Logging
SPECS_LOG_LEVEL = config('SPECS_LOG_LEVEL', default='INFO')

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
            'level': SPECS_LOG_LEVEL,
            'class': 'logging.StreamHandler',
            'formatter': 'simple'
        },
        'file': {
            'level': 'WARNING',
            'class': 'logging.FileHandler',
            'filename': BASE_DIR / 'logs' / 'specs.log',
            'formatter': 'verbose'
        },
    },
    'loggers': {
        'django': {
            'handlers': ['console', 'file'],
            'level': 'WARNING',
            'propagate': True,
        },
        'specs': {
            'handlers': ['console', 'file'],
            'level': SPECS_LOG_LEVEL,
            'propagate': False,
        },
        'design': {'handlers': ['console', 'file'], 'level': SPECS_LOG_LEVEL, 'propagate': False},
        'solver': {'handlers': ['console', 'file'], 'level': SPECS_LOG_LEVEL, 'propagate': False},
        'tuning': {'handlers': ['console', 'file'], 'level': SPECS_LOG_LEVEL, 'propagate': False},
        'benchmarks': {'handlers': ['console', 'file'], 'level': SPECS_LOG_LEVEL, 'propagate': False},
        'simulation': {'handlers': ['console', 'file'], 'level': SPECS_LOG_LEVEL, 'propagate': False},
        'runs': {'handlers': ['console', 'file'], 'level': SPECS_LOG_LEVEL, 'propagate': False},
    },
}

# Create logs directory if it doesn't exist
LOG_DIR = BASE_DIR / 'logs'
LOG_DIR.mkdir(exist_ok=True)
