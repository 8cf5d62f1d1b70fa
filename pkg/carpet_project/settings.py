import os
from decouple import config

# Nothing here is served over HTTP, but Django refuses to start without a key
SECRET_KEY = config('SECRET_KEY', default='carpets-local-development-key')
if not SECRET_KEY:
    raise ValueError("SECRET_KEY environment variable is empty. Please set it in your .env file.")

DEBUG = config('DEBUG', default=False, cast=bool)


# Application definition
INSTALLED_APPS = [
    'rest_framework',
    'carpets',
]

MIDDLEWARE = []

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [],
        },
    },
]

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = True
USE_TZ = True

# ====================================================================
# REST FRAMEWORK CONFIGURATION
# ====================================================================
# Only the serializer layer is used (config schema + report schema)
REST_FRAMEWORK = {
    'COERCE_DECIMAL_TO_STRING': False,
    'UNAUTHENTICATED_USER': None,
}

# ====================================================================
# CARPET COMPUTATION DEFAULTS
# ====================================================================
# Management commands take their flag defaults from here
CARPETS = {
    'SOLVER_TOL': config('CARPET_SOLVER_TOL', default=1e-12, cast=float),
    'OPTIMIZER_TOL': config('CARPET_OPTIMIZER_TOL', default=1e-10, cast=float),
    'GEOMETRY_SLACK': config('CARPET_GEOMETRY_SLACK', default=1e-12, cast=float),
    'HYPOTHESIS_TOL': config('CARPET_HYPOTHESIS_TOL', default=1e-9, cast=float),
    'HYPOTHESIS_GRID': config('CARPET_HYPOTHESIS_GRID', default=1025, cast=int),
    'ROBUST_EPS': config('CARPET_ROBUST_EPS', default=0.05, cast=float),
    'AGREEMENT_TOL': config('CARPET_AGREEMENT_TOL', default=1e-4, cast=float),
    'STARTS': config('CARPET_STARTS', default=16, cast=int),
    'T_GRID': config('CARPET_T_GRID', default=64, cast=int),
    'APPROX_CAP': config('CARPET_APPROX_CAP', default=200000, cast=int),
    'SVG_WIDTH': config('CARPET_SVG_WIDTH', default=512, cast=int),
    'THREADS': config('CARPET_THREADS', default=1, cast=int),  # 0 = one per CPU
}

# ====================================================================
# LOGGING
# ====================================================================
CARPET_LOG_LEVEL = config('CARPET_LOG_LEVEL', default='INFO')
CARPET_LOG_DIR = config('CARPET_LOG_DIR', default='')

_log_handlers_base = {
    'console': {
        'level': CARPET_LOG_LEVEL,
        'class': 'logging.StreamHandler',
        'formatter': 'simple',
    },
}

if CARPET_LOG_DIR:
    os.makedirs(CARPET_LOG_DIR, exist_ok=True)
    _log_handlers_base.update({
        'file': {
            'level': CARPET_LOG_LEVEL,
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': os.path.join(CARPET_LOG_DIR, 'carpets.log'),
            'maxBytes': 1024 * 1024 * 15,
            'backupCount': 10,
            'formatter': 'verbose',
        },
    })
    _carpet_handlers = ['console', 'file']
else:
    _carpet_handlers = ['console']

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {asctime} {message}',
            'style': '{',
        },
    },
    'handlers': _log_handlers_base,
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'WARNING',
            'propagate': True,
        },
        'carpets': {
            'handlers': _carpet_handlers,
            'level': CARPET_LOG_LEVEL,
            'propagate': False,
        },
    },
}
