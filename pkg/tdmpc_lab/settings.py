"""
Django settings for tdmpc_lab project.

The project has no web surface: Django provides the settings layer, the ORM
that keeps the run ledger, and the management-command CLI.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

from pathlib import Path
import os
from decouple import config
from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Load dotenv file with local overrides for tolerances and output paths
load_dotenv(BASE_DIR / '.env')


SECRET_KEY = config('SECRET_KEY', default='tdmpc-lab-local-only-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    # Project apps
    'core',
    'plants',
    'condensing',
    'solvers',
    'certificates',
    'simulation',
    'experiments',
]


# Database
# https://docs.djangoproject.com/en/4.2/ref/settings/#databases

# Use test database if TEST_DATABASE environment variable is set
TEST_DATABASE = os.environ.get('TEST_DATABASE')

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': TEST_DATABASE if TEST_DATABASE else BASE_DIR / 'db.sqlite3',
    }
}


# Internationalization
# https://docs.djangoproject.com/en/4.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

# Default primary key field type
# https://docs.djangoproject.com/en/4.2/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging
TDMPC_LOG_LEVEL = config('TDMPC_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': TDMPC_LOG_LEVEL,
            'propagate': False,
        }
        for app in ('core', 'plants', 'condensing', 'solvers', 'certificates', 'simulation', 'experiments')
    },
}


# Experiment Configuration
TDMPC_OUTPUT_DIR = Path(config('TDMPC_OUTPUT_DIR', default=str(BASE_DIR / 'results')))
TDMPC_PRESET_DIR = BASE_DIR / 'experiments' / 'presets'

# Tolerance of the diagnostic mu* solves (psi, d_k, Lyapunov values)
TDMPC_SOLVER_TOL = config('TDMPC_SOLVER_TOL', default=1e-10, cast=float)
# Tolerance of the optimal-MPC benchmark and of oracle cross-checks
TDMPC_ORACLE_TOL = config('TDMPC_ORACLE_TOL', default=1e-12, cast=float)

# 'zoh' (exact matrix exponential) or 'euler' (forward Euler, for comparison)
TDMPC_DISCRETIZATION = config('TDMPC_DISCRETIZATION', default='zoh')
# Optimizer iterate after a horizon switch: 'truncate', 'zero_pad' or 'cold'
TDMPC_WARM_START = config('TDMPC_WARM_START', default='truncate')
# Switch-time formula: 'proof' uses h(N_{j-1}), 'displayed' uses h(N_j)
TDMPC_KJ_VARIANT = config('TDMPC_KJ_VARIANT', default='proof')
# Switch times computed once from x0 ('offline') or at phase entry ('online')
TDMPC_SWITCH_MODE = config('TDMPC_SWITCH_MODE', default='offline')
# 'symmetrized' uses sym(G Bbar); 'gram' uses (G Bbar)^T H^-1 (G Bbar)
TDMPC_KAPPA_MODE = config('TDMPC_KAPPA_MODE', default='symmetrized')

TDMPC_DEFAULT_SEED = config('TDMPC_DEFAULT_SEED', default=0, cast=int)
