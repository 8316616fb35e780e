"""
Django settings for uweb_project project.
"""

from pathlib import Path
import os
from dotenv import load_dotenv
import dj_database_url


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent
# Load environment variables
load_dotenv(BASE_DIR / '.env')
# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv('SECRET_KEY', 'django-insecure-dev-key-change-in-production')

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = os.getenv('DEBUG', 'True').lower() == 'true'

ALLOWED_HOSTS = os.getenv('ALLOWED_HOSTS', 'localhost,127.0.0.1').split(',')

# Application definition
INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',

    # Third party apps
    'django_q',

    # Local apps
    'txcodec',
    'maxrate',
    'uweb',
    'chainsim.apps.ChainsimConfig',
    'attacks',
    'cli.apps.CliConfig',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'uweb_project.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'uweb_project.wsgi.application'

# UWeb toolkit settings
UWEB_DATA_DIR = Path(os.getenv('UWEB_DATA_DIR', BASE_DIR / 'uweb_data'))
UWEB_FEE_RATE = int(os.getenv('UWEB_FEE_RATE', '1'))
UWEB_DUST_RELAY_RATE = int(os.getenv('UWEB_DUST_RELAY_RATE', '3'))
UWEB_EPOCH_SECONDS = float(os.getenv('UWEB_EPOCH_SECONDS', '150'))
UWEB_BANDWIDTH = float(os.getenv('UWEB_BANDWIDTH', '125000000'))  # bytes/sec, 1 Gb/s
UWEB_SEED = int(os.getenv('UWEB_SEED', '0'))
UWEB_SIGNATURE_SCHEME = os.getenv('UWEB_SIGNATURE_SCHEME', 'keyed-hash')
UWEB_MLTC_RATIO = int(os.getenv('UWEB_MLTC_RATIO', '100000'))  # base units per mLTC
UWEB_GENESIS_VALUE = int(os.getenv('UWEB_GENESIS_VALUE', '1000000000'))
UWEB_MAX_BLOCK_SIZE = int(os.getenv('UWEB_MAX_BLOCK_SIZE', '1000000'))

UWEB_DATA_DIR.mkdir(parents=True, exist_ok=True)

# Database
DATABASES = {
    'default': dj_database_url.config(default=f"sqlite:///{UWEB_DATA_DIR / 'uweb.sqlite3'}")
}

# Password validation
AUTH_PASSWORD_VALIDATORS = [
    {
        'NAME': 'django.contrib.auth.password_validation.UserAttributeSimilarityValidator',
    },
    {
        'NAME': 'django.contrib.auth.password_validation.MinimumLengthValidator',
    },
]

# Internationalization
LANGUAGE_CODE = 'en'
TIME_ZONE = 'UTC'
USE_I18N = True
USE_TZ = True

# Static files (CSS, JavaScript, Images)
STATIC_URL = 'static/'
STATIC_ROOT = BASE_DIR / 'staticfiles'

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Django-Q Configuration
Q_CLUSTER = {
    'name': 'uweb',
    'workers': 2,
    'timeout': 3600,
    'retry': 3700,
    'queue_limit': 10,
    'bulk': 1,
    'orm': 'default',
}

# Logging Configuration
LOGS_DIR = BASE_DIR / 'logs'
LOGS_DIR.mkdir(exist_ok=True)

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '[{levelname}] {asctime} {name} {message}',
            'style': '{',
            'datefmt': '%Y-%m-%d %H:%M:%S',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': os.getenv('UWEB_CONSOLE_LOG_LEVEL', 'WARNING'),
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
        'uweb_file': {
            'level': 'INFO',
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': LOGS_DIR / 'uweb.log',
            'maxBytes': 1024 * 1024 * 10,  # 10 MB
            'backupCount': 5,
            'formatter': 'verbose',
        },
        'uweb_error_file': {
            'level': 'ERROR',
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': LOGS_DIR / 'uweb_errors.log',
            'maxBytes': 1024 * 1024 * 10,  # 10 MB
            'backupCount': 5,
            'formatter': 'verbose',
        },
    },
    'loggers': {
        name: {
            'handlers': ['console', 'uweb_file', 'uweb_error_file'],
            'level': 'DEBUG' if DEBUG else 'INFO',
            'propagate': False,
        }
        for name in ('txcodec', 'maxrate', 'uweb', 'uweb.scan', 'uweb.access', 'chainsim', 'attacks', 'cli')
    },
}
