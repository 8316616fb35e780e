from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class MaxrateConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'maxrate'
    verbose_name = _('Max-Rate Constructs')
