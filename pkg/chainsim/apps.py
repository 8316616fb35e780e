from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class ChainsimConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'chainsim'
    verbose_name = _('Chain Simulator')
