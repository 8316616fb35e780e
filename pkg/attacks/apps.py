from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class AttacksConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'attacks'
    verbose_name = _('Integrity Attacks')
