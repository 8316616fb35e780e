from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class UwebConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'uweb'
    verbose_name = _('UWeb Directory')
