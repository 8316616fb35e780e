from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class TxcodecConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'txcodec'
    verbose_name = _('Transaction Codec')
