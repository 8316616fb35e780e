from django.contrib import admin
from django.utils.html import format_html

from .models import CommandLog


@admin.register(CommandLog)
class CommandLogAdmin(admin.ModelAdmin):
    """Admin interface for operator command logs"""
    list_display = ['timestamp', 'command', 'status_badge', 'message_short', 'duration_display']
    list_filter = ['status', 'command', 'timestamp']
    search_fields = ['command', 'message', 'data_dir']
    readonly_fields = ['timestamp', 'command', 'status', 'data_dir', 'message', 'details', 'duration']
    date_hierarchy = 'timestamp'

    fieldsets = (
        ('Command', {
            'fields': ('command', 'status', 'data_dir', 'timestamp')
        }),
        ('Result', {
            'fields': ('message', 'duration')
        }),
        ('Details', {
            'fields': ('details',),
            'classes': ('collapse',)
        }),
    )

    def status_badge(self, obj):
        colors = {
            'success': 'green',
            'failed': 'red',
            'error': 'orange'
        }
        color = colors.get(obj.status, 'gray')
        return format_html(
            '<span style="color: {}; font-weight: bold;">{}</span>',
            color,
            obj.get_status_display()
        )
    status_badge.short_description = 'Status'

    def message_short(self, obj):
        return obj.message[:80] + '...' if len(obj.message) > 80 else obj.message
    message_short.short_description = 'Message'

    def duration_display(self, obj):
        if obj.duration:
            return f"{obj.duration:.2f}s"
        return "-"
    duration_display.short_description = 'Duration'

    def has_add_permission(self, request):
        return False

    def has_delete_permission(self, request, obj=None):
        return request.user.is_superuser
