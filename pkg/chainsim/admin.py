from django.contrib import admin
from django.utils.html import format_html

from .models import SimulationRun


@admin.register(SimulationRun)
class SimulationRunAdmin(admin.ModelAdmin):
    """Admin interface for simulator runs"""
    list_display = ['created_at', 'workload_name', 'seed', 'status_badge', 'progress_percentage', 'duration_display']
    list_filter = ['status', 'workload_name', 'created_at']
    search_fields = ['run_id', 'workload_name', 'message']
    readonly_fields = ['run_id', 'workload_name', 'workload', 'seed', 'status', 'progress_current',
                       'progress_total', 'progress_percentage', 'message', 'summary', 'output_path',
                       'error_details', 'created_at', 'started_at', 'completed_at']
    date_hierarchy = 'created_at'

    fieldsets = (
        ('Run', {
            'fields': ('run_id', 'workload_name', 'seed', 'status', 'message')
        }),
        ('Progress', {
            'fields': ('progress_current', 'progress_total', 'progress_percentage')
        }),
        ('Results', {
            'fields': ('summary', 'output_path', 'error_details')
        }),
        ('Workload', {
            'fields': ('workload',),
            'classes': ('collapse',)
        }),
        ('Timestamps', {
            'fields': ('created_at', 'started_at', 'completed_at'),
            'classes': ('collapse',)
        }),
    )

    def status_badge(self, obj):
        colors = {
            'completed': 'green',
            'failed': 'red',
            'running': 'orange',
        }
        color = colors.get(obj.status, 'gray')
        return format_html(
            '<span style="color: {}; font-weight: bold;">{}</span>',
            color,
            obj.get_status_display()
        )
    status_badge.short_description = 'Status'

    def duration_display(self, obj):
        if obj.duration:
            return f"{obj.duration:.1f}s"
        return "-"
    duration_display.short_description = 'Duration'

    def has_add_permission(self, request):
        return False
