from django.db import models
from django.utils import timezone
from django.utils.translation import gettext_lazy as _


class SimulationRun(models.Model):
    """Progress and result of one simulator run"""

    STATUS_CHOICES = [
        ('pending', _('Pending')),
        ('running', _('Running')),
        ('completed', _('Completed')),
        ('failed', _('Failed')),
    ]

    run_id = models.CharField(max_length=64, unique=True, db_index=True)
    workload_name = models.CharField(max_length=100, blank=True)
    workload = models.JSONField(default=dict, blank=True)
    seed = models.BigIntegerField(default=0)

    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='pending')
    progress_current = models.IntegerField(default=0)
    progress_total = models.IntegerField(default=0)
    progress_percentage = models.IntegerField(default=0)

    message = models.TextField(blank=True)
    summary = models.JSONField(default=dict, blank=True)
    output_path = models.CharField(max_length=500, blank=True)
    error_details = models.JSONField(default=list, blank=True)

    created_at = models.DateTimeField(auto_now_add=True)
    started_at = models.DateTimeField(null=True, blank=True)
    completed_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-created_at']
        verbose_name = _('Simulation Run')
        verbose_name_plural = _('Simulation Runs')
        indexes = [
            models.Index(fields=['-created_at']),
            models.Index(fields=['status']),
        ]

    def __str__(self):
        return f"{self.workload_name or self.run_id} - {self.status} ({self.progress_percentage}%)"

    def update_progress(self, current, total=None, message=None):
        self.progress_current = current
        if total is not None:
            self.progress_total = total
        if self.progress_total > 0:
            self.progress_percentage = min(100, int(self.progress_current / self.progress_total * 100))
        if message:
            self.message = message
        self.save(update_fields=['progress_current', 'progress_total', 'progress_percentage', 'message'])

    def mark_running(self):
        self.status = 'running'
        self.started_at = timezone.now()
        self.save(update_fields=['status', 'started_at'])

    def mark_completed(self, summary, output_path='', message=None):
        self.status = 'completed'
        self.completed_at = timezone.now()
        self.progress_percentage = 100
        self.summary = summary
        self.output_path = str(output_path)
        if message:
            self.message = message
        self.save(update_fields=['status', 'completed_at', 'progress_percentage', 'summary',
                                 'output_path', 'message'])

    def mark_failed(self, error_message):
        self.status = 'failed'
        self.completed_at = timezone.now()
        self.message = error_message
        if not isinstance(self.error_details, list):
            self.error_details = []
        self.error_details.append(error_message)
        self.save(update_fields=['status', 'completed_at', 'message', 'error_details'])

    @property
    def duration(self):
        """Run time in seconds, up to now while still running"""
        if not self.started_at:
            return None
        end_time = self.completed_at or timezone.now()
        return (end_time - self.started_at).total_seconds()

    @property
    def is_finished(self):
        return self.status in ['completed', 'failed']
