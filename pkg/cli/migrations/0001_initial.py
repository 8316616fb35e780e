# Generated by Django 5.2.7 on 2026-10-17 10:41

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='CommandLog',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(max_length=50, verbose_name='Command')),
                ('status', models.CharField(choices=[('success', 'Success'), ('failed', 'Failed'), ('error', 'Error')], max_length=20, verbose_name='Status')),
                ('data_dir', models.CharField(blank=True, max_length=500, verbose_name='Data Directory')),
                ('message', models.TextField(blank=True, verbose_name='Message')),
                ('details', models.JSONField(blank=True, default=dict, verbose_name='Details')),
                ('duration', models.FloatField(blank=True, null=True, verbose_name='Duration (seconds)')),
                ('timestamp', models.DateTimeField(auto_now_add=True, verbose_name='Timestamp')),
            ],
            options={
                'verbose_name': 'Command Log',
                'verbose_name_plural': 'Command Logs',
                'ordering': ['-timestamp'],
                'indexes': [models.Index(fields=['-timestamp'], name='cli_command_timesta_5e81c2_idx'), models.Index(fields=['status', '-timestamp'], name='cli_command_status_a3d917_idx'), models.Index(fields=['command', '-timestamp'], name='cli_command_command_0f6b44_idx')],
            },
        ),
    ]
