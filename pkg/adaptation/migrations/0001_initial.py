# Generated by Django 5.2.7 on 2026-10-17 09:12

import django.db.models.deletion
import uuid
from django.conf import settings
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
        migrations.swappable_dependency(settings.AUTH_USER_MODEL),
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.UUIDField(default=uuid.uuid4, editable=False, primary_key=True, serialize=False)),
                ('name', models.CharField(blank=True, max_length=255, verbose_name='run name')),
                ('status', models.CharField(choices=[('pending', 'Pending'), ('running', 'Running'), ('finished', 'Finished'), ('failed', 'Failed')], default='pending', max_length=16)),
                ('view_mode', models.CharField(choices=[('single', 'single'), ('dual', 'dual'), ('dual-subj-only', 'dual-subj-only'), ('dual-obj-only', 'dual-obj-only')], default='dual', max_length=32)),
                ('aligner_kind', models.CharField(choices=[('none', 'none'), ('coral', 'coral'), ('h-adversarial', 'h-adversarial'), ('wasserstein', 'wasserstein')], default='h-adversarial', max_length=16)),
                ('seed', models.IntegerField(default=13)),
                ('config', models.JSONField(default=dict, verbose_name='run configuration')),
                ('output_dir', models.CharField(blank=True, max_length=1024)),
                ('best_iteration', models.PositiveIntegerField(blank=True, null=True)),
                ('iterations_run', models.PositiveIntegerField(default=0)),
                ('stopped_early', models.BooleanField(default=False)),
                ('val_macro_f1', models.FloatField(blank=True, null=True, verbose_name='validation macro-F1')),
                ('target_macro_f1', models.FloatField(blank=True, null=True, verbose_name='target macro-F1')),
                ('error_message', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('started_at', models.DateTimeField(blank=True, null=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
                ('created_by', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.SET_NULL, related_name='experiment_runs', to=settings.AUTH_USER_MODEL, verbose_name='submitted by')),
            ],
            options={
                'verbose_name': 'experiment run',
                'verbose_name_plural': 'experiment runs',
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='IterationRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('iteration', models.PositiveIntegerField()),
                ('lr', models.FloatField()),
                ('stance_loss', models.FloatField()),
                ('subj_loss', models.FloatField(blank=True, null=True)),
                ('obj_loss', models.FloatField(blank=True, null=True)),
                ('conf_subj_loss', models.FloatField(blank=True, null=True)),
                ('conf_obj_loss', models.FloatField(blank=True, null=True)),
                ('val_macro_f1', models.FloatField(blank=True, null=True)),
                ('seconds', models.FloatField(default=0.0)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='iterations', to='adaptation.experimentrun')),
            ],
            options={
                'verbose_name': 'iteration record',
                'verbose_name_plural': 'iteration records',
                'ordering': ['run', 'iteration'],
                'unique_together': {('run', 'iteration')},
            },
        ),
    ]
