from django.db import models
from django.contrib.auth import get_user_model
import uuid

from adaptation.engine.variants import AlignerKind, ViewMode, describe_variant

User = get_user_model()


class ExperimentRun(models.Model):
    STATUS_PENDING = 'pending'
    STATUS_RUNNING = 'running'
    STATUS_FINISHED = 'finished'
    STATUS_FAILED = 'failed'
    STATUS_CHOICES = [
        (STATUS_PENDING, 'Pending'),
        (STATUS_RUNNING, 'Running'),
        (STATUS_FINISHED, 'Finished'),
        (STATUS_FAILED, 'Failed'),
    ]
    VIEW_MODE_CHOICES = [(mode.value, mode.value) for mode in ViewMode]
    ALIGNER_CHOICES = [(kind.value, kind.value) for kind in AlignerKind]

    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    name = models.CharField(max_length=255, blank=True, verbose_name='run name')
    status = models.CharField(max_length=16, choices=STATUS_CHOICES, default=STATUS_PENDING)
    view_mode = models.CharField(max_length=32, choices=VIEW_MODE_CHOICES, default=ViewMode.DUAL.value)
    aligner_kind = models.CharField(max_length=16, choices=ALIGNER_CHOICES, default=AlignerKind.H_ADVERSARIAL.value)
    seed = models.IntegerField(default=13)
    config = models.JSONField(default=dict, verbose_name='run configuration')
    output_dir = models.CharField(max_length=1024, blank=True)

    best_iteration = models.PositiveIntegerField(null=True, blank=True)
    iterations_run = models.PositiveIntegerField(default=0)
    stopped_early = models.BooleanField(default=False)
    val_macro_f1 = models.FloatField(null=True, blank=True, verbose_name='validation macro-F1')
    target_macro_f1 = models.FloatField(null=True, blank=True, verbose_name='target macro-F1')
    error_message = models.TextField(blank=True)

    created_by = models.ForeignKey(
        User,
        on_delete=models.SET_NULL,
        null=True,
        blank=True,
        related_name='experiment_runs',
        verbose_name='submitted by'
    )
    created_at = models.DateTimeField(auto_now_add=True)
    started_at = models.DateTimeField(null=True, blank=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        verbose_name = 'experiment run'
        verbose_name_plural = 'experiment runs'
        ordering = ['-created_at']

    def __str__(self):
        return self.name or f"{self.variant} (seed {self.seed})"

    @property
    def variant(self) -> str:
        return describe_variant(self.view_mode, self.aligner_kind)

    @property
    def is_terminal(self) -> bool:
        return self.status in (self.STATUS_FINISHED, self.STATUS_FAILED)


class IterationRecord(models.Model):
    """One logged training iteration; the columns mirror the training log file."""
    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='iterations')
    iteration = models.PositiveIntegerField()
    lr = models.FloatField()
    stance_loss = models.FloatField()
    subj_loss = models.FloatField(null=True, blank=True)
    obj_loss = models.FloatField(null=True, blank=True)
    conf_subj_loss = models.FloatField(null=True, blank=True)
    conf_obj_loss = models.FloatField(null=True, blank=True)
    val_macro_f1 = models.FloatField(null=True, blank=True)
    seconds = models.FloatField(default=0.0)

    class Meta:
        verbose_name = 'iteration record'
        verbose_name_plural = 'iteration records'
        ordering = ['run', 'iteration']
        unique_together = ['run', 'iteration']

    def __str__(self):
        return f"{self.run_id} iteration {self.iteration}"
