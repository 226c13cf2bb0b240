from abc import ABC
from typing import Any, Iterable, List, Optional

from django.db import models, transaction
from django.utils import timezone

from adaptation.models import ExperimentRun, IterationRecord


# =============================================================================
# BASE REPOSITORY
# =============================================================================

class BaseRepository(ABC):
    """Base repository class for data access layer."""

    def __init__(self, model: models.Model):
        self.model = model

    def get_by_id(self, id: Any) -> Optional[models.Model]:
        """Get a single object by ID."""
        try:
            return self.model.objects.get(id=id)
        except (self.model.DoesNotExist, ValueError):
            return None

    def get_all(self) -> List[models.Model]:
        """Get all objects."""
        return list(self.model.objects.all())

    def create(self, **kwargs) -> models.Model:
        """Create a new object."""
        return self.model.objects.create(**kwargs)

    def update(self, obj: models.Model, **kwargs) -> models.Model:
        """Update an existing object."""
        for key, value in kwargs.items():
            setattr(obj, key, value)
        obj.save()
        return obj

    def delete(self, obj: models.Model) -> bool:
        """Delete an object."""
        obj.delete()
        return True

    def exists(self, **kwargs) -> bool:
        """Check if an object exists."""
        return self.model.objects.filter(**kwargs).exists()


# =============================================================================
# EXPERIMENT RUN REPOSITORY
# =============================================================================

class ExperimentRunRepository(BaseRepository):
    """Repository for ExperimentRun model operations."""

    def __init__(self):
        super().__init__(ExperimentRun)

    def get_by_user(self, user) -> models.QuerySet:
        """Runs submitted by ``user``; staff see every run."""
        queryset = ExperimentRun.objects.select_related('created_by')
        if getattr(user, 'is_staff', False):
            return queryset.all()
        return queryset.filter(created_by=user)

    def get_by_status(self, status: str) -> List[ExperimentRun]:
        return list(ExperimentRun.objects.filter(status=status))

    def mark_running(self, run: ExperimentRun) -> ExperimentRun:
        return self.update(run, status=ExperimentRun.STATUS_RUNNING, started_at=timezone.now(), error_message='')

    def mark_finished(self, run: ExperimentRun, **results) -> ExperimentRun:
        return self.update(run, status=ExperimentRun.STATUS_FINISHED, finished_at=timezone.now(), **results)

    def mark_failed(self, run: ExperimentRun, message: str) -> ExperimentRun:
        return self.update(run, status=ExperimentRun.STATUS_FAILED, finished_at=timezone.now(),
                           error_message=message)


# =============================================================================
# ITERATION RECORD REPOSITORY
# =============================================================================

class IterationRecordRepository(BaseRepository):
    """Repository for IterationRecord model operations."""

    def __init__(self):
        super().__init__(IterationRecord)

    def get_by_run(self, run_id: Any, after: int = 0) -> List[IterationRecord]:
        """Iterations of a run in order, optionally only those after iteration ``after``."""
        return list(IterationRecord.objects.filter(run_id=run_id, iteration__gt=after).order_by('iteration'))

    def bulk_create_for_run(self, run: ExperimentRun, logs: Iterable) -> List[IterationRecord]:
        """Persist a batch of training iteration logs for ``run``."""
        records = [
            IterationRecord(
                run=run,
                iteration=log.iteration,
                lr=log.lr,
                stance_loss=log.stance,
                subj_loss=log.subj,
                obj_loss=log.obj,
                conf_subj_loss=log.conf_subj,
                conf_obj_loss=log.conf_obj,
                val_macro_f1=log.val_macro_f1,
                seconds=log.seconds,
            )
            for log in logs
        ]
        with transaction.atomic():
            created = IterationRecord.objects.bulk_create(records)
        return created

    def clear_run(self, run_id: Any) -> int:
        deleted, _ = IterationRecord.objects.filter(run_id=run_id).delete()
        return deleted
