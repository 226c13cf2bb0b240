import logging

from django.db import transaction
from django.db.models.signals import post_save
from django.dispatch import Signal, receiver
from asgiref.sync import async_to_sync
from channels.layers import get_channel_layer

from adaptation.models import ExperimentRun

logger = logging.getLogger(__name__)

# Sent with run_id and iterations after a batch of IterationRecords is stored.
iterations_logged = Signal()


def run_group_name(run_id):
    return f"run_{run_id}"


def _broadcast_run(run_id, event_type, **payload):
    channel_layer = get_channel_layer()
    if channel_layer is None:
        return
    try:
        async_to_sync(channel_layer.group_send)(
            run_group_name(run_id),
            {"type": event_type, "run_id": str(run_id), **payload},
        )
    except Exception:
        # Progress streaming never fails a training run.
        logger.warning("Could not broadcast %s for run %s", event_type, run_id, exc_info=True)


def _on_commit_broadcast(run_id, event_type, **payload):
    transaction.on_commit(lambda: _broadcast_run(run_id, event_type, **payload))


@receiver(iterations_logged)
def iterations_changed(sender, run_id, iterations, **kwargs):
    if iterations:
        _on_commit_broadcast(run_id, "run.progress", last_iteration=max(iterations))


@receiver(post_save, sender=ExperimentRun)
def run_changed(sender, instance, created, **kwargs):
    _on_commit_broadcast(instance.id, "run.status", status=instance.status)
