import logging

from celery import shared_task

from adaptation.exceptions import AdaptationError
from adaptation.repositories.repositories import ExperimentRunRepository
from adaptation.services.experiments import ExperimentService

logger = logging.getLogger(__name__)


@shared_task(name="adaptation.tasks.run_experiment")
def run_experiment(run_id):
    """Train a stored experiment run; failures are kept on the run record."""
    run = ExperimentRunRepository().get_by_id(run_id)
    if run is None:
        logger.warning("Experiment run %s no longer exists", run_id)
        return {"run_id": str(run_id), "status": "missing"}
    try:
        run = ExperimentService().execute(run)
    except AdaptationError as exc:
        return {"run_id": str(run_id), "status": "failed", "error": str(exc)}
    return {"run_id": str(run_id), "status": run.status, "val_macro_f1": run.val_macro_f1}
