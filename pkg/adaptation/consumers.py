from channels.generic.websocket import AsyncJsonWebsocketConsumer
from channels.db import database_sync_to_async
from uuid import UUID

from adaptation.models import ExperimentRun
from adaptation.serializers import ExperimentRunListSerializer, IterationRecordSerializer
from adaptation.services.experiments import ExperimentService
from adaptation.signals import run_group_name


class RunProgressConsumer(AsyncJsonWebsocketConsumer):
    """Streams the iteration trace of one experiment run as it is logged."""

    async def connect(self):
        raw = self.scope["url_route"]["kwargs"]["run_id"]
        try:
            self.run_id = UUID(raw)
        except ValueError:
            await self.close(code=4404)
            return

        if not await self._can_view_run(self.run_id):
            await self.close(code=4403)
            return

        self.last_iteration = 0
        self.group_name = run_group_name(self.run_id)
        await self.channel_layer.group_add(self.group_name, self.channel_name)
        await self.accept()

        run = await self._run_payload()
        iterations = await self._new_iterations()
        await self.send_json({"type": "init", "run": run, "iterations": iterations})

    async def disconnect(self, close_code):
        if hasattr(self, "group_name"):
            await self.channel_layer.group_discard(self.group_name, self.channel_name)

    async def receive_json(self, content, **kwargs):
        if content.get("action") == "refresh":
            await self.send_json({"type": "refresh", "iterations": await self._new_iterations()})

    async def run_progress(self, event):
        iterations = await self._new_iterations()
        if iterations:
            await self.send_json({"type": "progress", "iterations": iterations})

    async def run_status(self, event):
        await self.send_json({"type": "status", "status": event["status"]})

    @database_sync_to_async
    def _can_view_run(self, run_id):
        try:
            run = ExperimentRun.objects.get(id=run_id)
        except ExperimentRun.DoesNotExist:
            return False
        user = self.scope.get("user")
        if not (user and user.is_authenticated):
            return False
        return bool(user.is_staff or run.created_by_id == user.id)

    @database_sync_to_async
    def _run_payload(self):
        return ExperimentRunListSerializer(ExperimentRun.objects.get(id=self.run_id)).data

    @database_sync_to_async
    def _new_iterations(self):
        run = ExperimentRun.objects.get(id=self.run_id)
        records = ExperimentService().get_run_iterations(run, after=self.last_iteration)
        if records:
            self.last_iteration = records[-1].iteration
        return IterationRecordSerializer(records, many=True).data
