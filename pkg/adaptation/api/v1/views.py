from django.conf import settings
from rest_framework import mixins, permissions, serializers, status, viewsets
from rest_framework.decorators import action
from rest_framework.response import Response
from drf_spectacular.utils import (
    OpenApiParameter,
    OpenApiResponse,
    extend_schema,
    extend_schema_view,
    inline_serializer,
)

from adaptation.engine.variants import AlignerKind, ViewMode, describe_variant
from adaptation.models import ExperimentRun
from adaptation.serializers import (
    ExperimentRunCreateSerializer,
    ExperimentRunListSerializer,
    ExperimentRunSerializer,
    IterationRecordSerializer,
)
from adaptation.services.experiments import ExperimentService


# =============================================================================
# EXPERIMENT RUN VIEWSETS
# =============================================================================

@extend_schema_view(
    list=extend_schema(
        summary="List Runs",
        description="Get all experiment runs submitted by the authenticated user",
        tags=["Experiment Runs"]
    ),
    retrieve=extend_schema(
        summary="Get Run",
        description="Get one experiment run with its configuration and final metrics",
        tags=["Experiment Runs"]
    ),
    create=extend_schema(
        summary="Submit Run",
        description="Validate a run configuration and queue it for training",
        tags=["Experiment Runs"],
        request=ExperimentRunCreateSerializer,
        responses={201: ExperimentRunSerializer},
    ),
    destroy=extend_schema(
        summary="Delete Run",
        description="Delete a run record and its iteration trace; output files are kept",
        tags=["Experiment Runs"]
    ),
)
class ExperimentRunViewSet(mixins.ListModelMixin,
                           mixins.RetrieveModelMixin,
                           mixins.CreateModelMixin,
                           mixins.DestroyModelMixin,
                           viewsets.GenericViewSet):
    """
    Experiment runs: submission, status and the logged iteration trace.
    """
    permission_classes = [permissions.IsAuthenticated]
    queryset = ExperimentRun.objects.all()

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.experiment_service = ExperimentService()

    def get_serializer_class(self):
        """Return appropriate serializer based on action."""
        if self.action == 'create':
            return ExperimentRunCreateSerializer
        elif self.action == 'list':
            return ExperimentRunListSerializer
        elif self.action == 'iterations':
            return IterationRecordSerializer
        return ExperimentRunSerializer

    def get_serializer_context(self):
        context = super().get_serializer_context()
        context['base_dir'] = settings.BASE_DIR
        return context

    def get_queryset(self):
        """Return runs visible to the authenticated user."""
        return self.experiment_service.get_user_runs(self.request.user)

    def create(self, request, *args, **kwargs):
        serializer = self.get_serializer(data=request.data)
        serializer.is_valid(raise_exception=True)
        run = self.experiment_service.create_run(
            user=request.user,
            config=serializer.validated_data['config'],
            name=serializer.validated_data.get('name', ''),
        )
        self.experiment_service.enqueue(run)
        return Response(ExperimentRunSerializer(run).data, status=status.HTTP_201_CREATED)

    def perform_destroy(self, instance):
        if instance.status == ExperimentRun.STATUS_RUNNING:
            raise serializers.ValidationError({'detail': 'A running experiment cannot be deleted.'})
        instance.delete()

    @extend_schema(
        summary="Get Run Iterations",
        description="Logged training iterations of a run, optionally only those after a given iteration",
        tags=["Experiment Runs"],
        parameters=[OpenApiParameter('after', int, description='Only iterations greater than this number')],
        responses={200: IterationRecordSerializer(many=True)},
    )
    @action(detail=True, methods=['get'])
    def iterations(self, request, pk=None):
        run = self.get_object()
        try:
            after = int(request.query_params.get('after', 0))
        except ValueError:
            return Response({'detail': 'after must be an integer'}, status=status.HTTP_400_BAD_REQUEST)
        records = self.experiment_service.get_run_iterations(run, after=after)
        return Response(IterationRecordSerializer(records, many=True).data, status=status.HTTP_200_OK)

    @extend_schema(
        summary="List Variants",
        description="Every view-mode and aligner combination with its experiment-table name",
        tags=["Experiment Runs"],
        responses={200: OpenApiResponse(response=inline_serializer(
            name='VariantSerializer',
            fields={
                'name': serializers.CharField(),
                'view_mode': serializers.CharField(),
                'aligner': serializers.CharField(),
            },
            many=True,
        ))},
    )
    @action(detail=False, methods=['get'])
    def variants(self, request):
        data = [
            {'name': describe_variant(mode, kind), 'view_mode': mode.value, 'aligner': kind.value}
            for mode in ViewMode for kind in AlignerKind
        ]
        return Response(data, status=status.HTTP_200_OK)
