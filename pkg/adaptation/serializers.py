from pathlib import Path

from django.conf import settings
from rest_framework import serializers

from adaptation.engine.layers import POOLING_MODES
from adaptation.engine.variants import AlignerKind, ViewMode
from adaptation.exceptions import ConfigurationError
from adaptation.models import ExperimentRun, IterationRecord

INPUT_PATH_FIELDS = ('source', 'target', 'embeddings', 'target_gold', 'source_silver', 'target_silver',
                     'subjectivity_corpus')
PATH_FIELDS = INPUT_PATH_FIELDS + ('output_dir',)


def _default_seed():
    return settings.DAN_SEED


def _default_output_dir():
    return str(settings.DAN_OUTPUT_ROOT)


# Run configuration
class RunConfigSerializer(serializers.Serializer):
    """
    Validates one experiment configuration, whether read from a ``key = value``
    file or submitted over the API. Relative paths resolve against
    ``context['base_dir']``; input files must exist.
    """
    # data
    source = serializers.CharField()
    target = serializers.CharField()
    embeddings = serializers.CharField()
    target_gold = serializers.CharField(required=False, allow_blank=True, default='')
    source_silver = serializers.CharField(required=False, allow_blank=True, default='')
    target_silver = serializers.CharField(required=False, allow_blank=True, default='')
    subjectivity_corpus = serializers.CharField(required=False, allow_blank=True, default='')
    output_dir = serializers.CharField(required=False, default=_default_output_dir)

    # variant and loss weights
    view_mode = serializers.CharField(required=False, default=ViewMode.DUAL.value)
    aligner = serializers.CharField(required=False, default=AlignerKind.H_ADVERSARIAL.value)
    alpha = serializers.FloatField(required=False, default=0.1, min_value=0.0)
    beta = serializers.FloatField(required=False, default=0.1, min_value=0.0)
    gamma = serializers.FloatField(required=False, default=0.1, min_value=0.0)
    lambda1 = serializers.FloatField(required=False, default=1.0)
    lambda2 = serializers.FloatField(required=False, default=1.0)

    # loop
    batch_size = serializers.IntegerField(required=False, default=8, min_value=1)
    critic_steps = serializers.IntegerField(required=False, default=5, min_value=0)
    warmup = serializers.IntegerField(required=False, default=100, min_value=1)
    max_iterations = serializers.IntegerField(required=False, default=2000, min_value=0)
    evaluate_every = serializers.IntegerField(required=False, default=50, min_value=1)
    patience = serializers.IntegerField(required=False, default=10, min_value=1)
    seed = serializers.IntegerField(required=False, default=_default_seed)

    # model
    d_h = serializers.IntegerField(required=False, default=128, min_value=1)
    d_f = serializers.IntegerField(required=False, default=128, min_value=1)
    sample_hidden = serializers.BooleanField(required=False, default=False)
    pooling = serializers.ChoiceField(choices=POOLING_MODES, required=False, default='mean')
    dropout = serializers.FloatField(required=False, default=0.1, min_value=0.0, max_value=0.99)
    clip = serializers.FloatField(required=False, default=0.01)
    validation_fraction = serializers.FloatField(required=False, default=0.1, min_value=0.0, max_value=0.9)
    precision = serializers.ChoiceField(choices=[64, 32], required=False, default=64)
    trainable_embeddings = serializers.BooleanField(required=False, default=False)
    embedding_dim = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=1)

    def to_internal_value(self, data):
        unknown = sorted(set(data) - set(self.fields))
        if unknown:
            raise serializers.ValidationError({key: ["Unknown configuration key."] for key in unknown})
        return super().to_internal_value(data)

    def validate_view_mode(self, value):
        try:
            return ViewMode.parse(value).value
        except ConfigurationError as exc:
            raise serializers.ValidationError(str(exc))

    def validate_aligner(self, value):
        try:
            return AlignerKind.parse(value).value
        except ConfigurationError as exc:
            raise serializers.ValidationError(str(exc))

    def validate_lambda1(self, value):
        if value <= 0:
            raise serializers.ValidationError("Learning-rate scale must be positive.")
        return value

    def validate_lambda2(self, value):
        return self.validate_lambda1(value)

    def validate_clip(self, value):
        if value <= 0:
            raise serializers.ValidationError("Clip bound must be positive.")
        return value

    def validate(self, attrs):
        base_dir = Path(self.context.get('base_dir') or Path.cwd())
        errors = {}
        for key in PATH_FIELDS:
            value = attrs.get(key)
            if not value:
                continue
            path = Path(value).expanduser()
            if not path.is_absolute():
                path = base_dir / path
            attrs[key] = str(path)
            if key in INPUT_PATH_FIELDS and not path.exists():
                errors[key] = [f"File not found: {path}"]

        view_mode = ViewMode(attrs['view_mode'])
        aligner = AlignerKind(attrs['aligner'])
        if view_mode.auxiliary_views and not (attrs.get('source_silver') or attrs.get('subjectivity_corpus')):
            errors.setdefault('source_silver', []).append(
                "Multi-view models need source_silver or subjectivity_corpus.")
        if aligner.adversarial and attrs['critic_steps'] < 1:
            errors.setdefault('critic_steps', []).append("Adversarial aligners need at least one critic step.")
        if errors:
            raise serializers.ValidationError(errors)
        return attrs


# Experiment run serializers
class ExperimentRunSerializer(serializers.ModelSerializer):
    """Serializer for displaying experiment runs."""
    variant = serializers.ReadOnlyField()
    created_by_name = serializers.CharField(source='created_by.username', read_only=True, default=None)

    class Meta:
        model = ExperimentRun
        fields = [
            'id', 'name', 'status', 'variant', 'view_mode', 'aligner_kind', 'seed', 'config',
            'output_dir', 'best_iteration', 'iterations_run', 'stopped_early', 'val_macro_f1',
            'target_macro_f1', 'error_message', 'created_by', 'created_by_name',
            'created_at', 'started_at', 'finished_at',
        ]
        read_only_fields = fields


class ExperimentRunListSerializer(serializers.ModelSerializer):
    """Lightweight serializer for run lists."""
    variant = serializers.ReadOnlyField()

    class Meta:
        model = ExperimentRun
        fields = ['id', 'name', 'status', 'variant', 'seed', 'val_macro_f1', 'target_macro_f1', 'created_at']
        read_only_fields = fields


class ExperimentRunCreateSerializer(serializers.Serializer):
    """Submission payload: an optional name plus a run configuration."""
    name = serializers.CharField(required=False, allow_blank=True, max_length=255, default='')
    config = serializers.DictField()

    def validate_config(self, value):
        config = RunConfigSerializer(data=value, context=self.context)
        config.is_valid(raise_exception=True)
        return dict(config.validated_data)


class IterationRecordSerializer(serializers.ModelSerializer):
    """Serializer for logged training iterations."""

    class Meta:
        model = IterationRecord
        fields = [
            'iteration', 'lr', 'stance_loss', 'subj_loss', 'obj_loss',
            'conf_subj_loss', 'conf_obj_loss', 'val_macro_f1', 'seconds',
        ]
        read_only_fields = fields
