from rest_framework import serializers

from channels.transforms import parse_channel
from codec.embedding import MODES
from core.exceptions import InvalidInput
from generator.params import parse_shape
from optimizer.config import parse_eta

from .models import ExperimentRun, ResultRow
from .spec import ExperimentSpec


def _as_validation_error(func, value):
    try:
        return func(value)
    except InvalidInput as e:
        raise serializers.ValidationError(str(e))


class ExperimentSpecSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=ExperimentRun.KIND_CHOICES, default='bench')
    generator_seed = serializers.IntegerField(min_value=0)
    hidden = serializers.IntegerField(min_value=1)
    latent_shape = serializers.CharField()
    image_shape = serializers.CharField()
    channels = serializers.ListField(child=serializers.CharField(), allow_empty=False)
    steps = serializers.ListField(child=serializers.IntegerField(min_value=0), allow_empty=False)
    trials = serializers.IntegerField(min_value=1)
    mode = serializers.ChoiceField(choices=MODES)
    master_seed = serializers.IntegerField(min_value=0)
    eta = serializers.CharField()
    workers = serializers.IntegerField(min_value=1, default=1)

    def validate_latent_shape(self, value):
        return _as_validation_error(parse_shape, value)

    def validate_image_shape(self, value):
        return _as_validation_error(parse_shape, value)

    def validate_channels(self, value):
        return [_as_validation_error(parse_channel, label) for label in value]

    def validate_steps(self, value):
        return sorted(set(value))

    def validate_eta(self, value):
        _as_validation_error(parse_eta, value)
        return value.strip().lower()

    def validate(self, data):
        (c, h, w), (H, W, _) = data['latent_shape'], data['image_shape']
        if H % h or W % w or H // h != W // w:
            raise serializers.ValidationError("Image shape must be an integer upsampling of the latent shape")
        return data

    def create(self, validated_data):
        return ExperimentSpec(**validated_data)


class ResultRowSerializer(serializers.ModelSerializer):
    class Meta:
        model = ResultRow
        fields = [
            'channel', 'steps', 'mean_accuracy', 'std_accuracy', 'trials',
            'mean_gain', 'gain_percent', 'gain_pvalue', 'mean_recon', 'severity_rank',
        ]


class ExperimentRunSerializer(serializers.ModelSerializer):
    rows = ResultRowSerializer(many=True, read_only=True)

    class Meta:
        model = ExperimentRun
        fields = [
            'id', 'kind', 'master_seed', 'generator_seed', 'hidden_width', 'message_mode',
            'trials', 'channels', 'steps', 'optimizer_hash', 'schema_version',
            'output_dir', 'created_at', 'rows',
        ]
        read_only_fields = ['created_at']
